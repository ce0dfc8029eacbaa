#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "fxcor/config.hpp"
#include "fxcor/controller.hpp"

namespace fxcor {

struct AgentDesign {
  AgentModel model;
  RegulatorSolution regulator;
  NormalForm normal_form;
  Matrix x_inv;
  std::vector<ChannelGains> channels;
};

/// Everything needed to simulate and certify one scenario.
struct ScenarioDesign {
  DirectedGraph graph;
  CouplingMatrix coupling;
  GainMatrixK k;
  ExosystemModel exo;
  double s_norm = 0.0;
  std::vector<AgentDesign> agents;
  ObserverParams observer;
  AttackBudget budget;
  AttackSchedule schedule;
  double t0 = 0.0;

  // Certification outcome. A design that fails a condition is still
  // simulatable; the failure is recorded here instead of thrown.
  ObserverCertificate certificate;
  bool certificate_valid = false;
  std::string certificate_error;
  bool hurwitz_ok = true;
  std::string hurwitz_error;
  SettlingBounds bounds{std::numeric_limits<double>::quiet_NaN(),
                        std::numeric_limits<double>::quiet_NaN()};

  std::size_t agent_count() const { return agents.size(); }
  std::size_t q() const { return exo.q(); }
  std::size_t state_dimension() const {
    std::size_t d = q() * (1 + agents.size());
    for (const auto& a : agents) d += a.model.n();
    return d;
  }
  bool fully_certified() const { return certificate_valid && hurwitz_ok; }
};

inline AttackSchedule build_schedule(const ScenarioConfig& cfg) {
  if (cfg.schedule.intervals) {
    return AttackSchedule(*cfg.schedule.intervals, cfg.run.horizon_seconds, cfg.run.t0_seconds);
  }
  return generate_schedule(cfg.schedule.seed, cfg.budget, cfg.run.horizon_seconds,
                           cfg.schedule.mean_on_seconds, cfg.schedule.mean_off_seconds,
                           cfg.run.t0_seconds);
}

/// Certificate and Hurwitz checks for a design whose observer, budget or
/// channels may have been edited after synthesis.
inline void certify_design(ScenarioDesign& d) {
  d.certificate_valid = false;
  d.certificate_error.clear();
  d.certificate = ObserverCertificate{};
  try {
    d.certificate = compute_constants(d.observer, d.k, d.agent_count(), d.q(), d.s_norm);
    d.certificate.conditions = {condition_one(d.certificate, d.budget),
                                condition_two(d.certificate, d.budget), ConditionResult{}};
    d.certificate = compute_settling_certificate(d.certificate, d.budget, d.t0);
    d.certificate_valid = d.certificate.all_conditions_hold();
    if (!d.certificate_valid) d.certificate_error = "condition (iii) fails";
  } catch (const Error& e) {
    d.certificate_error = e.what();
  }
  Vector channel_bounds;
  for (const auto& a : d.agents)
    for (const auto& c : a.channels) channel_bounds.push_back(c.t_c_channel);
  if (d.hurwitz_ok && d.certificate_valid) {
    d.bounds = total_settling_bound(d.certificate.t_o, channel_bounds);
  } else if (d.hurwitz_ok) {
    d.bounds = total_settling_bound(0.0, channel_bounds);
    d.bounds.t_a = std::numeric_limits<double>::quiet_NaN();
  }
}

/// Turns a parsed scenario into a design. Structural problems (graph,
/// regulator equations, normal form, channel sizes) throw SynthesisError
/// with a field path; certificate and Hurwitz failures are recorded.
inline ScenarioDesign synthesize(const ScenarioConfig& cfg) {
  auto synth_fail = [](const std::string& path, const Error& e) -> void {
    throw Error(ErrorCode::kSynthesisError, path + ": " + e.what());
  };
  ScenarioDesign d;
  d.t0 = cfg.run.t0_seconds;
  d.observer = cfg.observer;
  d.budget = cfg.budget;
  d.exo.s = cfg.s;
  d.s_norm = spectral_norm(cfg.s);
  try {
    d.graph = DirectedGraph::from_edges(cfg.agent_count, cfg.edges);
  } catch (const Error& e) {
    synth_fail("graph.edges", e);
  }
  d.coupling = build_h_matrix(d.graph);
  if (cfg.agent_count > 0) {
    try {
      d.k = cfg.k_diagonal ? accept_gain_override(d.coupling, *cfg.k_diagonal)
                           : compute_gain_matrix_k(d.coupling);
    } catch (const Error& e) {
      synth_fail(cfg.k_diagonal ? "graph.k_diagonal" : "graph", e);
    }
  }
  try {
    d.schedule = build_schedule(cfg);
  } catch (const Error& e) {
    synth_fail("attack.schedule", e);
  }

  for (std::size_t i = 0; i < cfg.agents.size(); ++i) {
    const std::string path = "agents[" + std::to_string(i) + "]";
    AgentDesign ad;
    ad.model = cfg.agents[i];
    try {
      ad.regulator = solve_regulator_equations(ad.model, d.exo);
    } catch (const Error& e) {
      synth_fail(path + " regulator equations", e);
    }
    try {
      ad.normal_form = luenberger_normal_form(ad.model);
      ad.x_inv = inverse(ad.normal_form.x_mat);
    } catch (const Error& e) {
      synth_fail(path + " normal form", e);
    }
    const auto& idx = ad.normal_form.indices;
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const std::string cpath = "controller" + (cfg.channel_overrides.empty()
                                                    ? std::string()
                                                    : ".overrides[" + std::to_string(i) + "][" +
                                                          std::to_string(r) + "]");
      ChannelSpec spec = cfg.channel;
      if (!cfg.channel_overrides.empty()) {
        if (cfg.channel_overrides[i].size() != idx.size()) {
          throw Error(ErrorCode::kSynthesisError,
                      "controller.overrides[" + std::to_string(i) + "]: agent has " +
                          std::to_string(idx.size()) + " input channels");
        }
        spec = cfg.channel_overrides[i][r];
      }
      if (spec.psi.size() != idx[r] || spec.psi_bar.size() != idx[r]) {
        throw Error(ErrorCode::kSynthesisError,
                    cpath + ": psi/psi_bar length must equal channel order " +
                        std::to_string(idx[r]) + " of agent " + std::to_string(i + 1));
      }
      ChannelGains g;
      g.order = idx[r];
      g.psi = spec.psi;
      g.psi_bar = spec.psi_bar;
      try {
        auto ex = homogeneity_exponents(spec.gamma_n, spec.gamma_bar_n, g.order);
        g.gamma = std::move(ex.gamma);
        g.gamma_bar = std::move(ex.gamma_bar);
      } catch (const Error& e) {
        synth_fail(cpath, e);
      }
      g.q_lyap = spec.q_scale * Matrix::identity(g.order);
      g.q_bar_lyap = spec.q_bar_scale * Matrix::identity(g.order);
      try {
        channel_settling_bound(g);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kNotHurwitz) synth_fail(cpath, e);
        d.hurwitz_ok = false;
        d.hurwitz_error = "agent " + std::to_string(i + 1) + " channel " + std::to_string(r + 1) +
                          ": " + e.what();
        g.t_c_channel = std::numeric_limits<double>::quiet_NaN();
      }
      ad.channels.push_back(std::move(g));
    }
    d.agents.push_back(std::move(ad));
  }
  certify_design(d);
  return d;
}

/// Stacked initial state [v; η₁..η_N; x₁..x_N]. Explicit pieces from the
/// config are kept; the rest are uniform in (−range, range) from one
/// mt19937_64 stream seeded by `seed`, drawn in the order v, η, x.
inline Vector initial_state(const ScenarioConfig& cfg, const ScenarioDesign& d,
                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-cfg.initial.range, cfg.initial.range);
  const std::size_t q = d.q();
  Vector out;
  out.reserve(d.state_dimension());
  auto draw = [&](std::size_t n, const Vector* given) {
    for (std::size_t k = 0; k < n; ++k) {
      const double r = dist(rng);
      out.push_back(given ? (*given)[k] : r);
    }
  };
  draw(q, cfg.initial.v ? &*cfg.initial.v : nullptr);
  for (std::size_t i = 0; i < d.agent_count(); ++i)
    draw(q, cfg.initial.eta ? &(*cfg.initial.eta)[i] : nullptr);
  for (std::size_t i = 0; i < d.agent_count(); ++i)
    draw(d.agents[i].model.n(), cfg.initial.x ? &(*cfg.initial.x)[i] : nullptr);
  return out;
}

}  // namespace fxcor
