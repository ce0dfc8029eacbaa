#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "fxcor/design.hpp"
#include "fxcor/numerics/rk4.hpp"

namespace fxcor {

/// Feedback for one agent with scratch buffers, so evaluating it inside the
/// integrator does not allocate.
class AgentController {
 public:
  explicit AgentController(const AgentDesign& a)
      : a_(&a), n_(a.model.n()), m_(a.model.m()), xt_(n_), z_(n_), w_(m_) {}

  /// u = X⁻¹(ω − U x̃) + Γη with x̃ = x − Πη.
  void compute(const double* x, const double* eta, double* u) const {
    const AgentDesign& a = *a_;
    const std::size_t q = a.regulator.pi.cols();
    for (std::size_t r = 0; r < n_; ++r) {
      double acc = x[r];
      for (std::size_t c = 0; c < q; ++c) acc -= a.regulator.pi(r, c) * eta[c];
      xt_[r] = acc;
    }
    const Matrix& t = a.normal_form.t_mat;
    for (std::size_t r = 0; r < n_; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < n_; ++c) acc += t(r, c) * xt_[c];
      z_[r] = acc;
    }
    std::size_t off = 0;
    for (std::size_t r = 0; r < m_; ++r) {
      double w = chain_feedback(a.channels[r], z_.data() + off);
      off += a.channels[r].order;
      for (std::size_t c = 0; c < n_; ++c) w -= a.normal_form.u_mat(r, c) * xt_[c];
      w_[r] = w;
    }
    for (std::size_t r = 0; r < m_; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < m_; ++c) acc += a.x_inv(r, c) * w_[c];
      for (std::size_t c = 0; c < q; ++c) acc += a.regulator.gamma(r, c) * eta[c];
      u[r] = acc;
    }
  }

 private:
  const AgentDesign* a_;
  std::size_t n_, m_;
  mutable Vector xt_, z_, w_;
};

inline Vector control_input(const ScenarioDesign& design, std::size_t agent_index,
                            std::span<const double> x, std::span<const double> eta) {
  const AgentDesign& a = design.agents.at(agent_index);
  if (x.size() != a.model.n() || eta.size() != design.q()) {
    throw Error(ErrorCode::kDimensionMismatch, "control_input sizes");
  }
  Vector u(a.model.m());
  AgentController(a).compute(x.data(), eta.data(), u.data());
  return u;
}

/// Right-hand side of the stacked system [v; η₁..η_N; x₁..x_N]. The link
/// indicator θ is latched per integration segment through set_theta, so a
/// single step never mixes attack and normal dynamics.
class ClosedLoop {
 public:
  ClosedLoop(const ScenarioDesign& design, bool observer_only = false)
      : d_(&design),
        observer_only_(observer_only),
        kernel_(design.graph, design.observer, design.exo.s),
        q_(design.q()),
        n_agents_(design.agent_count()) {
    std::size_t off = q_ * (1 + n_agents_);
    for (const auto& a : design.agents) {
      controllers_.emplace_back(a);
      x_offsets_.push_back(off);
      off += a.model.n();
      max_m_ = std::max(max_m_, a.model.m());
    }
    dimension_ = observer_only ? q_ * (1 + n_agents_) : off;
    u_.resize(max_m_);
  }

  std::size_t dimension() const { return dimension_; }
  bool observer_only() const { return observer_only_; }
  void set_theta(int theta) { theta_ = theta; }
  int theta() const { return theta_; }
  std::size_t x_offset(std::size_t i) const { return x_offsets_[i]; }

  void operator()(double, std::span<const double> s, std::span<double> ds) const {
    const Matrix& sm = d_->exo.s;
    for (std::size_t r = 0; r < q_; ++r) {
      double acc = 0.0;
      for (std::size_t c = 0; c < q_; ++c) acc += sm(r, c) * s[c];
      ds[r] = acc;
    }
    kernel_(s.subspan(0, q_), s.subspan(q_, q_ * n_agents_), theta_,
            ds.subspan(q_, q_ * n_agents_));
    if (observer_only_) return;
    for (std::size_t i = 0; i < n_agents_; ++i) {
      const AgentModel& m = d_->agents[i].model;
      const std::size_t n = m.n(), mm = m.m();
      const double* x = s.data() + x_offsets_[i];
      const double* eta = s.data() + q_ * (1 + i);
      controllers_[i].compute(x, eta, u_.data());
      double* dx = ds.data() + x_offsets_[i];
      for (std::size_t r = 0; r < n; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < n; ++c) acc += m.a(r, c) * x[c];
        for (std::size_t c = 0; c < mm; ++c) acc += m.b(r, c) * u_[c];
        for (std::size_t c = 0; c < q_; ++c) acc += m.e(r, c) * s[c];
        dx[r] = acc;
      }
    }
  }

  /// u_i at the given stacked state.
  Vector input(std::size_t i, std::span<const double> s) const {
    Vector u(d_->agents[i].model.m());
    controllers_[i].compute(s.data() + x_offsets_[i], s.data() + q_ * (1 + i), u.data());
    return u;
  }

 private:
  const ScenarioDesign* d_;
  bool observer_only_;
  ObserverKernel kernel_;
  std::size_t q_, n_agents_;
  std::vector<AgentController> controllers_;
  std::vector<std::size_t> x_offsets_;
  std::size_t max_m_ = 0;
  std::size_t dimension_ = 0;
  int theta_ = 1;
  mutable Vector u_;
};

inline ClosedLoop assemble_closed_loop(const ScenarioDesign& design, bool observer_only = false) {
  for (const auto& a : design.agents) {
    if (a.model.q() != design.q() || a.regulator.pi.rows() != a.model.n()) {
      throw Error(ErrorCode::kDimensionMismatch, "agent and exosystem dimensions disagree");
    }
  }
  return ClosedLoop(design, observer_only);
}

/// One recorded row of derived quantities.
struct Sample {
  double t = 0.0;
  int theta = 1;
  Vector v;
  Vector eta_err;  // N·q, agent-major
  Vector e;        // Σ p_i
  Vector u;        // Σ m_i
  double lyapunov = 0.0;
};

/// Quantities kept at every grid point; these drive settling detection and
/// the Lyapunov regime checks.
struct MonitorSeries {
  std::vector<double> t;
  std::vector<int> theta;  // θ on the step ending at t[k]; θ(t0) at k = 0
  std::vector<double> lyapunov;
  std::vector<double> max_eta_err;      // max_i ‖η̃_i‖
  std::vector<double> stacked_eta_err;  // ‖η̃‖
  std::vector<double> max_output_err;   // max_i ‖e_i‖ (NaN when observer-only)
};

struct SettlingSummary {
  std::optional<double> observer_settle;
  std::optional<double> output_settle;
};

struct SimulationResult {
  std::vector<Sample> samples;
  MonitorSeries monitor;
  Vector final_state;
  SettlingSummary settling;
  double tolerance = 1e-3;
  bool observer_only = false;
};

struct RunOptions {
  double t0 = 0.0;
  double horizon = 160.0;
  double h = 1e-3;
  double tolerance = 1e-3;
  std::size_t record_stride = 10;
  bool observer_only = false;
  bool record_samples = true;
};

/// Earliest grid time τ with norm < tol on every later grid point, or
/// nullopt if the last point is still above tol.
inline std::optional<double> settling_time(std::span<const double> times,
                                           std::span<const double> norms, double tol) {
  if (times.empty() || times.size() != norms.size()) return std::nullopt;
  for (std::size_t k = norms.size(); k-- > 0;) {
    if (!(norms[k] < tol)) {
      if (k + 1 == norms.size()) return std::nullopt;
      return times[k + 1];
    }
  }
  return times.front();
}

namespace detail {

inline double block_norm(const double* p, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += p[i] * p[i];
  return std::sqrt(s);
}

}  // namespace detail

/// Integrates the closed loop from x0 with breakpoints at every attack
/// boundary and records the derived series.
inline SimulationResult run(const ScenarioDesign& design, std::span<const double> x0,
                            const RunOptions& opt) {
  if (!(opt.h > 0.0)) throw std::invalid_argument("step must be positive");
  ClosedLoop loop = assemble_closed_loop(design, opt.observer_only);
  const std::size_t q = design.q(), n_agents = design.agent_count();
  if (x0.size() < loop.dimension()) {
    throw Error(ErrorCode::kDimensionMismatch, "initial state has " + std::to_string(x0.size()) +
                                                   " entries, need " +
                                                   std::to_string(loop.dimension()));
  }
  const std::span<const double> init = x0.subspan(0, loop.dimension());

  SimulationResult res;
  res.tolerance = opt.tolerance;
  res.observer_only = opt.observer_only;
  const std::size_t expected = static_cast<std::size_t>((opt.horizon - opt.t0) / opt.h) + 2 +
                               2 * design.schedule.intervals().size();
  MonitorSeries& mon = res.monitor;
  mon.t.reserve(expected);
  mon.theta.reserve(expected);
  mon.lyapunov.reserve(expected);
  mon.max_eta_err.reserve(expected);
  mon.stacked_eta_err.reserve(expected);
  mon.max_output_err.reserve(expected);

  Vector eta_err(q * n_agents);
  std::size_t sigma_dim = 0;
  Vector e_all;
  for (const auto& a : design.agents) sigma_dim += a.model.p();
  e_all.resize(sigma_dim);

  loop.set_theta(theta(design.schedule, opt.t0));
  std::size_t point = 0;
  Rk4Hooks hooks;
  hooks.on_segment = [&](double start, double end) {
    loop.set_theta(theta(design.schedule, 0.5 * (start + end)));
  };
  hooks.on_point = [&](double t, std::span<const double> s) {
    const double* v = s.data();
    double max_eta = 0.0, stacked = 0.0;
    for (std::size_t i = 0; i < n_agents; ++i) {
      for (std::size_t r = 0; r < q; ++r) eta_err[i * q + r] = s[q * (1 + i) + r] - v[r];
      const double nn = detail::block_norm(eta_err.data() + i * q, q);
      max_eta = std::max(max_eta, nn);
      stacked += nn * nn;
    }
    double max_e = std::numeric_limits<double>::quiet_NaN();
    if (!opt.observer_only) {
      max_e = 0.0;
      std::size_t off = 0;
      for (std::size_t i = 0; i < n_agents; ++i) {
        const AgentModel& m = design.agents[i].model;
        const double* x = s.data() + loop.x_offset(i);
        for (std::size_t r = 0; r < m.p(); ++r) {
          double acc = 0.0;
          for (std::size_t c = 0; c < m.n(); ++c) acc += m.c(r, c) * x[c];
          for (std::size_t c = 0; c < q; ++c) acc += m.f(r, c) * v[c];
          e_all[off + r] = acc;
        }
        max_e = std::max(max_e, detail::block_norm(e_all.data() + off, m.p()));
        off += m.p();
      }
    }
    const double lyap =
        n_agents == 0
            ? 0.0
            : lyapunov_v(consensus_errors(design.coupling, eta_err, q), design.k, design.observer);
    const int th = point == 0 ? theta(design.schedule, t) : loop.theta();
    mon.t.push_back(t);
    mon.theta.push_back(th);
    mon.lyapunov.push_back(lyap);
    mon.max_eta_err.push_back(max_eta);
    mon.stacked_eta_err.push_back(std::sqrt(stacked));
    mon.max_output_err.push_back(max_e);

    if (opt.record_samples && point % std::max<std::size_t>(opt.record_stride, 1) == 0) {
      Sample smp;
      smp.t = t;
      smp.theta = th;
      smp.v.assign(v, v + q);
      smp.eta_err = eta_err;
      if (!opt.observer_only) {
        smp.e = e_all;
        for (std::size_t i = 0; i < n_agents; ++i) {
          const Vector u = loop.input(i, s);
          smp.u.insert(smp.u.end(), u.begin(), u.end());
        }
      }
      smp.lyapunov = lyap;
      res.samples.push_back(std::move(smp));
    }
    ++point;
    res.final_state.assign(s.begin(), s.end());
    return true;
  };
  const std::vector<double> bps = design.schedule.switching_times();
  const OdeRhs rhs = [&loop](double t, std::span<const double> x, std::span<double> dx) {
    loop(t, x, dx);
  };
  integrate_rk4_stream(rhs, init, opt.t0, opt.horizon, opt.h, bps, hooks);

  // Keep the last grid point in the decimated record.
  if (opt.record_samples && !res.samples.empty() && res.samples.back().t != mon.t.back()) {
    Sample smp;
    smp.t = mon.t.back();
    smp.theta = mon.theta.back();
    const Vector& s = res.final_state;
    smp.v.assign(s.begin(), s.begin() + static_cast<long>(q));
    smp.eta_err = eta_err;
    if (!opt.observer_only) {
      smp.e = e_all;
      for (std::size_t i = 0; i < n_agents; ++i) {
        const Vector u = loop.input(i, s);
        smp.u.insert(smp.u.end(), u.begin(), u.end());
      }
    }
    smp.lyapunov = mon.lyapunov.back();
    res.samples.push_back(std::move(smp));
  }

  res.settling.observer_settle = settling_time(mon.t, mon.max_eta_err, opt.tolerance);
  if (!opt.observer_only) {
    res.settling.output_settle = settling_time(mon.t, mon.max_output_err, opt.tolerance);
  }
  return res;
}

struct RegimeReport {
  std::size_t checked = 0;
  double worst_slack = std::numeric_limits<double>::infinity();  // bound − quotient
  double worst_at = std::numeric_limits<double>::quiet_NaN();
  bool holds() const { return worst_slack >= 0.0; }
};

struct LyapunovReport {
  RegimeReport normal;  // ΔV/Δt ≤ −(c₁/(5c₂))V + ε
  RegimeReport attack;  // ΔV/Δt ≤ c₅V + ε
  bool holds() const { return normal.holds() && attack.holds(); }
};

/// Difference quotients of V between consecutive grid points, checked
/// against the regime bound for the θ latched on that step. V on the right
/// side of the bound is the step average; ε = 1e−2·(1 + V).
inline LyapunovReport verify_lyapunov_bounds(const SimulationResult& result,
                                             const ObserverCertificate& cert) {
  const MonitorSeries& m = result.monitor;
  const double decay = cert.c1 / (5.0 * cert.c2);
  LyapunovReport rep;
  for (std::size_t k = 1; k < m.t.size(); ++k) {
    const double dt = m.t[k] - m.t[k - 1];
    if (!(dt > 0.0)) continue;
    const double v = 0.5 * (m.lyapunov[k] + m.lyapunov[k - 1]);
    const double quotient = (m.lyapunov[k] - m.lyapunov[k - 1]) / dt;
    const double eps = 1e-2 * (1.0 + v);
    const bool normal = m.theta[k] == 1;
    const double bound = normal ? -decay * v + eps : cert.c5 * v + eps;
    RegimeReport& r = normal ? rep.normal : rep.attack;
    ++r.checked;
    const double slack = bound - quotient;
    if (slack < r.worst_slack) {
      r.worst_slack = slack;
      r.worst_at = m.t[k];
    }
  }
  return rep;
}

/// CSV with columns t, v1..vq, per agent η̃ then e then u components, V,
/// theta; 9 significant digits.
inline void write_result_csv(const std::string& path, const ScenarioDesign& design,
                             const SimulationResult& res) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw Error(ErrorCode::kIoError, "cannot write " + path);
  const std::size_t q = design.q();
  std::fputs("t", f);
  for (std::size_t r = 0; r < q; ++r) std::fprintf(f, ",v%zu", r + 1);
  for (std::size_t i = 0; i < design.agent_count(); ++i) {
    const AgentModel& m = design.agents[i].model;
    for (std::size_t r = 0; r < q; ++r) std::fprintf(f, ",eta_err%zu_%zu", i + 1, r + 1);
    if (res.observer_only) continue;
    for (std::size_t r = 0; r < m.p(); ++r) std::fprintf(f, ",e%zu_%zu", i + 1, r + 1);
    for (std::size_t r = 0; r < m.m(); ++r) std::fprintf(f, ",u%zu_%zu", i + 1, r + 1);
  }
  std::fputs(",V,theta\n", f);
  for (const Sample& s : res.samples) {
    std::fprintf(f, "%.9g", s.t);
    for (double x : s.v) std::fprintf(f, ",%.9g", x);
    std::size_t eo = 0, uo = 0;
    for (std::size_t i = 0; i < design.agent_count(); ++i) {
      const AgentModel& m = design.agents[i].model;
      for (std::size_t r = 0; r < q; ++r) std::fprintf(f, ",%.9g", s.eta_err[i * q + r]);
      if (res.observer_only) continue;
      for (std::size_t r = 0; r < m.p(); ++r) std::fprintf(f, ",%.9g", s.e[eo + r]);
      for (std::size_t r = 0; r < m.m(); ++r) std::fprintf(f, ",%.9g", s.u[uo + r]);
      eo += m.p();
      uo += m.m();
    }
    std::fprintf(f, ",%.9g,%d\n", s.lyapunov, s.theta);
  }
  std::fclose(f);
}

inline std::string format_settle(const std::optional<double>& t) {
  if (!t) return "not-settled";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", *t);
  return buf;
}

/// key = value lines with settling metrics and certificate values.
inline void write_summary(const std::string& path, const ScenarioDesign& design,
                          const SimulationResult& res, std::uint64_t seed) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path);
  char buf[64];
  auto num = [&](double x) {
    std::snprintf(buf, sizeof buf, "%.9g", x);
    return std::string(buf);
  };
  out << "seed = " << seed << "\n";
  out << "tolerance = " << num(res.tolerance) << "\n";
  out << "observer_settle_seconds = " << format_settle(res.settling.observer_settle) << "\n";
  out << "output_settle_seconds = "
      << (res.observer_only ? std::string("n/a") : format_settle(res.settling.output_settle))
      << "\n";
  out << "certificate_valid = " << (design.certificate_valid ? "true" : "false") << "\n";
  out << "t_o_seconds = " << num(design.certificate.t_o) << "\n";
  out << "bar_t_o_seconds = " << num(design.certificate.bar_t_o) << "\n";
  out << "t_c_seconds = " << num(design.bounds.t_c) << "\n";
  out << "t_a_seconds = " << num(design.bounds.t_a) << "\n";
  out << "attack_intervals = " << design.schedule.intervals().size() << "\n";
  out << "attacked_seconds = "
      << num(attacked_duration(design.schedule, design.schedule.t0(), design.schedule.horizon()))
      << "\n";
}

}  // namespace fxcor
