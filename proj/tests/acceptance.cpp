// End-to-end acceptance run on the five-pendulum benchmark. Prints one
// PASS/FAIL line per criterion. With --known-blocked the exit status is zero
// only when the failing set is exactly the listed set.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <functional>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fxcor/fxcor.hpp"

using namespace fxcor;

namespace {

struct Verdict {
  int id;
  std::string title;
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, double x) { return detail::fmt(f, x); }

bool within_rel(double got, double want, double rel) {
  return std::abs(got - want) <= rel * std::abs(want);
}

// ---------------------------------------------------------------- 1, 2, 3

Verdict constants(const ScenarioDesign& d) {
  const ObserverCertificate& c = d.certificate;
  const std::pair<double, double> pairs[] = {
      {c.c1, 21.4662},     {c.c2, 10.3531},     {c.c3, 21.8649},
      {c.c4, 10.2899},     {c.c5, 0.5727},      {c.hat_c1, 0.0736},
      {c.hat_c2, 0.1011},  {c.tilde_c1, 0.0762}, {c.tilde_c2, 0.1052}};
  const char* names[] = {"c1", "c2", "c3", "c4", "c5", "hat_c1", "hat_c2", "tilde_c1", "tilde_c2"};
  bool ok = true;
  std::string worst;
  double worst_rel = 0.0;
  for (std::size_t i = 0; i < 9; ++i) {
    const double rel = std::abs(pairs[i].first - pairs[i].second) / pairs[i].second;
    ok = ok && rel <= 5e-4;
    if (rel > worst_rel) {
      worst_rel = rel;
      worst = names[i];
    }
  }
  return {1, "observer constants within 0.05%", ok,
          "worst " + worst + " at " + fmt("%.2e", worst_rel) + " relative"};
}

Verdict certificates(const ScenarioDesign& d) {
  const ObserverCertificate& c = d.certificate;
  const bool t_o = within_rel(c.t_o, 79.5692, 1e-3);
  const bool t_c = within_rel(d.bounds.t_c, 69.6789, 1e-2);
  const bool t_a = std::abs(d.bounds.t_a - 149.2480) <= 0.1;
  const double agree = std::max(std::abs(c.bar_t_o - c.bar_t_o_bisect), std::abs(c.t_o - c.t_o_bisect));
  std::ostringstream os;
  os << "t_o " << fmt("%.4f", c.t_o) << ", t_c " << fmt("%.4f", d.bounds.t_c) << ", t_a "
     << fmt("%.4f", d.bounds.t_a) << ", closed form vs bisection " << fmt("%.1e", agree);
  return {2, "settling certificates", d.certificate_valid && t_o && t_c && t_a && agree <= 1e-8,
          os.str()};
}

Verdict exponent_tables(const ScenarioDesign& d) {
  const Vector gamma{0.2727, 0.3333, 0.4286, 0.6};
  const Vector gamma_bar{3, 2, 1.5, 1.2};
  double worst = 0.0;
  for (const AgentDesign& a : d.agents)
    for (const ChannelGains& g : a.channels) {
      if (g.order != 4) return {3, "exponent tables", false, "channel order is not 4"};
      for (std::size_t r = 0; r < 4; ++r)
        worst = std::max({worst, std::abs(g.gamma[r] - gamma[r]), std::abs(g.gamma_bar[r] - gamma_bar[r])});
    }
  return {3, "exponent tables to 4 decimals", worst <= 5e-5, "worst deviation " + fmt("%.1e", worst)};
}

// ---------------------------------------------------------------- 4, 5, 6

constexpr double kObserverCheck = 79.5692;
constexpr double kOutputCheck = 149.2481;

std::vector<std::uint64_t> seed_range(std::uint64_t first, std::size_t n) {
  std::vector<std::uint64_t> out(n);
  std::iota(out.begin(), out.end(), first);
  return out;
}

EnsembleSpec ensemble_spec(const ScenarioConfig& cfg, std::size_t states, std::size_t schedules) {
  EnsembleSpec spec;
  spec.state_seeds = seed_range(1, states);
  spec.schedule_seeds = seed_range(1, schedules);
  spec.options.t0 = cfg.run.t0_seconds;
  spec.options.horizon = cfg.run.horizon_seconds;
  spec.options.h = cfg.run.step_seconds;
  spec.options.tolerance = cfg.run.settle_tolerance;
  spec.observer_check = kObserverCheck;
  spec.output_check = kOutputCheck;
  return spec;
}

bool schedules_valid(const ScenarioConfig& cfg, const EnsembleSpec& spec) {
  for (std::uint64_t s : spec.schedule_seeds) {
    ScenarioConfig c = cfg;
    c.schedule.intervals.reset();
    c.schedule.seed = s;
    const ScenarioDesign d = synthesize(c);
    if (!validate_budget(d.schedule, d.budget, d.t0).valid) return false;
  }
  return true;
}

std::vector<Verdict> ensemble_criteria(const ScenarioConfig& cfg) {
  const EnsembleSpec spec = ensemble_spec(cfg, 20, 5);
  const bool valid = schedules_valid(cfg, spec);
  const std::vector<RunDigest> runs = run_ensemble(cfg, spec);

  double eta = 0.0, out = 0.0, normal = 1e300, attack = 1e300;
  std::size_t eta_bad = 0, out_bad = 0, lyap_bad = 0;
  for (const RunDigest& r : runs) {
    eta = std::max(eta, r.max_eta_err_after);
    out = std::max(out, r.max_output_err_after);
    eta_bad += r.max_eta_err_after > 1e-3;
    out_bad += r.max_output_err_after > 1e-3;
    lyap_bad += !r.lyapunov.holds();
    normal = std::min(normal, r.lyapunov.normal.worst_slack);
    attack = std::min(attack, r.lyapunov.attack.worst_slack);
  }
  const std::string n = std::to_string(runs.size());
  std::vector<Verdict> v;
  v.push_back({4, "observer error <= 1e-3 after 79.5692 s", valid && eta_bad == 0,
               n + " runs, " + std::to_string(eta_bad) + " over, worst " + fmt("%.3e", eta) +
                   (valid ? "" : ", generated schedule violates the budget")});
  v.push_back({5, "output error <= 1e-3 after 149.2481 s", valid && out_bad == 0,
               n + " runs, " + std::to_string(out_bad) + " over, worst " + fmt("%.3e", out)});
  v.push_back({6, "Lyapunov regime inequalities", lyap_bad == 0,
               n + " runs, " + std::to_string(lyap_bad) + " violating, worst slack normal " +
                   fmt("%.3e", normal) + " attack " + fmt("%.3e", attack)});
  return v;
}

// Criterion 5 rerun with a larger terminal sub-linear exponent, checked at
// the benchmark time since this design's own t_a lies past the horizon.
void terminal_exponent_diagnostic(const ScenarioConfig& cfg) {
  ScenarioConfig alt = cfg;
  alt.channel.gamma_n = 0.9;
  const EnsembleSpec spec = ensemble_spec(alt, 5, 1);
  double out = 0.0, latest = 0.0;
  std::size_t settled = 0;
  for (const RunDigest& r : run_ensemble(alt, spec)) {
    out = std::max(out, r.max_output_err_after);
    if (r.output_settle) {
      ++settled;
      latest = std::max(latest, *r.output_settle);
    }
  }
  std::printf("diagnostic: gamma_n = 0.9, %zu of 5 runs settle (latest %.3f s), worst output "
              "error after %.4f s %.3e\n",
              settled, latest, kOutputCheck, out);
}

// ---------------------------------------------------------------- 7

struct PropertyTally {
  std::vector<std::string> failed;
  void check(bool ok, const std::string& name) {
    if (!ok && std::find(failed.begin(), failed.end(), name) == failed.end()) failed.push_back(name);
  }
};

void power_sum_inequalities(PropertyTally& t) {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> len(1, 12);
  std::uniform_real_distribution<double> val(0.0, 10.0), pd(0.01, 1.0), qd(1.0001, 4.0);
  for (int trial = 0; trial < 10000; ++trial) {
    const std::size_t m = static_cast<std::size_t>(len(rng));
    double sum = 0.0, sp = 0.0, sq = 0.0;
    const double p = pd(rng), q = qd(rng);
    for (std::size_t i = 0; i < m; ++i) {
      const double x = val(rng);
      sum += x;
      sp += std::pow(x, p);
      sq += std::pow(x, q);
    }
    const double md = static_cast<double>(m);
    const double tol = 1e-12 * (1.0 + std::pow(sum, q) + md * sq);
    t.check(std::pow(md, p - 1.0) * sp <= std::pow(sum, p) + tol && std::pow(sum, p) <= sp + tol &&
                sq <= std::pow(sum, q) + tol && std::pow(sum, q) <= std::pow(md, q - 1.0) * sq + tol,
            "power-sum inequalities");
  }
}

void k_construction(PropertyTally& t) {
  std::mt19937_64 rng(1234);
  std::uniform_real_distribution<double> w(1e-3, 3.0);
  std::bernoulli_distribution extra(0.3);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(trial % 8);
    Matrix a(n + 1, n + 1);
    for (std::size_t i = 1; i <= n; ++i) {
      std::uniform_int_distribution<std::size_t> parent(0, i - 1);
      a(i, parent(rng)) = w(rng);
      for (std::size_t j = 0; j <= n; ++j)
        if (j != i && a(i, j) == 0.0 && extra(rng)) a(i, j) = w(rng);
    }
    const CouplingMatrix h = build_h_matrix(DirectedGraph(a));
    const GainMatrixK k = compute_gain_matrix_k(h);
    t.check(verify_k_condition(h, k.k) >= -1e-9, "K construction slack");
  }
}

void routh_oracle(PropertyTally& t) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> deg(1, 6);
  std::uniform_real_distribution<double> re(-3.0, 3.0), im(0.1, 3.0);
  std::bernoulli_distribution coin(0.5);
  for (int checked = 0; checked < 500; ++checked) {
    const std::size_t n = static_cast<std::size_t>(deg(rng));
    const bool force_stable = coin(rng);
    std::vector<std::complex<double>> roots;
    while (roots.size() < n) {
      double r = re(rng);
      if (force_stable) r = -std::abs(r);
      if (std::abs(r) < 0.05) continue;
      if (n - roots.size() >= 2 && coin(rng)) {
        const double i = im(rng);
        roots.emplace_back(r, i);
        roots.emplace_back(r, -i);
      } else {
        roots.emplace_back(r, 0.0);
      }
    }
    std::vector<std::complex<double>> poly{1.0};
    for (const auto& root : roots) {
      std::vector<std::complex<double>> next(poly.size() + 1, 0.0);
      for (std::size_t k = 0; k < poly.size(); ++k) {
        next[k] += poly[k];
        next[k + 1] -= root * poly[k];
      }
      poly = next;
    }
    Vector coeffs;
    for (std::size_t k = 1; k < poly.size(); ++k) coeffs.push_back(poly[k].real());
    const bool stable = std::all_of(roots.begin(), roots.end(), [](auto r) { return r.real() < 0; });
    t.check(routh_hurwitz(coeffs) == stable, "Routh-Hurwitz vs planted roots");
  }
}

void regulator_residuals(PropertyTally& t, const ScenarioDesign& d) {
  for (const AgentDesign& a : d.agents) {
    const double scale = 1.0 + frobenius_norm(a.model.e) + frobenius_norm(a.model.f);
    const Matrix dyn = a.model.a * a.regulator.pi + a.model.b * a.regulator.gamma + a.model.e -
                       a.regulator.pi * d.exo.s;
    const Matrix out = a.model.c * a.regulator.pi + a.model.f;
    t.check(frobenius_norm(dyn) <= 1e-9 * scale && frobenius_norm(out) <= 1e-9 * scale,
            "regulator residuals");
  }
}

bool normal_form_holds(const AgentModel& agent, const NormalForm& nf) {
  const Matrix& a = agent.a;
  const Matrix& b = agent.b;
  const std::size_t n = agent.n(), m = agent.m();
  if (nf.indices.size() != m) return false;
  if (std::accumulate(nf.indices.begin(), nf.indices.end(), std::size_t{0}) != n) return false;
  if (matrix_rank(nf.t_mat) != n || matrix_rank(nf.x_mat) != m || matrix_rank(nf.g_mat) != m) {
    return false;
  }
  const Matrix t_inv = inverse(nf.t_mat);
  const Matrix a_bar = nf.t_mat * a * t_inv;
  const Matrix b_bar = nf.t_mat * b * inverse(nf.g_mat);
  const double tol = 1e-6 * (1.0 + max_abs(a_bar));
  std::size_t off = 0;
  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t qr = nf.indices[r];
    Matrix row = nf.r_mat.block(r, 0, 1, n);
    for (std::size_t l = 0; l + 2 <= qr; ++l) {
      if (max_abs(row * b) > 1e-7 * (1.0 + max_abs(row)) * (1.0 + max_abs(b))) return false;
      row = row * a;
    }
    if (max_abs(nf.x_mat.block(r, 0, 1, m) - row * b) > 1e-9 * (1.0 + max_abs(row * b))) return false;
    for (std::size_t k = 0; k < qr; ++k) {
      const std::size_t i = off + k;
      if (k + 1 < qr)
        for (std::size_t j = 0; j < n; ++j)
          if (std::abs(a_bar(i, j) - (j == i + 1 ? 1.0 : 0.0)) > tol) return false;
      for (std::size_t j = 0; j < m; ++j)
        if (std::abs(b_bar(i, j) - ((k + 1 == qr && j == r) ? 1.0 : 0.0)) > 1e-6) return false;
    }
    off += qr;
  }
  return true;
}

void normal_form_invariants(PropertyTally& t) {
  std::mt19937_64 rng(2718);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  std::uniform_int_distribution<int> pick_n(1, 8), pick_m(1, 3);
  for (int checked = 0; checked < 200; ++checked) {
    const std::size_t n = static_cast<std::size_t>(pick_n(rng));
    const std::size_t m = std::min<std::size_t>(n, static_cast<std::size_t>(pick_m(rng)));
    Matrix a(n, n), b(n, m);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) a(i, j) = d(rng);
      for (std::size_t j = 0; j < m; ++j) b(i, j) = d(rng);
    }
    const AgentModel agent{a, b, Matrix(1, n), Matrix(n, 1), Matrix(1, 1)};
    bool ok = false;
    try {
      ok = normal_form_holds(agent, luenberger_normal_form(agent));
    } catch (const Error&) {
    }
    t.check(ok, "normal-form invariants");
  }
}

double rotation_error(double h) {
  const OdeRhs rot = [](double, std::span<const double> x, std::span<double> dx) {
    dx[0] = -0.2 * x[1];
    dx[1] = 0.2 * x[0];
  };
  const Trajectory tr = integrate_fixed_rk4(rot, Vector{1.0, 0.0}, 0.0, 2.0 * std::numbers::pi / 0.2, h);
  return std::hypot(tr.states.back()[0] - 1.0, tr.states.back()[1]);
}

Verdict property_suites(const ScenarioDesign& d) {
  PropertyTally t;
  power_sum_inequalities(t);
  k_construction(t);
  routh_oracle(t);
  regulator_residuals(t, d);
  normal_form_invariants(t);
  const double err = rotation_error(1e-3);
  const double ratio = rotation_error(0.2) / rotation_error(0.1);
  t.check(err <= 1e-8, "RK4 rotation period");
  t.check(ratio > 16.0 * 0.7 && ratio < 16.0 * 1.3, "RK4 step halving");
  std::string detail = "rotation error " + fmt("%.1e", err) + ", halving ratio " + fmt("%.2f", ratio);
  for (const std::string& f : t.failed) detail += "; failed: " + f;
  return {7, "property suites", t.failed.empty(), detail};
}

// ---------------------------------------------------------------- 8

Verdict comparison(const ScenarioConfig& cfg) {
  RunOptions opt;
  opt.t0 = cfg.run.t0_seconds;
  opt.horizon = cfg.run.horizon_seconds;
  opt.h = cfg.run.step_seconds;
  opt.tolerance = 1e-4;
  const std::vector<std::uint64_t> seeds = seed_range(1, 10);
  const ObserverComparison cmp = compare_observers(cfg, seeds, 6.6, 0.5, opt);
  const bool all_settled =
      std::all_of(cmp.fixed_time.begin(), cmp.fixed_time.end(), [](auto t) { return t.has_value(); }) &&
      std::all_of(cmp.baseline.begin(), cmp.baseline.end(), [](auto t) { return t.has_value(); });
  const bool ratio_ok = all_settled && cmp.std_ratio() < 0.5;

  std::vector<TrendSet> sets = standard_trend_sets();
  evaluate_trends(cfg, seeds, opt, sets);
  bool trends_ok = true;
  std::ostringstream os;
  os << "std " << fmt("%.4g", cmp.fixed_std) << " vs " << fmt("%.4g", cmp.baseline_std)
     << " (ratio " << fmt("%.4f", cmp.std_ratio()) << ")";
  for (const TrendSet& s : sets) {
    os << "; " << s.name << (s.monotone() ? " monotone" : " NOT monotone") << " (";
    for (std::size_t i = 0; i < s.points.size(); ++i) {
      os << (i ? ", " : "") << fmt("%.6f", s.points[i].mean_settle);
      trends_ok = trends_ok && s.points[i].unsettled == 0;
    }
    os << ")";
    trends_ok = trends_ok && s.monotone();
  }
  return {8, "observer comparison and parameter trends", ratio_ok && trends_ok, os.str()};
}

std::set<int> parse_ids(const std::string& list) {
  std::set<int> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.insert(std::stoi(item));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance run on the five-pendulum benchmark"};
  std::string blocked_list;
  std::string only_list;
  app.add_option("--known-blocked", blocked_list, "comma-separated criteria expected to fail");
  app.add_option("--only", only_list, "comma-separated criteria to run");
  CLI11_PARSE(app, argc, argv);
  const std::set<int> blocked = parse_ids(blocked_list);
  const std::set<int> only = parse_ids(only_list);
  auto wanted = [&](int id) { return only.empty() || only.count(id) > 0; };

  const ScenarioConfig cfg = benchmark_scenario();
  const ScenarioDesign d = synthesize(cfg);
  std::vector<Verdict> verdicts;
  auto timed = [&](const std::function<void()>& f, const char* what) {
    const auto start = std::chrono::steady_clock::now();
    f();
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("(%s took %.1f s on %u threads)\n", what, s, worker_threads());
    std::fflush(stdout);
  };

  if (wanted(1)) verdicts.push_back(constants(d));
  if (wanted(2)) verdicts.push_back(certificates(d));
  if (wanted(3)) verdicts.push_back(exponent_tables(d));
  if (wanted(4) || wanted(5) || wanted(6)) {
    timed([&] {
      for (Verdict& v : ensemble_criteria(cfg))
        if (wanted(v.id)) verdicts.push_back(v);
    }, "ensemble");
  }
  if (wanted(5)) timed([&] { terminal_exponent_diagnostic(cfg); }, "diagnostic");
  if (wanted(7)) timed([&] { verdicts.push_back(property_suites(d)); }, "property suites");
  if (wanted(8)) timed([&] { verdicts.push_back(comparison(cfg)); }, "comparison");

  std::set<int> failed;
  for (const Verdict& v : verdicts) {
    std::printf("criterion %d: %s - %s (%s)%s\n", v.id, v.pass ? "PASS" : "FAIL", v.title.c_str(),
                v.detail.c_str(), !v.pass && blocked.count(v.id) ? " [known blocked]" : "");
    if (!v.pass) failed.insert(v.id);
  }
  std::set<int> expected;
  for (int id : blocked)
    if (wanted(id)) expected.insert(id);
  if (failed == expected) return 0;
  for (int id : expected)
    if (!failed.count(id)) std::printf("criterion %d is listed as blocked but passed\n", id);
  return 1;
}
