#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "fxcor/parallel.hpp"
#include "fxcor/simulation.hpp"

namespace fxcor {

/// What an ensemble member keeps once its trajectory is discarded.
struct RunDigest {
  std::uint64_t state_seed = 0;
  std::uint64_t schedule_seed = 0;
  std::optional<double> observer_settle;
  std::optional<double> output_settle;
  double max_eta_err_after = 0.0;     // max_i‖η̃_i‖ over t ≥ observer check time
  double max_output_err_after = 0.0;  // max_i‖e_i‖ over t ≥ output check time
  LyapunovReport lyapunov;
};

inline double max_after(const MonitorSeries& m, const std::vector<double>& series, double t) {
  double out = 0.0;
  for (std::size_t k = 0; k < m.t.size(); ++k)
    if (m.t[k] >= t) out = std::max(out, series[k]);
  return out;
}

inline RunDigest digest(const SimulationResult& res, const ScenarioDesign& design,
                        double observer_check, double output_check) {
  RunDigest d;
  d.observer_settle = res.settling.observer_settle;
  d.output_settle = res.settling.output_settle;
  d.max_eta_err_after = max_after(res.monitor, res.monitor.max_eta_err, observer_check);
  if (!res.observer_only) {
    d.max_output_err_after = max_after(res.monitor, res.monitor.max_output_err, output_check);
  }
  d.lyapunov = verify_lyapunov_bounds(res, design.certificate);
  return d;
}

struct EnsembleSpec {
  std::vector<std::uint64_t> state_seeds;
  std::vector<std::uint64_t> schedule_seeds;
  RunOptions options;
  double observer_check = 0.0;
  double output_check = 0.0;
};

/// Every (state seed, schedule seed) pair, schedule-major, one generated
/// budget-valid schedule per schedule seed.
inline std::vector<RunDigest> run_ensemble(const ScenarioConfig& cfg, const EnsembleSpec& spec) {
  std::vector<ScenarioDesign> designs;
  for (std::uint64_t s : spec.schedule_seeds) {
    ScenarioConfig c = cfg;
    c.schedule.intervals.reset();
    c.schedule.seed = s;
    designs.push_back(synthesize(c));
  }
  const std::size_t n_states = spec.state_seeds.size();
  const std::function<RunDigest(std::size_t)> job = [&](std::size_t idx) {
    const ScenarioDesign& d = designs[idx / n_states];
    const std::uint64_t seed = spec.state_seeds[idx % n_states];
    RunOptions opt = spec.options;
    opt.record_samples = false;
    const SimulationResult res = run(d, initial_state(cfg, d, seed), opt);
    RunDigest dg = digest(res, d, spec.observer_check, spec.output_check);
    dg.state_seed = seed;
    dg.schedule_seed = spec.schedule_seeds[idx / n_states];
    return dg;
  };
  return parallel_map(designs.size() * n_states, job);
}

inline double sample_stddev(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

inline double mean_of(const std::vector<double>& xs) {
  double m = 0.0;
  for (double x : xs) m += x;
  return xs.empty() ? 0.0 : m / static_cast<double>(xs.size());
}

struct ObserverComparison {
  std::vector<std::uint64_t> seeds;
  std::vector<std::optional<double>> fixed_time;
  std::vector<std::optional<double>> baseline;
  double horizon = 0.0;
  // Unsettled runs enter the statistics censored at the horizon.
  double fixed_std = 0.0, baseline_std = 0.0;
  double fixed_mean = 0.0, baseline_mean = 0.0;
  double std_ratio() const {
    return baseline_std > 0.0 ? fixed_std / baseline_std : std::numeric_limits<double>::infinity();
  }
};

/// Observer-only settling of ‖η̃‖ (stacked) for the configured observer with
/// μ₁ = mu1_fixed against the linear baseline μ₂ = μ₃ = 0, μ₁ = mu1_baseline,
/// on the configured schedule, one random initial state per seed.
inline ObserverComparison compare_observers(const ScenarioConfig& cfg,
                                            const std::vector<std::uint64_t>& seeds,
                                            double mu1_fixed, double mu1_baseline,
                                            const RunOptions& base_opt) {
  ScenarioDesign fixed = synthesize(cfg);
  ScenarioDesign baseline = fixed;
  fixed.observer.mu1 = mu1_fixed;
  baseline.observer.mu1 = mu1_baseline;
  baseline.observer.mu2 = 0.0;
  baseline.observer.mu3 = 0.0;

  RunOptions opt = base_opt;
  opt.observer_only = true;
  opt.record_samples = false;
  const std::function<std::optional<double>(std::size_t)> job = [&](std::size_t idx) {
    const ScenarioDesign& d = idx % 2 == 0 ? fixed : baseline;
    const SimulationResult res = run(d, initial_state(cfg, d, seeds[idx / 2]), opt);
    return settling_time(res.monitor.t, res.monitor.stacked_eta_err, opt.tolerance);
  };
  const auto all = parallel_map(2 * seeds.size(), job);

  ObserverComparison cmp;
  cmp.seeds = seeds;
  cmp.horizon = opt.horizon;
  std::vector<double> f, b;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    cmp.fixed_time.push_back(all[2 * i]);
    cmp.baseline.push_back(all[2 * i + 1]);
    f.push_back(all[2 * i].value_or(opt.horizon));
    b.push_back(all[2 * i + 1].value_or(opt.horizon));
  }
  cmp.fixed_std = sample_stddev(f);
  cmp.baseline_std = sample_stddev(b);
  cmp.fixed_mean = mean_of(f);
  cmp.baseline_mean = mean_of(b);
  return cmp;
}

struct TrendPoint {
  std::string label;
  ObserverParams params;
  double mean_settle = 0.0;
  std::size_t unsettled = 0;
};

struct TrendSet {
  std::string name;
  std::vector<TrendPoint> points;  // ordered so settling should decrease
  bool monotone() const {
    for (std::size_t i = 1; i < points.size(); ++i)
      if (!(points[i].mean_settle < points[i - 1].mean_settle)) return false;
    return true;
  }
};

/// Three sweeps, each ordered from slowest to fastest expected observer:
/// growing gains, growing β, shrinking α.
inline std::vector<TrendSet> standard_trend_sets() {
  std::vector<TrendSet> sets(3);
  sets[0].name = "gains";
  for (auto [m1, m2, m3] : {std::tuple{7.5, 7.0, 11.5}, std::tuple{8.5, 9.5, 12.5},
                            std::tuple{9.5, 13.0, 14.5}}) {
    sets[0].points.push_back({"mu=(" + std::to_string(m1) + "," + std::to_string(m2) + "," +
                                  std::to_string(m3) + ")",
                              {m1, m2, m3, 0.7, 1.45}});
  }
  sets[1].name = "beta";
  for (double b : {1.35, 1.45, 1.55})
    sets[1].points.push_back({"beta=" + std::to_string(b), {9.9, 18.6, 18.6, 0.75, b}});
  sets[2].name = "alpha";
  for (double a : {0.85, 0.8, 0.75})
    sets[2].points.push_back({"alpha=" + std::to_string(a), {8.0, 11.2, 15.0, a, 1.35}});
  return sets;
}

/// Mean observer settling (‖η̃‖ stacked, tolerance from opt) over the seeds
/// for each point, with paired initial states and one shared schedule.
inline void evaluate_trends(const ScenarioConfig& cfg, const std::vector<std::uint64_t>& seeds,
                            const RunOptions& base_opt, std::vector<TrendSet>& sets) {
  const ScenarioDesign base = synthesize(cfg);
  RunOptions opt = base_opt;
  opt.observer_only = true;
  opt.record_samples = false;
  std::vector<std::pair<std::size_t, std::size_t>> index;
  for (std::size_t s = 0; s < sets.size(); ++s)
    for (std::size_t p = 0; p < sets[s].points.size(); ++p) index.emplace_back(s, p);
  const std::function<std::optional<double>(std::size_t)> job = [&](std::size_t idx) {
    const auto [s, p] = index[idx / seeds.size()];
    ScenarioDesign d = base;
    d.observer = sets[s].points[p].params;
    const SimulationResult res = run(d, initial_state(cfg, d, seeds[idx % seeds.size()]), opt);
    return settling_time(res.monitor.t, res.monitor.stacked_eta_err, opt.tolerance);
  };
  const auto all = parallel_map(index.size() * seeds.size(), job);
  for (std::size_t k = 0; k < index.size(); ++k) {
    TrendPoint& pt = sets[index[k].first].points[index[k].second];
    std::vector<double> xs;
    for (std::size_t j = 0; j < seeds.size(); ++j) {
      const auto& t = all[k * seeds.size() + j];
      if (!t) ++pt.unsettled;
      xs.push_back(t.value_or(opt.horizon));
    }
    pt.mean_settle = mean_of(xs);
  }
}

}  // namespace fxcor
