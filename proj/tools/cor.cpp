#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "fxcor/fxcor.hpp"

namespace fs = std::filesystem;
using namespace fxcor;

namespace {

enum Exit : int {
  kOk = 0,
  kInvalid = 2,
  kDesignFailure = 3,
  kRuntimeFailure = 4,
  kBoundViolation = 5,
  kNotSettledYet = 6,
};

struct Options {
  std::string config;
  std::string schedule;
  std::optional<std::uint64_t> seed;
  std::string out = "cor-out";
  std::optional<double> h;
  std::optional<double> horizon;
  std::optional<double> tol;
  bool force = false;
  std::size_t seeds = 10;
  double mu1_fixed = 6.6;
  double mu1_baseline = 0.5;
  std::optional<double> nu_d;
  std::optional<double> p_d;
};

int exit_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::kParseError:
    case ErrorCode::kOutOfHorizon:
    case ErrorCode::kInfeasibleBudget:
      return kInvalid;
    case ErrorCode::kNonFiniteState:
    case ErrorCode::kIoError:
      return kRuntimeFailure;
    default:
      return kDesignFailure;
  }
}

ScenarioConfig load_with_overrides(const Options& o) {
  ScenarioConfig cfg = load_scenario(o.config);
  if (o.h) cfg.run.step_seconds = *o.h;
  if (o.horizon) {
    cfg.run.horizon_seconds = *o.horizon;
    // An explicit schedule longer than the run is clipped to it.
    if (cfg.schedule.intervals) {
      std::vector<AttackInterval> kept;
      for (auto iv : *cfg.schedule.intervals) {
        if (iv.start >= *o.horizon) break;
        iv.end = std::min(iv.end, *o.horizon);
        kept.push_back(iv);
      }
      cfg.schedule.intervals = kept;
    }
  }
  if (o.tol) cfg.run.settle_tolerance = *o.tol;
  if (!(cfg.run.step_seconds > 0.0) || !(cfg.run.horizon_seconds > cfg.run.t0_seconds)) {
    throw Error(ErrorCode::kParseError, "run: step must be positive and horizon after t0");
  }
  return cfg;
}

RunOptions run_options(const ScenarioConfig& cfg) {
  RunOptions opt;
  opt.t0 = cfg.run.t0_seconds;
  opt.horizon = cfg.run.horizon_seconds;
  opt.h = cfg.run.step_seconds;
  opt.tolerance = cfg.run.settle_tolerance;
  opt.record_stride = cfg.run.record_stride;
  return opt;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + p.string());
  out << text;
}

// Compares settling against the certified bounds. Not settled inside a
// horizon that ends before the bound is "not yet", otherwise a violation.
int settle_verdict(const ScenarioDesign& d, const SimulationResult& res, double horizon,
                   std::ostream& os) {
  int code = kOk;
  auto check = [&](const char* what, const std::optional<double>& t, double bound) {
    os << what << " settle: " << format_settle(t) << (t ? " s" : "") << " (bound " << bound << " s)";
    if (t && *t <= bound) {
      os << " ok\n";
      return;
    }
    if (!t && horizon < bound) {
      os << " not settled yet, horizon shorter than bound\n";
      if (code == kOk) code = kNotSettledYet;
      return;
    }
    os << " VIOLATED\n";
    code = kBoundViolation;
  };
  check("observer", res.settling.observer_settle, d.certificate.t_o);
  check("output", res.settling.output_settle, d.bounds.t_a);
  return code;
}

int cmd_design(const Options& o) {
  const ScenarioConfig cfg = load_with_overrides(o);
  const ScenarioDesign d = synthesize(cfg);
  print_design_report(std::cout, d);
  return d.fully_certified() ? kOk : kDesignFailure;
}

int simulate_and_write(const ScenarioConfig& cfg, const ScenarioDesign& d, std::uint64_t seed,
                       const fs::path& out, std::ostream& os) {
  fs::create_directories(out);
  const SimulationResult res = run(d, initial_state(cfg, d, seed), run_options(cfg));
  write_result_csv((out / "result.csv").string(), d, res);
  write_summary((out / "summary.txt").string(), d, res, seed);
  write_text(out / "schedule.json", serialize_schedule(d.schedule).dump(2) + "\n");
  const LyapunovReport lyap = verify_lyapunov_bounds(res, d.certificate);
  os << "lyapunov normal-regime worst slack " << lyap.normal.worst_slack << " over "
     << lyap.normal.checked << " steps, attack-regime worst slack " << lyap.attack.worst_slack
     << " over " << lyap.attack.checked << " steps\n";
  return settle_verdict(d, res, cfg.run.horizon_seconds, os);
}

int cmd_simulate(const Options& o) {
  const ScenarioConfig cfg = load_with_overrides(o);
  const ScenarioDesign d = synthesize(cfg);
  if (!d.fully_certified() && !o.force) {
    print_design_report(std::cerr, d);
    std::cerr << "design not certified; rerun with --force to simulate anyway\n";
    return kDesignFailure;
  }
  return simulate_and_write(cfg, d, o.seed.value_or(cfg.initial.seed), o.out, std::cout);
}

int cmd_reproduce(const Options& o) {
  ScenarioConfig cfg = benchmark_scenario();
  if (o.h) cfg.run.step_seconds = *o.h;
  if (o.horizon) cfg.run.horizon_seconds = *o.horizon;
  if (o.tol) cfg.run.settle_tolerance = *o.tol;
  const std::uint64_t seed = o.seed.value_or(1);
  cfg.initial.seed = seed;
  cfg.schedule.seed = seed;
  const fs::path out(o.out);
  fs::create_directories(out);
  write_text(out / "scenario.json", serialize_scenario(cfg).dump(2) + "\n");

  const ScenarioDesign d = synthesize(cfg);
  std::ostringstream report;
  print_design_report(report, d);
  write_text(out / "design_report.txt", report.str());
  std::cout << report.str();

  std::ostringstream table;
  print_reference_table(table, benchmark_reference_rows(d));
  ScenarioConfig stated_q = cfg;
  stated_q.channel.q_scale = stated_q.channel.q_bar_scale = kDefaultQScale;
  const ScenarioDesign d02 = synthesize(stated_q);
  table << "t_c with Q = Q_bar = 0.02 I: " << detail::fmt("%.4f", d02.bounds.t_c)
        << " s; with 0.01 I: " << detail::fmt("%.4f", d.bounds.t_c) << " s\n";
  write_text(out / "constants.txt", table.str());
  std::cout << "== reference comparison ==\n" << table.str();

  const BudgetVerdict verdict = validate_budget(d.schedule, d.budget, d.t0);
  std::cout << "generated schedule: " << d.schedule.intervals().size() << " attacks, budget "
            << (verdict.valid ? "valid" : "VIOLATED") << "\n";
  const int code = simulate_and_write(cfg, d, seed, out, std::cout);
  return verdict.valid ? code : kRuntimeFailure;
}

int cmd_compare(const Options& o) {
  const ScenarioConfig cfg = load_with_overrides(o);
  RunOptions opt = run_options(cfg);
  opt.tolerance = o.tol.value_or(1e-4);
  std::vector<std::uint64_t> seeds;
  const std::uint64_t first = o.seed.value_or(1);
  for (std::size_t i = 0; i < o.seeds; ++i) seeds.push_back(first + i);
  const ObserverComparison cmp = compare_observers(cfg, seeds, o.mu1_fixed, o.mu1_baseline, opt);
  std::printf("seed    fixed-time (s)   baseline (s)\n");
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    std::printf("%-6llu  %-15s  %s\n", static_cast<unsigned long long>(seeds[i]),
                format_settle(cmp.fixed_time[i]).c_str(), format_settle(cmp.baseline[i]).c_str());
  }
  std::printf("mean    %-15.6g  %.6g\n", cmp.fixed_mean, cmp.baseline_mean);
  std::printf("stddev  %-15.6g  %.6g\n", cmp.fixed_std, cmp.baseline_std);
  std::printf("stddev ratio fixed/baseline = %.6g (threshold %g, mu1 %g vs %g)\n", cmp.std_ratio(),
              opt.tolerance, o.mu1_fixed, o.mu1_baseline);
  return kOk;
}

int cmd_validate_schedule(const Options& o) {
  AttackBudget budget{0.2, 4.9};
  if (!o.config.empty()) budget = load_scenario(o.config).budget;
  if (o.nu_d) budget.nu_d = *o.nu_d;
  if (o.p_d) budget.p_d = *o.p_d;
  budget.validate();
  const AttackSchedule s = parse_schedule(read_json_file(o.schedule));
  const BudgetVerdict v = validate_budget(s, budget, s.t0());
  if (v.valid) {
    std::cout << "valid: " << s.intervals().size() << " intervals, attacked "
              << attacked_duration(s, s.t0(), s.horizon()) << " s of " << s.horizon() - s.t0()
              << " s (nu_d " << budget.nu_d << ", p_d " << budget.p_d << ")\n";
    return kOk;
  }
  std::cout << "violation at t = " << v.violation_at << " s: attacked duration exceeds "
            << "nu_d + (t - t0)/p_d by " << v.excess << " s\n";
  return kBoundViolation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fixed-time cooperative output regulation under DoS attacks"};
  app.set_help_flag("--help", "print help");
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    sub->set_help_flag("--help", "print help");
    auto* c = sub->add_option("--config", o.config, "scenario JSON file");
    if (needs_config) c->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "initial-state seed");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--h", o.h, "integration step in seconds")->check(CLI::PositiveNumber);
    sub->add_option("--horizon", o.horizon, "simulation horizon in seconds")
        ->check(CLI::PositiveNumber);
    sub->add_option("--tol", o.tol, "settling tolerance")->check(CLI::PositiveNumber);
    sub->add_flag("--force", o.force, "simulate even if the design is not certified");
  };

  auto* design = app.add_subcommand("design", "certify a scenario and print the report");
  add_common(design, true);
  auto* simulate = app.add_subcommand("simulate", "run one closed-loop simulation");
  add_common(simulate, true);
  auto* reproduce = app.add_subcommand("reproduce-paper", "rebuild the five-pendulum benchmark");
  add_common(reproduce, false);
  auto* compare = app.add_subcommand("compare-observers", "fixed-time vs linear observer");
  add_common(compare, true);
  compare->add_option("--seeds", o.seeds, "number of consecutive seeds")->check(CLI::PositiveNumber);
  compare->add_option("--mu1-fixed", o.mu1_fixed, "mu1 of the fixed-time observer");
  compare->add_option("--mu1-baseline", o.mu1_baseline, "mu1 of the linear baseline");
  auto* validate = app.add_subcommand("validate-schedule", "check a schedule against a budget");
  add_common(validate, false);
  validate->add_option("--schedule", o.schedule, "schedule JSON file")
      ->required()
      ->check(CLI::ExistingFile);
  validate->add_option("--nu-d", o.nu_d, "budget offset in seconds");
  validate->add_option("--p-d", o.p_d, "budget ratio (> 1)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kInvalid;
  }

  try {
    if (*design) return cmd_design(o);
    if (*simulate) return cmd_simulate(o);
    if (*reproduce) return cmd_reproduce(o);
    if (*compare) return cmd_compare(o);
    if (*validate) return cmd_validate_schedule(o);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_for(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
  return kInvalid;
}
