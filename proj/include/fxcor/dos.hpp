#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "fxcor/error.hpp"

namespace fxcor {

/// Half-open attack window [start, end).
struct AttackInterval {
  double start = 0.0;
  double end = 0.0;
  bool operator==(const AttackInterval&) const = default;
};

/// Zero-topology DoS schedule: sorted, disjoint, nonempty intervals inside
/// [t0, horizon]. During an interval every communication edge is cut.
class AttackSchedule {
 public:
  AttackSchedule() = default;
  AttackSchedule(std::vector<AttackInterval> intervals, double horizon, double t0 = 0.0)
      : intervals_(std::move(intervals)), horizon_(horizon), t0_(t0) {
    if (!(horizon_ >= t0_)) throw Error(ErrorCode::kOutOfHorizon, "horizon before t0");
    for (std::size_t k = 0; k < intervals_.size(); ++k) {
      const auto& iv = intervals_[k];
      const std::string where = "interval " + std::to_string(k);
      if (!(iv.start < iv.end)) throw Error(ErrorCode::kOutOfHorizon, where + ": start >= end");
      if (iv.start < t0_ || iv.end > horizon_) {
        throw Error(ErrorCode::kOutOfHorizon, where + " outside [t0, horizon]");
      }
      if (k > 0 && iv.start < intervals_[k - 1].end) {
        throw Error(ErrorCode::kOutOfHorizon, where + " overlaps or is out of order");
      }
    }
  }

  const std::vector<AttackInterval>& intervals() const noexcept { return intervals_; }
  double horizon() const noexcept { return horizon_; }
  double t0() const noexcept { return t0_; }

  /// Every start and end instant, sorted.
  std::vector<double> switching_times() const {
    std::vector<double> out;
    out.reserve(2 * intervals_.size());
    for (const auto& iv : intervals_) {
      out.push_back(iv.start);
      out.push_back(iv.end);
    }
    return out;
  }

  bool operator==(const AttackSchedule&) const = default;

 private:
  std::vector<AttackInterval> intervals_;
  double horizon_ = 0.0;
  double t0_ = 0.0;
};

/// |Π_D(t0, t)| ≤ ν_d + (t − t0)/p_d.
struct AttackBudget {
  double nu_d = 0.0;
  double p_d = 0.0;

  void validate() const {
    if (!(nu_d > 0.0) || !(p_d > 1.0)) {
      throw Error(ErrorCode::kInfeasibleBudget, "need nu_d > 0 and p_d > 1");
    }
  }
};

/// Measure of the attack set intersected with [t0, t].
inline double attacked_duration(const AttackSchedule& schedule, double t0, double t) {
  if (t < t0 || t > schedule.horizon()) {
    throw Error(ErrorCode::kOutOfHorizon,
                "t=" + std::to_string(t) + " outside [" + std::to_string(t0) + ", " +
                    std::to_string(schedule.horizon()) + "]");
  }
  double total = 0.0;
  for (const auto& iv : schedule.intervals()) {
    const double lo = std::max(iv.start, t0);
    const double hi = std::min(iv.end, t);
    if (hi > lo) total += hi - lo;
  }
  return total;
}

inline double normal_duration(const AttackSchedule& schedule, double t0, double t) {
  return (t - t0) - attacked_duration(schedule, t0, t);
}

/// 0 inside an attack interval (start included, end excluded), 1 otherwise.
inline int theta(const AttackSchedule& schedule, double t) {
  const auto& ivs = schedule.intervals();
  auto it = std::upper_bound(ivs.begin(), ivs.end(), t,
                             [](double x, const AttackInterval& iv) { return x < iv.start; });
  if (it == ivs.begin()) return 1;
  --it;
  return t < it->end ? 0 : 1;
}

struct BudgetVerdict {
  bool valid = true;
  double violation_at = 0.0;
  double excess = 0.0;
};

/// The slack |Π_D| − ν_d − (t − t0)/p_d rises only during attacks, so its
/// maxima sit at interval ends; checking those (and the horizon) is exact.
inline BudgetVerdict validate_budget(const AttackSchedule& schedule, const AttackBudget& budget,
                                     double t0) {
  constexpr double kSlackTol = 1e-12;
  double attacked = 0.0;
  auto check = [&](double t) -> BudgetVerdict {
    const double excess = attacked - budget.nu_d - (t - t0) / budget.p_d;
    if (excess > kSlackTol) return {false, t, excess};
    return {};
  };
  for (const auto& iv : schedule.intervals()) {
    const double lo = std::max(iv.start, t0);
    if (iv.end <= t0) continue;
    attacked += iv.end - lo;
    if (auto v = check(iv.end); !v.valid) return v;
  }
  return check(schedule.horizon());
}

/// Alternating exponential off/on phases. An attack that would breach the
/// running bound is truncated to the longest admissible length, so the
/// result always passes validate_budget.
inline AttackSchedule generate_schedule(std::uint64_t seed, const AttackBudget& budget,
                                        double horizon, double mean_on, double mean_off,
                                        double t0 = 0.0) {
  if (!(budget.p_d > 1.0) || !(budget.nu_d > 0.0)) {
    throw Error(ErrorCode::kInfeasibleBudget, "need nu_d > 0 and p_d > 1");
  }
  if (!(mean_on > 0.0) || !(mean_off > 0.0)) {
    throw Error(ErrorCode::kInfeasibleBudget, "mean on/off durations must be positive");
  }
  std::mt19937_64 rng(seed);
  std::exponential_distribution<double> on_dist(1.0 / mean_on);
  std::exponential_distribution<double> off_dist(1.0 / mean_off);
  const double shrink = 1.0 - 1.0 / budget.p_d;
  constexpr double kMinAttack = 1e-6;

  std::vector<AttackInterval> intervals;
  double attacked = 0.0;
  double t = t0;
  while (true) {
    t += off_dist(rng);
    if (t >= horizon) break;
    const double wanted = on_dist(rng);
    const double room = (budget.nu_d + (t - t0) / budget.p_d - attacked) / shrink;
    const double length = std::min({wanted, room * (1.0 - 1e-12), horizon - t});
    if (length < kMinAttack) continue;
    intervals.push_back({t, t + length});
    attacked += length;
    t += length;
  }
  return AttackSchedule(std::move(intervals), horizon, t0);
}

}  // namespace fxcor
