#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fxcor/numerics/matrix.hpp"

namespace fxcor {

/// dx = f(t, x). Implementations write every entry of dx.
using OdeRhs = std::function<void(double t, std::span<const double> x, std::span<double> dx)>;

struct Trajectory {
  std::vector<double> times;
  std::vector<Vector> states;
  std::size_t dimension = 0;
};

/// Hooks for the streaming integrator.
struct Rk4Hooks {
  /// Called at the start of each breakpoint-delimited segment, before its
  /// first step, with the segment's [start, end). Lets callers latch any
  /// piecewise-constant mode so the right-hand side never straddles a switch.
  std::function<void(double start, double end)> on_segment;
  /// Called at every grid point including t0; returning false stops early.
  std::function<bool(double t, std::span<const double> x)> on_point;
};

namespace detail {

// Merged, deduplicated breakpoints strictly inside (t0, t1].
inline std::vector<double> clean_breakpoints(std::span<const double> breakpoints, double t0,
                                             double t1) {
  std::vector<double> bp;
  for (double b : breakpoints)
    if (b > t0 && b <= t1) bp.push_back(b);
  std::sort(bp.begin(), bp.end());
  bp.erase(std::unique(bp.begin(), bp.end()), bp.end());
  return bp;
}

}  // namespace detail

/// Classical RK4 on the lattice t0 + k·h with extra grid points injected at
/// each breakpoint. Lattice points closer than 1e-9·h to a breakpoint are
/// replaced by the breakpoint itself so no degenerate sliver steps occur.
/// Throws NonFiniteState on blow-up.
inline void integrate_rk4_stream(const OdeRhs& rhs, std::span<const double> x0, double t0,
                                 double t1, double h, std::span<const double> breakpoints,
                                 const Rk4Hooks& hooks) {
  if (!(h > 0.0)) throw std::invalid_argument("integration step must be positive");
  const std::size_t n = x0.size();
  Vector x(x0.begin(), x0.end());
  Vector k1(n), k2(n), k3(n), k4(n), tmp(n);
  const std::vector<double> bp = detail::clean_breakpoints(breakpoints, t0, t1);
  const double snap = 1e-9 * h;

  if (hooks.on_point && !hooks.on_point(t0, x)) return;

  double t = t0;
  std::size_t next_bp = 0;
  long long lattice = 0;
  bool new_segment = true;
  while (t < t1 - snap) {
    const double segment_end = next_bp < bp.size() ? bp[next_bp] : t1;
    if (new_segment) {
      if (hooks.on_segment) hooks.on_segment(t, segment_end);
      new_segment = false;
    }
    while (t0 + static_cast<double>(lattice) * h <= t + snap) ++lattice;
    double t_next = t0 + static_cast<double>(lattice) * h;
    if (t_next >= segment_end - snap) {
      t_next = segment_end;
      if (next_bp < bp.size()) {
        ++next_bp;
        new_segment = true;
      }
    }
    if (t_next > t1) t_next = t1;
    const double dt = t_next - t;

    rhs(t, x, k1);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k1[i];
    rhs(t + 0.5 * dt, tmp, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + 0.5 * dt * k2[i];
    rhs(t + 0.5 * dt, tmp, k3);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = x[i] + dt * k3[i];
    rhs(t_next, tmp, k4);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      if (!std::isfinite(x[i])) {
        throw Error(ErrorCode::kNonFiniteState,
                    "state entry " + std::to_string(i) + " non-finite at t=" +
                        std::to_string(t_next));
      }
    }
    t = t_next;
    if (hooks.on_point && !hooks.on_point(t, x)) return;
  }
}

inline Trajectory integrate_fixed_rk4(const OdeRhs& rhs, std::span<const double> x0, double t0,
                                      double t1, double h,
                                      std::span<const double> breakpoints = {}) {
  Trajectory traj;
  traj.dimension = x0.size();
  Rk4Hooks hooks;
  hooks.on_point = [&](double t, std::span<const double> x) {
    traj.times.push_back(t);
    traj.states.emplace_back(x.begin(), x.end());
    return true;
  };
  integrate_rk4_stream(rhs, x0, t0, t1, h, breakpoints, hooks);
  return traj;
}

}  // namespace fxcor
