#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "fxcor/numerics/linalg.hpp"
#include "fxcor/numerics/scalar.hpp"

namespace fxcor {

inline constexpr double kDefaultQScale = 0.02;

struct ExponentPair {
  Vector gamma;
  Vector gamma_bar;
};

namespace detail {

inline Vector exponent_chain(double terminal, std::size_t order, const char* name) {
  Vector g(order);
  if (order == 0) return g;
  g[order - 1] = terminal;
  double next = 1.0;  // γ_{n+1}
  for (std::size_t r = order - 1; r > 0; --r) {
    const double denom = 2.0 * next - g[r];
    if (!(denom > 0.0)) {
      throw Error(ErrorCode::kDegenerateRecursion,
                  std::string(name) + " recursion denominator " + std::to_string(denom) +
                      " at index " + std::to_string(r));
    }
    g[r - 1] = g[r] * next / denom;
    next = g[r];
  }
  return g;
}

}  // namespace detail

/// γ_{r−1} = γ_rγ_{r+1}/(2γ_{r+1} − γ_r) anchored at γ_{n+1} = 1, for both the
/// sub-linear (γ_n < 1) and super-linear (γ̄_n > 1) chains.
inline ExponentPair homogeneity_exponents(double gamma_n, double gamma_bar_n, std::size_t order) {
  if (!(gamma_n > 0.0 && gamma_n < 1.0) || !(gamma_bar_n > 1.0)) {
    throw Error(ErrorCode::kInvalidExponents, "need 0 < gamma_n < 1 < gamma_bar_n");
  }
  return {detail::exponent_chain(gamma_n, order, "gamma"),
          detail::exponent_chain(gamma_bar_n, order, "gamma_bar")};
}

/// Integrator chain closed by the last row (−ψ₁ … −ψ_n).
inline Matrix companion_matrix(std::span<const double> psi) {
  const std::size_t n = psi.size();
  Matrix m(n, n);
  for (std::size_t i = 0; i + 1 < n; ++i) m(i, i + 1) = 1.0;
  for (std::size_t j = 0; j < n; ++j) m(n - 1, j) = -psi[j];
  return m;
}

/// Characteristic polynomial s^n + ψ_n s^{n−1} + … + ψ₁ of the companion
/// matrix, highest power first with the leading one dropped.
inline Vector companion_polynomial(std::span<const double> psi) {
  return Vector(psi.rbegin(), psi.rend());
}

struct HurwitzVerdict {
  bool psi = false;
  bool psi_bar = false;
  bool both() const { return psi && psi_bar; }
};

inline HurwitzVerdict validate_coefficients(std::span<const double> psi,
                                            std::span<const double> psi_bar) {
  return {routh_hurwitz(companion_polynomial(psi)), routh_hurwitz(companion_polynomial(psi_bar))};
}

struct ChannelGains {
  std::size_t order = 0;
  Vector psi, psi_bar;
  Vector gamma, gamma_bar;
  Matrix q_lyap, q_bar_lyap;
  Matrix p, p_bar;
  HurwitzVerdict hurwitz;
  EigenRange p_range, p_bar_range;
  double t_c_channel = 0.0;

  double terminal_gamma() const { return gamma.back(); }
  double terminal_gamma_bar() const { return gamma_bar.back(); }
};

/// t_c = γλ_M(P)·λ_M(P)^{(1−γ)/γ} / ((1−γ)λ_m(Q))
///     + γ̄λ_M(P̄)·λ_M(P̄)^{(γ̄−1)/γ̄} / ((γ̄−1)λ_m(Q̄)),
/// with P, P̄ from PΨ + ΨᵀP = −Q. Fills p, p_bar and the eigen ranges.
inline double channel_settling_bound(ChannelGains& g) {
  g.hurwitz = validate_coefficients(g.psi, g.psi_bar);
  if (!g.hurwitz.both()) {
    throw Error(ErrorCode::kNotHurwitz, std::string("companion matrix not Hurwitz (") +
                                            (g.hurwitz.psi ? "psi_bar" : "psi") + ")");
  }
  g.p = solve_lyapunov(companion_matrix(g.psi), g.q_lyap);
  g.p_bar = solve_lyapunov(companion_matrix(g.psi_bar), g.q_bar_lyap);
  g.p_range = symmetric_eigen_range(g.p);
  g.p_bar_range = symmetric_eigen_range(g.p_bar);
  const double q_min = symmetric_eigen_range(g.q_lyap).min;
  const double qb_min = symmetric_eigen_range(g.q_bar_lyap).min;
  if (!(g.p_range.min > 0.0) || !(g.p_bar_range.min > 0.0) || !(q_min > 0.0) ||
      !(qb_min > 0.0)) {
    throw Error(ErrorCode::kNotHurwitz, "Lyapunov solution or Q not positive definite");
  }
  const double ga = g.terminal_gamma();
  const double gb = g.terminal_gamma_bar();
  const double pm = g.p_range.max;
  const double pbm = g.p_bar_range.max;
  g.t_c_channel = ga * pm * std::pow(pm, (1.0 - ga) / ga) / ((1.0 - ga) * q_min) +
                  gb * pbm * std::pow(pbm, (gb - 1.0) / gb) / ((gb - 1.0) * qb_min);
  return g.t_c_channel;
}

/// Builds and bounds one channel from user-facing data.
inline ChannelGains make_channel_gains(Vector psi, Vector psi_bar, double gamma_n,
                                       double gamma_bar_n, double q_scale = kDefaultQScale,
                                       double q_bar_scale = kDefaultQScale) {
  if (psi.size() != psi_bar.size() || psi.empty()) {
    throw Error(ErrorCode::kDimensionMismatch, "psi and psi_bar must have the same nonzero length");
  }
  ChannelGains g;
  g.order = psi.size();
  g.psi = std::move(psi);
  g.psi_bar = std::move(psi_bar);
  auto ex = homogeneity_exponents(gamma_n, gamma_bar_n, g.order);
  g.gamma = std::move(ex.gamma);
  g.gamma_bar = std::move(ex.gamma_bar);
  g.q_lyap = q_scale * Matrix::identity(g.order);
  g.q_bar_lyap = q_bar_scale * Matrix::identity(g.order);
  channel_settling_bound(g);
  return g;
}

struct SettlingBounds {
  double t_c = 0.0;
  double t_a = 0.0;
};

inline SettlingBounds total_settling_bound(double t_o, std::span<const double> channel_bounds) {
  double t_c = 0.0;
  for (double b : channel_bounds) t_c = std::max(t_c, b);
  return {t_c, t_o + t_c};
}

/// ω = −Σ_k (ψ^k sig^{γ^k}(ϱ^{(k−1)}) + ψ̄^k sig^{γ̄^k}(ϱ^{(k−1)})) for one chain.
inline double chain_feedback(const ChannelGains& g, const double* chain) {
  double w = 0.0;
  for (std::size_t k = 0; k < g.order; ++k) {
    const double z = chain[k];
    w -= g.psi[k] * sig_power(z, g.gamma[k]) + g.psi_bar[k] * sig_power(z, g.gamma_bar[k]);
  }
  return w;
}

}  // namespace fxcor
