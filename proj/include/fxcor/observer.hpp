#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "fxcor/dos.hpp"
#include "fxcor/graph.hpp"
#include "fxcor/numerics/scalar.hpp"

namespace fxcor {

/// Gains and exponents of the resilient fixed-time observer
///   η̇_i = Sη_i − μ₁ς̂_i − μ₂ sig^α(ς̂_i) − μ₃ sig^β(ς̂_i).
struct ObserverParams {
  double mu1 = 0.0;
  double mu2 = 0.0;
  double mu3 = 0.0;
  double alpha = 0.5;
  double beta = 2.5;

  /// 0 < α < 1 < 1/α < β and all gains positive.
  void check_exponents() const {
    if (!(alpha > 0.0 && alpha < 1.0 && 1.0 / alpha < beta)) {
      throw Error(ErrorCode::kInvalidExponents,
                  "need 0 < alpha < 1 < 1/alpha < beta (alpha=" + std::to_string(alpha) +
                      ", beta=" + std::to_string(beta) + ")");
    }
    if (!(mu1 > 0.0 && mu2 > 0.0 && mu3 > 0.0)) {
      throw Error(ErrorCode::kInvalidExponents, "observer gains must be positive");
    }
  }
};

struct ConditionResult {
  bool holds = false;
  double slack = std::numeric_limits<double>::quiet_NaN();
};

struct ObserverCertificate {
  double ks_norm = 0.0;  // ‖K⊗S‖
  double c1 = 0.0, c2 = 0.0, c3 = 0.0, c4 = 0.0, c5 = 0.0;
  double hat_c1 = 0.0, hat_c2 = 0.0;
  double tilde_c1 = 0.0, tilde_c2 = 0.0;
  double t0 = 0.0;
  double bar_t_o = std::numeric_limits<double>::quiet_NaN();
  double t_o = std::numeric_limits<double>::quiet_NaN();
  // Roots of the defining equations found independently by bisection.
  double bar_t_o_bisect = std::numeric_limits<double>::quiet_NaN();
  double t_o_bisect = std::numeric_limits<double>::quiet_NaN();
  std::array<ConditionResult, 3> conditions{};

  bool all_conditions_hold() const {
    return conditions[0].holds && conditions[1].holds && conditions[2].holds;
  }
};

/// Constants of the settling-time certificate. ‖K⊗S‖ = k_M·‖S‖ for diagonal
/// positive K.
inline ObserverCertificate compute_constants(const ObserverParams& params, const GainMatrixK& k,
                                             std::size_t n_agents, std::size_t q,
                                             double s_norm) {
  params.check_exponents();
  const double a = params.alpha, b = params.beta;
  const double mu1 = params.mu1, mu2 = params.mu2, mu3 = params.mu3;
  const double km = k.k_max();
  const double nq = static_cast<double>(n_agents * q);
  const double qd = static_cast<double>(q);

  ObserverCertificate c;
  c.ks_norm = km * s_norm;
  if (!(mu1 > c.ks_norm)) {
    throw Error(ErrorCode::kGainTooSmall, "mu1 = " + std::to_string(mu1) +
                                              " must exceed ||K (x) S|| = " +
                                              std::to_string(c.ks_norm));
  }
  const double g1 = mu1 * km / 2.0;
  const double g2 = mu2 * km / (a + 1.0);
  const double g3 = mu3 * km / (b + 1.0);

  c.c1 = 0.5 * std::min({mu1 * mu1 - c.ks_norm * c.ks_norm, mu2 * mu2,
                         mu3 * mu3 * std::pow(nq, 1.0 - b)});
  c.c2 = std::max({g1, g2 * std::pow(nq, (1.0 - a) / 2.0), g3});
  c.c3 = std::pow(3.0 * nq, (b - 1.0) / (b + 1.0)) *
         std::pow(std::max({g1, g2, g3}), 2.0 * b / (b + 1.0));
  const double e = 2.0 * a / (a + 1.0);
  c.c4 = std::max({std::pow(g1, e) * std::pow(nq, (1.0 - a) / (a + 1.0)),
                   std::pow(g2, e) * std::pow(nq, 1.0 - a), std::pow(g3, e)});
  c.c5 = std::max(std::pow(qd, (1.0 - a) / 2.0), std::pow(qd, (b - 1.0) / 2.0)) * s_norm *
         (b + 1.0);
  c.hat_c1 = c.c1 * (1.0 - a) / (5.0 * c.c4 * (a + 1.0));
  c.hat_c2 = c.c5 * (1.0 - a) / (a + 1.0);
  c.tilde_c1 = c.c1 * (b - 1.0) / (5.0 * c.c2 * (b + 1.0));
  c.tilde_c2 = c.c5 * (b - 1.0) / (b + 1.0);
  return c;
}

inline ConditionResult condition_one(const ObserverCertificate& c, const AttackBudget& budget) {
  const double slack = c.c1 / (5.0 * c.c2) * (budget.p_d - 1.0) - c.c5;
  return {slack > 0.0, slack};
}

inline ConditionResult condition_two(const ObserverCertificate& c, const AttackBudget& budget) {
  const double slack =
      c.hat_c2 * std::exp(c.hat_c2 * budget.nu_d) - c.hat_c1 * (budget.p_d - 1.0);
  return {slack < 0.0, slack};
}

/// Value of the second-stage comparison function at t_o; nonpositive means
/// the bound reaches zero.
inline ConditionResult condition_three(const ObserverCertificate& c, const AttackBudget& budget) {
  if (!std::isfinite(c.t_o) || !std::isfinite(c.bar_t_o)) return {};
  const double d = c.t_o - c.bar_t_o;
  const double slack = std::exp(c.hat_c2 * (d / budget.p_d + budget.nu_d)) -
                       c.hat_c1 * (budget.p_d - 1.0) / budget.p_d * d + c.hat_c1 * budget.nu_d;
  return {slack <= 0.0, slack};
}

inline std::array<ConditionResult, 3> check_conditions(const ObserverCertificate& c,
                                                      const AttackBudget& budget) {
  return {condition_one(c, budget), condition_two(c, budget), condition_three(c, budget)};
}

namespace detail {

inline double bisect_increasing(const std::function<double(double)>& f, double lo) {
  double step = 1.0;
  double hi = lo + step;
  for (int i = 0; i < 200 && f(hi) <= 0.0; ++i) {
    step *= 2.0;
    hi = lo + step;
  }
  return find_root_bisect(f, lo, hi, 1e-13 * std::max(1.0, std::abs(hi)));
}

}  // namespace detail

/// Fills t̄_o and t_o from their closed forms, cross-checks both against
/// bisection on the defining equations, then evaluates condition (iii).
inline ObserverCertificate compute_settling_certificate(ObserverCertificate c,
                                                        const AttackBudget& budget, double t0) {
  budget.validate();
  c.t0 = t0;
  const auto one = condition_one(c, budget);
  const auto two = condition_two(c, budget);
  if (!one.holds || !two.holds) {
    c.conditions = {one, two, ConditionResult{}};
    throw Error(ErrorCode::kConditionFailed,
                "condition (i) slack " + std::to_string(one.slack) + ", condition (ii) slack " +
                    std::to_string(two.slack));
  }
  const double pd = budget.p_d, nu = budget.nu_d;
  const double rate1 = c.tilde_c1 * (pd - 1.0) - c.tilde_c2;
  c.bar_t_o = t0 + pd * (std::log(1.0 + c.c3 / c.c2) + (c.tilde_c1 + c.tilde_c2) * nu) / rate1;
  c.t_o = c.bar_t_o +
          pd / c.hat_c2 * (std::log(c.hat_c1 * (pd - 1.0) / c.hat_c2) - c.hat_c2 * nu);

  const auto first_stage = [&](double t) {
    return c.c2 * std::exp(rate1 * (t - t0) / pd - c.tilde_c1 * nu - c.tilde_c2 * nu) - c.c2 -
           c.c3;
  };
  c.bar_t_o_bisect = detail::bisect_increasing(first_stage, t0);
  const double bar = c.bar_t_o_bisect;
  const auto second_stage = [&](double t) {
    return c.hat_c2 * std::exp(c.hat_c2 * ((t - bar) / pd + nu)) - c.hat_c1 * (pd - 1.0);
  };
  c.t_o_bisect = detail::bisect_increasing(second_stage, bar);
  if (std::abs(c.bar_t_o - c.bar_t_o_bisect) > 1e-8 || std::abs(c.t_o - c.t_o_bisect) > 1e-8) {
    throw Error(ErrorCode::kConstructionFailed,
                "closed-form and bisection settling times disagree");
  }
  c.conditions = check_conditions(c, budget);
  return c;
}

/// Complete certificate in one call.
inline ObserverCertificate certify_observer(const ObserverParams& params, const GainMatrixK& k,
                                            std::size_t n_agents, std::size_t q, double s_norm,
                                            const AttackBudget& budget, double t0) {
  return compute_settling_certificate(compute_constants(params, k, n_agents, q, s_norm), budget,
                                      t0);
}

/// Observer right-hand side with neighbour lists precomputed; used inside the
/// integrator where allocation per call matters.
class ObserverKernel {
 public:
  ObserverKernel() = default;
  ObserverKernel(const DirectedGraph& graph, const ObserverParams& params, const Matrix& s)
      : n_(graph.agents()), q_(s.rows()), params_(params), s_(s), sigma_(s.rows()) {
    neighbours_.resize(n_);
    for (std::size_t i = 1; i <= n_; ++i)
      for (std::size_t j = 0; j <= n_; ++j)
        if (graph.weight(i, j) > 0.0) neighbours_[i - 1].push_back({j, graph.weight(i, j)});
  }

  std::size_t agents() const noexcept { return n_; }
  std::size_t order() const noexcept { return q_; }
  const ObserverParams& params() const noexcept { return params_; }

  /// eta holds N stacked q-vectors; v is the exosystem state (node 0).
  void operator()(std::span<const double> v, std::span<const double> eta, int theta,
                  std::span<double> deta) const {
    for (std::size_t i = 0; i < n_; ++i) {
      const double* eta_i = eta.data() + i * q_;
      double* out = deta.data() + i * q_;
      for (std::size_t r = 0; r < q_; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < q_; ++c) acc += s_(r, c) * eta_i[c];
        out[r] = acc;
      }
      if (theta == 0) continue;
      std::fill(sigma_.begin(), sigma_.end(), 0.0);
      for (const auto& nb : neighbours_[i]) {
        const double* eta_j = nb.node == 0 ? v.data() : eta.data() + (nb.node - 1) * q_;
        for (std::size_t r = 0; r < q_; ++r) sigma_[r] += nb.weight * (eta_i[r] - eta_j[r]);
      }
      for (std::size_t r = 0; r < q_; ++r) {
        const double z = sigma_[r];
        double term = params_.mu1 * z;
        if (params_.mu2 != 0.0) term += params_.mu2 * sig_power(z, params_.alpha);
        if (params_.mu3 != 0.0) term += params_.mu3 * sig_power(z, params_.beta);
        out[r] -= term;
      }
    }
  }

 private:
  struct Neighbour {
    std::size_t node;
    double weight;
  };
  std::size_t n_ = 0;
  std::size_t q_ = 0;
  ObserverParams params_;
  Matrix s_;
  std::vector<std::vector<Neighbour>> neighbours_;
  mutable Vector sigma_;
};

/// Per-agent form: η̂ derivatives for all N agents, with η₀ ≡ v.
inline std::vector<Vector> observer_rhs(const std::vector<Vector>& eta_all, const Vector& v,
                                        const DirectedGraph& graph, int theta,
                                        const ObserverParams& params, const Matrix& s) {
  const std::size_t q = s.rows();
  if (eta_all.size() != graph.agents() || v.size() != q) {
    throw Error(ErrorCode::kDimensionMismatch, "observer_rhs sizes");
  }
  Vector stacked;
  for (const auto& e : eta_all) {
    if (e.size() != q) throw Error(ErrorCode::kDimensionMismatch, "observer state size");
    stacked.insert(stacked.end(), e.begin(), e.end());
  }
  Vector d(stacked.size());
  ObserverKernel(graph, params, s)(v, stacked, theta, d);
  std::vector<Vector> out(eta_all.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i].assign(d.begin() + static_cast<long>(i * q), d.begin() + static_cast<long>((i + 1) * q));
  return out;
}

/// ς = (H⊗I_q)·η̃ for stacked estimation errors.
inline Vector consensus_errors(const CouplingMatrix& coupling, std::span<const double> eta_err,
                               std::size_t q) {
  const Matrix& h = coupling.h;
  const std::size_t n = h.rows();
  if (eta_err.size() != n * q) throw Error(ErrorCode::kDimensionMismatch, "consensus_errors");
  Vector sigma(n * q, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double hij = h(i, j);
      if (hij == 0.0) continue;
      for (std::size_t r = 0; r < q; ++r) sigma[i * q + r] += hij * eta_err[j * q + r];
    }
  return sigma;
}

/// V = Σ_i k_i Σ_r (μ₁/2·ς_ir² + μ₂/(α+1)·|ς_ir|^{α+1} + μ₃/(β+1)·|ς_ir|^{β+1}).
inline double lyapunov_v(std::span<const double> sigma, const GainMatrixK& k,
                         const ObserverParams& params) {
  const std::size_t n = k.k.size();
  if (n == 0 || sigma.size() % n != 0) throw Error(ErrorCode::kDimensionMismatch, "lyapunov_v");
  const std::size_t q = sigma.size() / n;
  double v = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double agent = 0.0;
    for (std::size_t r = 0; r < q; ++r) {
      const double z = std::abs(sigma[i * q + r]);
      if (z == 0.0) continue;
      agent += params.mu1 / 2.0 * z * z +
               params.mu2 / (params.alpha + 1.0) * std::pow(z, params.alpha + 1.0) +
               params.mu3 / (params.beta + 1.0) * std::pow(z, params.beta + 1.0);
    }
    v += k.k[i] * agent;
  }
  return v;
}

}  // namespace fxcor
