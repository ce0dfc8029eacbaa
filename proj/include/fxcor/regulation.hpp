#pragma once

#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "fxcor/numerics/linalg.hpp"

namespace fxcor {

inline constexpr double kTolRank = 1e-9;

/// ẋ = Ax + Bu + Ev, e = Cx + Fv.
struct AgentModel {
  Matrix a, b, c, e, f;

  std::size_t n() const noexcept { return a.rows(); }
  std::size_t m() const noexcept { return b.cols(); }
  std::size_t p() const noexcept { return c.rows(); }
  std::size_t q() const noexcept { return e.cols(); }

  void check_dimensions() const {
    const std::size_t nn = n();
    auto fail = [](const std::string& what) {
      throw Error(ErrorCode::kDimensionMismatch, what);
    };
    if (!a.is_square() || nn == 0) fail("A must be square and nonempty");
    if (b.rows() != nn || b.cols() == 0 || b.cols() > nn) fail("B must be n x m with 1 <= m <= n");
    if (c.cols() != nn) fail("C must have n columns");
    if (e.rows() != nn) fail("E must have n rows");
    if (f.rows() != c.rows() || f.cols() != e.cols()) fail("F must be p x q");
  }
};

struct ExosystemModel {
  Matrix s;
  std::size_t q() const noexcept { return s.rows(); }
};

struct RegulatorSolution {
  Matrix pi;     // n × q
  Matrix gamma;  // m × q
  double residual_dynamics = 0.0;
  double residual_output = 0.0;
};

/// Solves AΠ + BΓ + E = ΠS, CΠ + F = 0 as one stacked linear system in
/// [vec Π; vec Γ]. Non-square systems go through least squares and are
/// accepted only if both residuals meet 1e-9·(1 + ‖E‖_F + ‖F‖_F).
inline RegulatorSolution solve_regulator_equations(const AgentModel& agent,
                                                   const ExosystemModel& exo) {
  agent.check_dimensions();
  const std::size_t n = agent.n(), m = agent.m(), p = agent.p(), q = exo.q();
  if (!exo.s.is_square() || agent.q() != q) {
    throw Error(ErrorCode::kDimensionMismatch, "E/F columns must match the exosystem order");
  }
  const Matrix iq = Matrix::identity(q);
  const Matrix in = Matrix::identity(n);
  const Matrix dyn_pi = kron(iq, agent.a) - kron(exo.s.transpose(), in);
  const Matrix dyn_gamma = kron(iq, agent.b);
  const Matrix out_pi = kron(iq, agent.c);

  Matrix lhs(n * q + p * q, n * q + m * q);
  lhs.set_block(0, 0, dyn_pi);
  lhs.set_block(0, n * q, dyn_gamma);
  lhs.set_block(n * q, 0, out_pi);
  Vector rhs = vec(agent.e);
  const Vector vf = vec(agent.f);
  rhs.insert(rhs.end(), vf.begin(), vf.end());
  for (double& x : rhs) x = -x;

  const LeastSquaresResult ls = least_squares(lhs, rhs);
  RegulatorSolution sol;
  sol.pi = unvec(std::span<const double>(ls.x).subspan(0, n * q), n, q);
  sol.gamma = unvec(std::span<const double>(ls.x).subspan(n * q, m * q), m, q);
  sol.residual_dynamics =
      frobenius_norm(agent.a * sol.pi + agent.b * sol.gamma + agent.e - sol.pi * exo.s);
  sol.residual_output = frobenius_norm(agent.c * sol.pi + agent.f);
  const double scale = 1.0 + frobenius_norm(agent.e) + frobenius_norm(agent.f);
  if (!(sol.residual_dynamics <= 1e-9 * scale) || !(sol.residual_output <= 1e-9 * scale)) {
    throw Error(ErrorCode::kNoSolution,
                "regulator equations inconsistent; least-squares residual " +
                    std::to_string(ls.residual_norm));
  }
  return sol;
}

/// Luenberger-form data for one agent. Rows of t_mat are grouped per input
/// channel r as (R_r, R_r A, …, R_r A^{q_r−1}), so T·x̃ lists each channel's
/// integrator chain.
struct NormalForm {
  Matrix t_mat;
  Matrix g_mat;
  std::vector<std::size_t> indices;
  Matrix r_mat;
  Matrix x_mat;
  Matrix u_mat;

  std::size_t block_offset(std::size_t r) const {
    return std::accumulate(indices.begin(), indices.begin() + static_cast<long>(r),
                           std::size_t{0});
  }
};

/// Brunovsky scan of [b₁..b_m, Ab₁..Ab_m, …]: a column is kept if it is
/// independent of those kept before it; once A^k b_j is dependent the
/// channel j stops contributing.
inline std::vector<std::size_t> controllability_indices(const Matrix& a, const Matrix& b,
                                                        double tol_rank = kTolRank) {
  const std::size_t n = a.rows(), m = b.cols();
  std::vector<Matrix> powers_b{b};
  double scale = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (k > 0) powers_b.push_back(a * powers_b.back());
    for (std::size_t j = 0; j < m; ++j) scale = std::max(scale, norm2(powers_b[k].col(j)));
  }
  if (scale == 0.0) throw Error(ErrorCode::kRankDeficientB, "B is zero");

  std::vector<Vector> basis;
  std::vector<std::size_t> indices(m, 0);
  std::vector<bool> active(m, true);
  for (std::size_t k = 0; k < n && basis.size() < n; ++k) {
    for (std::size_t j = 0; j < m; ++j) {
      if (!active[j]) continue;
      Vector v = powers_b[k].col(j);
      for (int pass = 0; pass < 2; ++pass)
        for (const Vector& u : basis) {
          const double d = std::inner_product(u.begin(), u.end(), v.begin(), 0.0);
          for (std::size_t i = 0; i < n; ++i) v[i] -= d * u[i];
        }
      const double r = norm2(v);
      if (r > tol_rank * scale) {
        for (double& x : v) x /= r;
        basis.push_back(std::move(v));
        ++indices[j];
      } else {
        if (k == 0) {
          throw Error(ErrorCode::kRankDeficientB,
                      "column " + std::to_string(j) + " of B depends on earlier columns");
        }
        active[j] = false;
      }
    }
  }
  if (basis.size() != n) {
    throw Error(ErrorCode::kNotControllable, "controllability matrix has rank " +
                                                 std::to_string(basis.size()) + " < " +
                                                 std::to_string(n));
  }
  return indices;
}

namespace detail {

inline void certify_normal_form(const Matrix& a, const Matrix& b, const NormalForm& nf) {
  constexpr double kRel = 1e-7;
  const std::size_t n = a.rows(), m = b.cols();
  auto fail = [](const std::string& what) {
    throw Error(ErrorCode::kConstructionFailed, "normal form check: " + what);
  };
  const Matrix t_inv = inverse(nf.t_mat);
  (void)inverse(nf.x_mat);

  // Relative-degree zero pattern R_r A^l B = 0, l ≤ q_r − 2.
  for (std::size_t r = 0; r < m; ++r) {
    Matrix row = nf.r_mat.block(r, 0, 1, n);
    for (std::size_t l = 0; l + 2 <= nf.indices[r]; ++l) {
      const double row_scale = max_abs(row) * max_abs(b);
      const Matrix prod = row * b;
      if (max_abs(prod) > kRel * std::max(row_scale, 1e-300) * static_cast<double>(n)) {
        fail("R_" + std::to_string(r) + " A^" + std::to_string(l) + " B nonzero");
      }
      row = row * a;
    }
  }
  const Matrix a_bar = nf.t_mat * a * t_inv;
  const Matrix b_bar = nf.t_mat * b * inverse(nf.g_mat);
  const double a_tol = kRel * (1.0 + max_abs(a_bar));
  const double b_tol = kRel * (1.0 + max_abs(b_bar));
  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t off = nf.block_offset(r);
    const std::size_t qr = nf.indices[r];
    for (std::size_t k = 0; k < qr; ++k) {
      const std::size_t row = off + k;
      const bool last = k + 1 == qr;
      if (!last) {
        for (std::size_t j = 0; j < n; ++j) {
          const double want = j == row + 1 ? 1.0 : 0.0;
          if (std::abs(a_bar(row, j) - want) > a_tol) fail("integrator chain rows of TAT⁻¹");
        }
      }
      for (std::size_t j = 0; j < m; ++j) {
        const double want = (last && j == r) ? 1.0 : 0.0;
        if (std::abs(b_bar(row, j) - want) > b_tol) fail("input selector rows of TBG⁻¹");
      }
    }
  }
}

}  // namespace detail

/// Luenberger second canonical form. t_r is the last row of the inverse of
/// the ordered controllability matrix within channel r, rescaled so its
/// largest-magnitude entry is +1 (this yields R = e₁ᵀ for a pure integrator
/// chain driven at its bottom).
inline NormalForm luenberger_normal_form(const AgentModel& agent) {
  agent.check_dimensions();
  const Matrix& a = agent.a;
  const Matrix& b = agent.b;
  const std::size_t n = a.rows(), m = b.cols();

  NormalForm nf;
  nf.indices = controllability_indices(a, b);

  Matrix ctrl(n, n);
  std::size_t col = 0;
  for (std::size_t r = 0; r < m; ++r) {
    Vector v = b.col(r);
    for (std::size_t k = 0; k < nf.indices[r]; ++k) {
      for (std::size_t i = 0; i < n; ++i) ctrl(i, col) = v[i];
      ++col;
      v = a * v;
    }
  }
  const Matrix ctrl_inv = inverse(ctrl);

  nf.t_mat = Matrix(n, n);
  nf.r_mat = Matrix(m, n);
  nf.x_mat = Matrix(m, m);
  nf.u_mat = Matrix(m, n);
  std::size_t sigma = 0;
  for (std::size_t r = 0; r < m; ++r) {
    sigma += nf.indices[r];
    Matrix t_row = ctrl_inv.block(sigma - 1, 0, 1, n);
    std::size_t arg = 0;
    for (std::size_t j = 1; j < n; ++j)
      if (std::abs(t_row(0, j)) > std::abs(t_row(0, arg))) arg = j;
    t_row *= 1.0 / t_row(0, arg);

    nf.r_mat.set_block(r, 0, t_row);
    const std::size_t off = sigma - nf.indices[r];
    Matrix chain = t_row;
    for (std::size_t k = 0; k < nf.indices[r]; ++k) {
      nf.t_mat.set_block(off + k, 0, chain);
      if (k + 1 == nf.indices[r]) nf.x_mat.set_block(r, 0, chain * b);
      chain = chain * a;
    }
    nf.u_mat.set_block(r, 0, chain);
  }
  nf.g_mat = nf.x_mat;
  detail::certify_normal_form(a, b, nf);
  return nf;
}

}  // namespace fxcor
