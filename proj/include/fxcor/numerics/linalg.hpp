#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "fxcor/numerics/matrix.hpp"

namespace fxcor {

namespace detail {

// In-place LU with partial pivoting; returns the permutation.
inline std::vector<std::size_t> lu_factor(Matrix& a) {
  const std::size_t n = a.rows();
  const double scale = inf_norm(a);
  const double pivot_floor = 1e-12 * (scale > 0.0 ? scale : 1.0);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t i = k + 1; i < n; ++i)
      if (std::abs(a(i, k)) > std::abs(a(p, k))) p = i;
    if (!(std::abs(a(p, k)) >= pivot_floor) || scale == 0.0) {
      throw Error(ErrorCode::kSingularMatrix,
                  "pivot " + std::to_string(std::abs(a(p, k))) + " below 1e-12*||A||");
    }
    if (p != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(p, j));
      std::swap(perm[k], perm[p]);
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double f = a(i, k) / a(k, k);
      a(i, k) = f;
      if (f == 0.0) continue;
      for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= f * a(k, j);
    }
  }
  return perm;
}

inline Vector lu_solve(const Matrix& lu, const std::vector<std::size_t>& perm,
                       std::span<const double> b) {
  const std::size_t n = lu.rows();
  Vector x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = b[perm[i]];
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) x[i] -= lu(i, j) * x[j];
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t j = i + 1; j < n; ++j) x[i] -= lu(i, j) * x[j];
    x[i] /= lu(i, i);
  }
  return x;
}

}  // namespace detail

/// Gaussian elimination with partial pivoting. Throws SingularMatrix when a
/// pivot falls below 1e-12·‖A‖∞.
inline Vector solve_linear(const Matrix& a, std::span<const double> b) {
  if (!a.is_square()) throw Error(ErrorCode::kNotSquare, "solve_linear");
  if (a.rows() != b.size()) throw Error(ErrorCode::kDimensionMismatch, "solve_linear rhs");
  Matrix lu = a;
  const auto perm = detail::lu_factor(lu);
  return detail::lu_solve(lu, perm, b);
}
inline Vector solve_linear(const Matrix& a, const Vector& b) {
  return solve_linear(a, std::span<const double>(b));
}

inline Matrix inverse(const Matrix& a) {
  if (!a.is_square()) throw Error(ErrorCode::kNotSquare, "inverse");
  Matrix lu = a;
  const auto perm = detail::lu_factor(lu);
  const std::size_t n = a.rows();
  Matrix inv(n, n);
  Vector e(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    std::fill(e.begin(), e.end(), 0.0);
    e[j] = 1.0;
    const Vector c = detail::lu_solve(lu, perm, e);
    for (std::size_t i = 0; i < n; ++i) inv(i, j) = c[i];
  }
  return inv;
}

struct LeastSquaresResult {
  Vector x;
  std::size_t rank = 0;
  double residual_norm = 0.0;
};

/// Householder QR with column pivoting. Rank-deficient systems get the basic
/// solution (free variables set to zero); the caller judges the residual.
inline LeastSquaresResult least_squares(const Matrix& a, std::span<const double> b,
                                        double rank_tol = 1e-11) {
  if (a.rows() != b.size()) throw Error(ErrorCode::kDimensionMismatch, "least_squares rhs");
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  Matrix r = a;
  Vector qtb(b.begin(), b.end());
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  const std::size_t steps = std::min(m, n);
  double r00 = 0.0;
  std::size_t rank = 0;
  for (std::size_t k = 0; k < steps; ++k) {
    std::size_t best = k;
    double best_norm = -1.0;
    for (std::size_t j = k; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = k; i < m; ++i) s += r(i, j) * r(i, j);
      if (s > best_norm) {
        best_norm = s;
        best = j;
      }
    }
    if (best != k) {
      for (std::size_t i = 0; i < m; ++i) std::swap(r(i, k), r(i, best));
      std::swap(perm[k], perm[best]);
    }
    const double alpha_norm = std::sqrt(best_norm);
    if (k == 0) r00 = alpha_norm;
    if (alpha_norm <= rank_tol * std::max(r00, 1e-300)) break;
    ++rank;
    const double alpha = r(k, k) > 0.0 ? -alpha_norm : alpha_norm;
    Vector v(m - k);
    for (std::size_t i = k; i < m; ++i) v[i - k] = r(i, k);
    v[0] -= alpha;
    const double vnorm2 = std::inner_product(v.begin(), v.end(), v.begin(), 0.0);
    if (vnorm2 > 0.0) {
      for (std::size_t j = k; j < n; ++j) {
        double s = 0.0;
        for (std::size_t i = k; i < m; ++i) s += v[i - k] * r(i, j);
        s *= 2.0 / vnorm2;
        for (std::size_t i = k; i < m; ++i) r(i, j) -= s * v[i - k];
      }
      double s = 0.0;
      for (std::size_t i = k; i < m; ++i) s += v[i - k] * qtb[i];
      s *= 2.0 / vnorm2;
      for (std::size_t i = k; i < m; ++i) qtb[i] -= s * v[i - k];
    }
  }
  Vector y(n, 0.0);
  for (std::size_t i = rank; i-- > 0;) {
    double s = qtb[i];
    for (std::size_t j = i + 1; j < rank; ++j) s -= r(i, j) * y[j];
    y[i] = s / r(i, i);
  }
  LeastSquaresResult out;
  out.x.assign(n, 0.0);
  for (std::size_t j = 0; j < n; ++j) out.x[perm[j]] = y[j];
  out.rank = rank;
  const Vector ax = a * out.x;
  double res = 0.0;
  for (std::size_t i = 0; i < m; ++i) res += (ax[i] - b[i]) * (ax[i] - b[i]);
  out.residual_norm = std::sqrt(res);
  return out;
}

inline std::size_t matrix_rank(const Matrix& a, double rel_tol = 1e-9) {
  if (a.rows() == 0 || a.cols() == 0) return 0;
  const Vector zeros(a.rows(), 0.0);
  return least_squares(a, zeros, rel_tol).rank;
}

/// All eigenvalues of a symmetric matrix by cyclic Jacobi rotations, sorted
/// ascending. Input is symmetrized first; sweeps stop once the off-diagonal
/// Frobenius norm is ≤ tol·max(1, ‖m‖_F).
inline Vector symmetric_eigenvalues(const Matrix& m, double tol = 1e-14) {
  if (!m.is_square()) throw Error(ErrorCode::kNotSquare, "symmetric eigensolve");
  Matrix a = symmetrize(m);
  const std::size_t n = a.rows();
  const double target = tol * std::max(1.0, frobenius_norm(a));
  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
  };
  for (int sweep = 0; sweep < 100 && off_norm() > target; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
  }
  Vector ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

struct EigenRange {
  double min;
  double max;
};

inline EigenRange symmetric_eigen_range(const Matrix& m, double tol = 1e-14) {
  const Vector ev = symmetric_eigenvalues(m, tol);
  if (ev.empty()) return {0.0, 0.0};
  return {ev.front(), ev.back()};
}

inline double spectral_norm(const Matrix& m) {
  if (m.empty()) return 0.0;
  const double lmax = symmetric_eigen_range(m.transpose() * m).max;
  return std::sqrt(std::max(0.0, lmax));
}

/// Solves P·Ψ + Ψᵀ·P = −Q through the vectorized form
/// (I⊗Ψᵀ + Ψᵀ⊗I)·vec(P) = −vec(Q); the result is symmetrized and its
/// residual verified.
inline Matrix solve_lyapunov(const Matrix& psi, const Matrix& q) {
  if (!psi.is_square() || !q.is_square()) throw Error(ErrorCode::kNotSquare, "lyapunov");
  if (psi.rows() != q.rows()) throw Error(ErrorCode::kDimensionMismatch, "lyapunov");
  const std::size_t n = psi.rows();
  const Matrix eye = Matrix::identity(n);
  const Matrix psit = psi.transpose();
  const Matrix op = kron(eye, psit) + kron(psit, eye);
  Vector rhs = vec(q);
  for (double& x : rhs) x = -x;
  Vector p;
  try {
    p = solve_linear(op, rhs);
  } catch (const Error& e) {
    throw Error(ErrorCode::kSingularSystem, std::string("Lyapunov operator: ") + e.what());
  }
  Matrix sol = symmetrize(unvec(p, n, n));
  const Matrix residual = sol * psi + psit * sol + q;
  if (!(frobenius_norm(residual) <= 1e-8 * std::max(frobenius_norm(q), 1e-300))) {
    throw Error(ErrorCode::kSingularSystem, "Lyapunov residual above 1e-8 relative");
  }
  return sol;
}

}  // namespace fxcor
