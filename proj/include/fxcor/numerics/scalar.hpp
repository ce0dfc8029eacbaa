#pragma once

#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "fxcor/numerics/matrix.hpp"

namespace fxcor {

/// sign(x)·|x|^c with a hard zero at the origin.
inline double sig_power(double x, double c) {
  if (x == 0.0) return 0.0;
  if (c == 1.0) return x;
  const double m = std::pow(std::abs(x), c);
  return x > 0.0 ? m : -m;
}

inline Vector sig_power(std::span<const double> x, double c) {
  if (!(c > 0.0)) {
    throw Error(ErrorCode::kNonPositiveExponent, "sig power exponent must be > 0");
  }
  Vector out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = sig_power(x[i], c);
  return out;
}

/// First column of the Routh array for s^n + c_{n-1}s^{n-1} + … + c_0.
/// Coefficients are passed highest power first, leading 1 omitted. Stops
/// early (returning the partial column) at a zero pivot.
inline Vector routh_first_column(std::span<const double> monic_coeffs) {
  const std::size_t n = monic_coeffs.size();
  std::vector<double> coeffs;
  coeffs.reserve(n + 1);
  coeffs.push_back(1.0);
  coeffs.insert(coeffs.end(), monic_coeffs.begin(), monic_coeffs.end());

  const std::size_t width = n / 2 + 1;
  std::vector<double> prev(width, 0.0), cur(width, 0.0);
  for (std::size_t k = 0; k < width; ++k) {
    if (2 * k < coeffs.size()) prev[k] = coeffs[2 * k];
    if (2 * k + 1 < coeffs.size()) cur[k] = coeffs[2 * k + 1];
  }
  Vector column{prev[0]};
  if (n == 0) return column;
  column.push_back(cur[0]);
  for (std::size_t row = 2; row <= n; ++row) {
    if (cur[0] == 0.0) return column;
    std::vector<double> next(width, 0.0);
    for (std::size_t k = 0; k + 1 < width; ++k) {
      next[k] = (cur[0] * prev[k + 1] - prev[0] * cur[k + 1]) / cur[0];
    }
    prev = std::move(cur);
    cur = std::move(next);
    column.push_back(cur[0]);
  }
  return column;
}

/// Routh–Hurwitz test. Any nonpositive first-column entry (including a zero
/// pivot) is reported as not Hurwitz.
inline bool routh_hurwitz(std::span<const double> monic_coeffs) {
  const Vector column = routh_first_column(monic_coeffs);
  if (column.size() != monic_coeffs.size() + 1) return false;
  for (double x : column)
    if (!(x > 0.0)) return false;
  return true;
}

/// Bisection on a sign change. Returns the midpoint once the bracket is
/// narrower than tol.
inline double find_root_bisect(const std::function<double(double)>& f, double lo, double hi,
                               double tol) {
  double flo = f(lo);
  const double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if (!(flo * fhi < 0.0)) {
    throw Error(ErrorCode::kNoBracket, "f(lo) and f(hi) have the same sign");
  }
  for (int it = 0; it < 400 && (hi - lo) > tol; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm < 0.0) == (flo < 0.0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace fxcor
