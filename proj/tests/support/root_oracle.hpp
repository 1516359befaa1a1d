#pragma once

// Scalar root finding and a brute-force symmetric eigenvalue oracle, kept
// independent of the library's own linear algebra.

#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

namespace oracle {

/// Plain bisection to ~1e-14; requires a sign change on [a, b].
inline double bisect(const std::function<double(double)>& f, double a, double b) {
  double fa = f(a), fb = f(b);
  if (fa == 0) return a;
  if (fb == 0) return b;
  if ((fa > 0) == (fb > 0)) throw std::runtime_error("bisect: no sign change");
  for (int it = 0; it < 200; ++it) {
    double m = 0.5 * (a + b);
    double fm = f(m);
    if (fm == 0) return m;
    if ((fm > 0) == (fa > 0)) {
      a = m;
      fa = fm;
    } else {
      b = m;
    }
    if (b - a < 1e-15 * (1 + std::fabs(a))) break;
  }
  return 0.5 * (a + b);
}

/// det(A) by cofactor expansion; fine for the n <= 5 oracle sizes used here.
inline double det_cofactor(const std::vector<std::vector<double>>& a) {
  std::size_t n = a.size();
  if (n == 1) return a[0][0];
  double sum = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::vector<std::vector<double>> minor;
    for (std::size_t i = 1; i < n; ++i) {
      std::vector<double> row;
      for (std::size_t j = 0; j < n; ++j)
        if (j != c) row.push_back(a[i][j]);
      minor.push_back(row);
    }
    sum += ((c % 2 == 0) ? 1.0 : -1.0) * a[0][c] * det_cofactor(minor);
  }
  return sum;
}

/// All eigenvalues of a small symmetric matrix: scan det(A - tI) for sign
/// changes inside the Gershgorin interval and bisect each bracket.
inline std::vector<double> sym_eigenvalues(const std::vector<std::vector<double>>& a) {
  std::size_t n = a.size();
  double lo = 0, hi = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double r = 0;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) r += std::fabs(a[i][j]);
    lo = std::min(lo, a[i][i] - r);
    hi = std::max(hi, a[i][i] + r);
  }
  lo -= 1e-6;
  hi += 1e-6;
  auto chi = [&](double t) {
    auto m = a;
    for (std::size_t i = 0; i < n; ++i) m[i][i] -= t;
    return det_cofactor(m);
  };
  std::vector<double> roots;
  const int kSamples = 20000;
  double prev_t = lo, prev_v = chi(lo);
  for (int s = 1; s <= kSamples; ++s) {
    double t = lo + (hi - lo) * s / kSamples;
    double v = chi(t);
    if (v == 0.0) {
      roots.push_back(t);
    } else if ((prev_v > 0) != (v > 0)) {
      roots.push_back(bisect(chi, prev_t, t));
    }
    prev_t = t;
    prev_v = v;
  }
  return roots;
}

}  // namespace oracle
