#pragma once

#include <cmath>
#include <vector>

#include "morsetrack/errors.hpp"

namespace morsetrack {

/// Minimal dense square matrix, row-major.  Desk-scale sizes only (n <= ~20),
/// so no blocking or pivoting heroics beyond partial pivoting.
struct Mat {
  int n = 0;
  std::vector<double> a;

  Mat() = default;
  explicit Mat(int n_) : n(n_), a(std::size_t(n_) * n_, 0.0) {}

  double& operator()(int i, int j) { return a[std::size_t(i) * n + j]; }
  double operator()(int i, int j) const { return a[std::size_t(i) * n + j]; }

  static Mat identity(int n) {
    Mat m(n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }
};

inline Mat mat_mul(const Mat& x, const Mat& y) {
  Mat r(x.n);
  for (int i = 0; i < x.n; ++i)
    for (int k = 0; k < x.n; ++k) {
      double v = x(i, k);
      if (v == 0.0) continue;
      for (int j = 0; j < x.n; ++j) r(i, j) += v * y(k, j);
    }
  return r;
}

inline Mat mat_transpose(const Mat& x) {
  Mat r(x.n);
  for (int i = 0; i < x.n; ++i)
    for (int j = 0; j < x.n; ++j) r(j, i) = x(i, j);
  return r;
}

/// LU with partial pivoting.  Throws domain_error on (numerically) singular input
/// unless `*ok` is supplied, in which case failure is reported there.
class Lu {
 public:
  explicit Lu(Mat m, bool* ok = nullptr) : lu_(std::move(m)), piv_(lu_.n), sign_(1.0) {
    int n = lu_.n;
    for (int i = 0; i < n; ++i) piv_[i] = i;
    for (int c = 0; c < n; ++c) {
      int best = c;
      double bestv = std::fabs(lu_(c, c));
      for (int r = c + 1; r < n; ++r)
        if (std::fabs(lu_(r, c)) > bestv) {
          bestv = std::fabs(lu_(r, c));
          best = r;
        }
      if (bestv == 0.0 || !std::isfinite(bestv)) {
        if (ok) {
          *ok = false;
          return;
        }
        throw domain_error("LU: singular matrix");
      }
      if (best != c) {
        for (int j = 0; j < n; ++j) std::swap(lu_(c, j), lu_(best, j));
        std::swap(piv_[c], piv_[best]);
        sign_ = -sign_;
      }
      for (int r = c + 1; r < n; ++r) {
        lu_(r, c) /= lu_(c, c);
        double f = lu_(r, c);
        for (int j = c + 1; j < n; ++j) lu_(r, j) -= f * lu_(c, j);
      }
    }
    if (ok) *ok = true;
  }

  std::vector<double> solve(const std::vector<double>& b) const {
    int n = lu_.n;
    std::vector<double> x(b.size());
    for (int i = 0; i < n; ++i) x[i] = b[std::size_t(piv_[i])];
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < i; ++j) x[i] -= lu_(i, j) * x[j];
    for (int i = n - 1; i >= 0; --i) {
      for (int j = i + 1; j < n; ++j) x[i] -= lu_(i, j) * x[j];
      x[i] /= lu_(i, i);
    }
    return x;
  }

  double det() const {
    double d = sign_;
    for (int i = 0; i < lu_.n; ++i) d *= lu_(i, i);
    return d;
  }

  Mat inverse() const {
    int n = lu_.n;
    Mat inv(n);
    std::vector<double> e(std::size_t(n), 0.0);
    for (int j = 0; j < n; ++j) {
      e[j] = 1.0;
      auto col = solve(e);
      e[j] = 0.0;
      for (int i = 0; i < n; ++i) inv(i, j) = col[i];
    }
    return inv;
  }

 private:
  Mat lu_;
  std::vector<int> piv_;
  double sign_;
};

inline double mat_det(const Mat& m) {
  if (m.n == 0) return 1.0;
  bool ok = false;
  Lu lu(m, &ok);
  return ok ? lu.det() : 0.0;
}

struct EigenSym {
  std::vector<double> values;  // ascending
  Mat vectors;                 // columns, matching `values`
};

/// Cyclic Jacobi for real symmetric matrices.  Off-diagonal tolerance 1e-12
/// relative to the Frobenius norm, at most 30 sweeps.  Eigenvalues come back
/// sorted ascending; each eigenvector is normalized with its largest-magnitude
/// component positive so results are reproducible.
inline EigenSym jacobi_eigen(const Mat& input) {
  int n = input.n;
  Mat a = input;
  Mat v = Mat::identity(n);
  double fro = 0.0;
  for (double x : a.a) fro += x * x;
  fro = std::sqrt(fro);
  const double tol = 1e-12 * (fro > 0 ? fro : 1.0);

  for (int sweep = 0; sweep < 30; ++sweep) {
    double off = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) off += 2.0 * a(i, j) * a(i, j);
    if (std::sqrt(off) < tol) break;
    for (int p = 0; p < n - 1; ++p)
      for (int q = p + 1; q < n; ++q) {
        if (std::fabs(a(p, q)) <= tol * 1e-4) continue;
        double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        double t = (theta >= 0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        double c = 1.0 / std::sqrt(t * t + 1.0);
        double s = t * c;
        for (int k = 0; k < n; ++k) {
          double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
  }

  std::vector<int> perm;
  for (int i = 0; i < n; ++i) perm.push_back(i);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (a(perm[j], perm[j]) < a(perm[i], perm[i])) std::swap(perm[i], perm[j]);

  EigenSym out;
  out.values.resize(std::size_t(n));
  out.vectors = Mat(n);
  for (int j = 0; j < n; ++j) {
    out.values[j] = a(perm[j], perm[j]);
    int top = 0;
    for (int i = 1; i < n; ++i)
      if (std::fabs(v(i, perm[j])) > std::fabs(v(top, perm[j]))) top = i;
    double flip = v(top, perm[j]) < 0 ? -1.0 : 1.0;
    for (int i = 0; i < n; ++i) out.vectors(i, j) = flip * v(i, perm[j]);
  }
  return out;
}

}  // namespace morsetrack
