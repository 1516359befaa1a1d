#pragma once

#include <array>
#include <cmath>
#include <span>
#include <vector>

#include "morsetrack/errors.hpp"
#include "morsetrack/linalg.hpp"
#include "morsetrack/multi_index.hpp"

namespace morsetrack {

/// Truncated Taylor expansion around a point, in Taylor-normalized form:
/// the stored coefficient of a multi-index a is (d^a f / a!) at the base point.
/// Jets are immutable value types as far as the public ops are concerned;
/// all arithmetic truncates at the jet order.
class Jet {
 public:
  Jet() : Jet(1, 0) {}
  Jet(int n, int order)
      : n_(n), order_(order), table_(&MultiIndexTable::get(n, order)),
        c_(std::size_t(table_->size()), 0.0) {}

  static Jet constant(int n, int order, double v) {
    Jet j(n, order);
    j.c_[0] = v;
    return j;
  }

  /// base + u_i: the i-th coordinate as a jet centered at `base`.
  static Jet variable(int n, int order, int i, double base = 0.0) {
    if (i < 0 || i >= n) throw domain_error("jet variable index out of range");
    Jet j(n, order);
    j.c_[0] = base;
    if (order >= 1) {
      MultiIndex m;
      m.n = n;
      m.e[i] = 1;
      j.c_[std::size_t(j.table_->index_of(m))] = 1.0;
    }
    return j;
  }

  int n() const { return n_; }
  int order() const { return order_; }
  int size() const { return int(c_.size()); }
  const MultiIndexTable& table() const { return *table_; }

  double operator[](int i) const { return c_[std::size_t(i)]; }
  double& raw(int i) { return c_[std::size_t(i)]; }

  double value() const { return c_[0]; }

  double coeff(const MultiIndex& m) const {
    int i = table_->index_of(m);
    return i < 0 ? 0.0 : c_[std::size_t(i)];
  }

  /// d^a f at the base point (coefficient times a!).
  double derivative(const MultiIndex& m) const { return coeff(m) * m.factorial(); }

  std::vector<double> gradient() const {
    std::vector<double> g(std::size_t(n_), 0.0);
    if (order_ < 1) return g;
    for (int i = 0; i < n_; ++i) {
      MultiIndex m;
      m.n = n_;
      m.e[i] = 1;
      g[std::size_t(i)] = coeff(m);
    }
    return g;
  }

  Mat hessian() const {
    Mat h(n_);
    if (order_ < 2) return h;
    for (int i = 0; i < n_; ++i)
      for (int j = i; j < n_; ++j) {
        MultiIndex m;
        m.n = n_;
        m.e[i] = std::uint8_t(m.e[i] + 1);
        m.e[j] = std::uint8_t(m.e[j] + 1);
        double v = coeff(m) * (i == j ? 2.0 : 1.0);
        h(i, j) = v;
        h(j, i) = v;
      }
    return h;
  }

  double third_derivative(int i, int j, int k) const {
    MultiIndex m;
    m.n = n_;
    m.e[i] = std::uint8_t(m.e[i] + 1);
    m.e[j] = std::uint8_t(m.e[j] + 1);
    m.e[k] = std::uint8_t(m.e[k] + 1);
    return derivative(m);
  }

  /// D^3 f(v, v, v) -- the cubic form along direction v.
  double cubic_along(std::span<const double> v) const {
    if (order_ < 3) return 0.0;
    double sum = 0.0;
    for (int idx = 0; idx < size(); ++idx) {
      const MultiIndex& m = table_->at(idx);
      if (m.degree() != 3) continue;
      double mono = 1.0;
      for (int t = 0; t < n_; ++t)
        for (int rep = 0; rep < m.e[t]; ++rep) mono *= v[std::size_t(t)];
      sum += c_[std::size_t(idx)] * mono;
    }
    return 6.0 * sum;
  }

  /// D^4 f(v, v, v, v) -- the quartic form along direction v.
  double quartic_along(std::span<const double> v) const {
    if (order_ < 4) return 0.0;
    double sum = 0.0;
    for (int idx = 0; idx < size(); ++idx) {
      const MultiIndex& m = table_->at(idx);
      if (m.degree() != 4) continue;
      double mono = 1.0;
      for (int t = 0; t < n_; ++t)
        for (int rep = 0; rep < m.e[t]; ++rep) mono *= v[std::size_t(t)];
      sum += c_[std::size_t(idx)] * mono;
    }
    return 24.0 * sum;
  }

  Jet with_order(int order) const {
    Jet r(n_, order);
    for (int i = 0; i < r.size(); ++i) {
      int src = table_->index_of(r.table_->at(i));
      r.c_[std::size_t(i)] = src < 0 ? 0.0 : c_[std::size_t(src)];
    }
    return r;
  }

  Jet& operator+=(const Jet& o) {
    check_same(o);
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] += o.c_[i];
    return *this;
  }
  Jet& operator-=(const Jet& o) {
    check_same(o);
    for (std::size_t i = 0; i < c_.size(); ++i) c_[i] -= o.c_[i];
    return *this;
  }
  Jet& operator*=(double s) {
    for (double& x : c_) x *= s;
    return *this;
  }
  Jet& operator+=(double s) {
    c_[0] += s;
    return *this;
  }

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator+(Jet a, double s) { return a += s; }
  friend Jet operator+(double s, Jet a) { return a += s; }
  friend Jet operator-(Jet a, double s) { return a += -s; }
  friend Jet operator-(double s, const Jet& a) {
    Jet r = a * -1.0;
    r += s;
    return r;
  }
  friend Jet operator*(Jet a, double s) { return a *= s; }
  friend Jet operator*(double s, Jet a) { return a *= s; }
  friend Jet operator-(const Jet& a) { return a * -1.0; }

  friend Jet operator*(const Jet& a, const Jet& b) {
    a.check_same(b);
    Jet r(a.n_, a.order_);
    const MultiIndexTable& tab = *a.table_;
    int sz = a.size();
    for (int i = 0; i < sz; ++i) {
      double ai = a.c_[std::size_t(i)];
      if (ai == 0.0) continue;
      for (int j = 0; j < sz; ++j) {
        double bj = b.c_[std::size_t(j)];
        if (bj == 0.0) continue;
        int k = tab.product_index(i, j);
        if (k >= 0) r.c_[std::size_t(k)] += ai * bj;
      }
    }
    return r;
  }

  double max_abs_coeff() const {
    double m = 0.0;
    for (double x : c_) m = std::max(m, std::fabs(x));
    return m;
  }

 private:
  void check_same(const Jet& o) const {
    if (n_ != o.n_ || order_ != o.order_)
      throw domain_error("jet arithmetic requires matching n and order");
  }

  int n_, order_;
  const MultiIndexTable* table_;
  std::vector<double> c_;
};

/// d/du_i, dropping the truncation order by one.
inline Jet jet_partial(const Jet& f, int i) {
  if (i < 0 || i >= f.n()) throw domain_error("jet_partial: variable index out of range");
  int new_order = f.order() > 0 ? f.order() - 1 : 0;
  Jet r(f.n(), new_order);
  const MultiIndexTable& dst = r.table();
  for (int k = 0; k < f.size(); ++k) {
    const MultiIndex& m = f.table().at(k);
    if (m.e[i] == 0) continue;
    MultiIndex d = m;
    d.e[i] = std::uint8_t(d.e[i] - 1);
    int t = dst.index_of(d);
    if (t >= 0) r.raw(t) += f[k] * double(m.e[i]);
  }
  return r;
}

/// Substitute jets for the variables of f.  Each substitution must be centered
/// (zero constant term); all substitutions must live in the same ring.
inline Jet jet_compose(const Jet& f, const std::vector<Jet>& subs) {
  if (int(subs.size()) != f.n())
    throw domain_error("jet_compose: need one substitution per variable");
  int m = subs[0].n();
  int order = subs[0].order();
  for (const Jet& s : subs) {
    if (s.n() != m || s.order() != order)
      throw domain_error("jet_compose: substitutions disagree in n or order");
    if (s.value() != 0.0)
      throw domain_error("jet_compose: substitution has nonzero constant term");
  }
  // powers[i][k] = subs[i]^k
  std::vector<std::vector<Jet>> powers(std::size_t(f.n()));
  for (int i = 0; i < f.n(); ++i) {
    powers[std::size_t(i)].push_back(Jet::constant(m, order, 1.0));
    for (int k = 1; k <= f.order(); ++k)
      powers[std::size_t(i)].push_back(powers[std::size_t(i)].back() * subs[std::size_t(i)]);
  }
  Jet r(m, order);
  for (int idx = 0; idx < f.size(); ++idx) {
    double c = f[idx];
    if (c == 0.0) continue;
    const MultiIndex& a = f.table().at(idx);
    Jet term = Jet::constant(m, order, c);
    for (int i = 0; i < f.n(); ++i)
      if (a.e[i] > 0) term = term * powers[std::size_t(i)][a.e[i]];
    r += term;
  }
  return r;
}

/// 1/f by Newton iteration r <- r(2 - f r); requires nonzero constant term.
inline Jet jet_reciprocal(const Jet& f) {
  if (f.value() == 0.0) throw domain_error("jet_reciprocal: zero constant term");
  Jet r = Jet::constant(f.n(), f.order(), 1.0 / f.value());
  for (int it = 0; it < 6; ++it) r = r * (2.0 - f * r);
  return r;
}

inline Jet operator/(const Jet& a, const Jet& b) { return a * jet_reciprocal(b); }
inline Jet operator/(const Jet& a, double s) { return a * (1.0 / s); }
inline Jet operator/(double s, const Jet& b) { return jet_reciprocal(b) * s; }

/// k-th root by Newton on jets, 6 fixed iterations:
///   g <- g - (g^k - f) / (k g^(k-1)).
/// Needs a positive constant term for even k, nonzero for odd k.
inline Jet jet_root(const Jet& f, int k) {
  if (k < 1) throw domain_error("jet_root: k must be >= 1");
  if (k == 1) return f;
  double c = f.value();
  if (c == 0.0) throw domain_error("jet_root: zero constant term");
  if (k % 2 == 0 && c < 0.0) throw domain_error("jet_root: negative constant term under even root");
  double g0 = (c < 0 ? -1.0 : 1.0) * std::pow(std::fabs(c), 1.0 / k);
  Jet g = Jet::constant(f.n(), f.order(), g0);
  for (int it = 0; it < 6; ++it) {
    Jet gk1 = Jet::constant(f.n(), f.order(), 1.0);
    for (int p = 0; p < k - 1; ++p) gk1 = gk1 * g;
    Jet gk = gk1 * g;
    g = g - (gk - f) / (gk1 * double(k));
  }
  return g;
}

/// Apply an analytic function given its derivatives at the constant term:
/// derivs[k] = h^(k)(f(0)), k = 0..order.  Returns the jet of h(f).
inline Jet jet_analytic(const Jet& f, const std::vector<double>& derivs) {
  if (int(derivs.size()) < f.order() + 1)
    throw domain_error("jet_analytic: not enough derivatives supplied");
  Jet u = f;
  u += -f.value();
  static constexpr double fact[9] = {1, 1, 2, 6, 24, 120, 720, 5040, 40320};
  // Horner in the jet ring.
  Jet r = Jet::constant(f.n(), f.order(), derivs[std::size_t(f.order())] / fact[f.order()]);
  for (int k = f.order() - 1; k >= 0; --k)
    r = r * u + derivs[std::size_t(k)] / fact[k];
  return r;
}

inline Jet jet_exp(const Jet& f) {
  std::vector<double> d(std::size_t(f.order()) + 1, std::exp(f.value()));
  return jet_analytic(f, d);
}

inline Jet jet_sin(const Jet& f) {
  double s = std::sin(f.value()), c = std::cos(f.value());
  std::vector<double> d(std::size_t(f.order()) + 1);
  const double cyc[4] = {s, c, -s, -c};
  for (int k = 0; k <= f.order(); ++k) d[std::size_t(k)] = cyc[k % 4];
  return jet_analytic(f, d);
}

inline Jet jet_cos(const Jet& f) {
  double s = std::sin(f.value()), c = std::cos(f.value());
  std::vector<double> d(std::size_t(f.order()) + 1);
  const double cyc[4] = {c, -s, -c, s};
  for (int k = 0; k <= f.order(); ++k) d[std::size_t(k)] = cyc[k % 4];
  return jet_analytic(f, d);
}

inline Jet jet_sqrt(const Jet& f) {
  if (f.value() <= 0.0) throw domain_error("jet_sqrt: needs positive constant term");
  return jet_root(f, 2);
}

/// Parity declaration for the variables: odd[i] means u_i -> -u_i under the
/// involution.  For the half-space model only the normal coordinate is odd.
struct SymmetryMask {
  int n = 0;
  std::array<bool, kMaxVars> odd{};

  static SymmetryMask x_odd(int n) {
    SymmetryMask m;
    m.n = n;
    m.odd[0] = true;
    return m;
  }

  /// +1 if the monomial is even under the involution, -1 if odd.
  int monomial_parity(const MultiIndex& mi) const {
    int p = 0;
    for (int i = 0; i < n; ++i)
      if (odd[std::size_t(i)]) p += mi.e[i];
    return (p % 2 == 0) ? 1 : -1;
  }
};

/// Largest coefficient sitting on an odd monomial; 0 for an even jet.
inline double jet_mask_violation(const Jet& f, const SymmetryMask& mask) {
  double worst = 0.0;
  for (int i = 0; i < f.size(); ++i)
    if (mask.monomial_parity(f.table().at(i)) < 0)
      worst = std::max(worst, std::fabs(f[i]));
  return worst;
}

inline bool jet_respects(const Jet& f, const SymmetryMask& mask, double tol = 0.0) {
  return jet_mask_violation(f, mask) <= tol;
}

/// A polynomial change of coordinates at jet level: component i is the i-th
/// *old* coordinate written as a jet in the new coordinates.
using JetMap = std::vector<Jet>;

inline JetMap jet_map_identity(int n, int order) {
  JetMap m;
  for (int i = 0; i < n; ++i) m.push_back(Jet::variable(n, order, i));
  return m;
}

/// (a after b): the map sending new coords through b, then through a.
inline JetMap jet_map_compose(const JetMap& a, const JetMap& b) {
  JetMap r;
  r.reserve(a.size());
  for (const Jet& comp : a) r.push_back(jet_compose(comp, b));
  return r;
}

/// Inverse of a jet map with invertible linear part, by fixed-point iteration.
inline JetMap jet_map_invert(const JetMap& s) {
  int n = int(s.size());
  int order = s[0].order();
  Mat lin(n);
  for (int i = 0; i < n; ++i) {
    const Jet& si = s[std::size_t(i)];
    if (si.value() != 0.0) throw domain_error("jet_map_invert: map must fix the origin");
    MultiIndex m;
    m.n = n;
    for (int j = 0; j < n; ++j) {
      m.e[j] = 1;
      lin(i, j) = si.coeff(m);
      m.e[j] = 0;
    }
  }
  Mat linv = Lu(lin).inverse();

  // h = nonlinear part of s
  JetMap h;
  for (int i = 0; i < n; ++i) {
    Jet hi = s[std::size_t(i)];
    for (int k = 0; k < hi.size(); ++k)
      if (hi.table().at(k).degree() <= 1) hi.raw(k) = 0.0;
    h.push_back(hi);
  }

  auto apply_linv = [&](const JetMap& rhs) {
    JetMap out;
    for (int i = 0; i < n; ++i) {
      Jet acc(n, order);
      for (int j = 0; j < n; ++j)
        if (linv(i, j) != 0.0) acc += rhs[std::size_t(j)] * linv(i, j);
      out.push_back(acc);
    }
    return out;
  };

  JetMap id = jet_map_identity(n, order);
  JetMap t = apply_linv(id);
  for (int it = 0; it < order; ++it) {
    JetMap rhs;
    for (int j = 0; j < n; ++j) rhs.push_back(id[std::size_t(j)] - jet_compose(h[std::size_t(j)], t));
    t = apply_linv(rhs);
  }
  return t;
}

}  // namespace morsetrack
