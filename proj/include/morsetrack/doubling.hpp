#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "morsetrack/bump.hpp"
#include "morsetrack/critical_points.hpp"
#include "morsetrack/expression.hpp"
#include "morsetrack/field.hpp"

namespace morsetrack {

// ---------------------------------------------------------------------------
// Jet reflection x -> -x  (exact: flips signs of odd-in-x coefficients)
// ---------------------------------------------------------------------------

inline Jet jet_reflect_x(Jet f) {
  const MultiIndexTable& table = MultiIndexTable::get(f.n(), f.order());
  for (int i = 0; i < table.size(); ++i)
    if (table.at(i).e[0] % 2 == 1) f.raw(i) = -f.raw(i);
  return f;
}

// ---------------------------------------------------------------------------
// Hadamard split  F(z,x) = F(z,0) + x G(z,x)
// ---------------------------------------------------------------------------

struct CollarSplit {
  ScalarField boundary_value;   // z -> F(z, 0)
  ScalarField hadamard_factor;  // G
};

namespace detail {

/// Nodes and weights of Gauss-Legendre quadrature on [0,1], computed on first
/// use by Newton iteration on the Legendre polynomial.
inline const std::vector<std::pair<double, double>>& gauss_legendre_01(int m) {
  static std::map<int, std::vector<std::pair<double, double>>> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(m);
  if (it != cache.end()) return it->second;

  std::vector<std::pair<double, double>> out;
  for (int i = 1; i <= m; ++i) {
    double x = std::cos(M_PI * (i - 0.25) / (m + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      // evaluate P_m and P'_m by the three-term recurrence
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= m; ++k) {
        double p2 = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = m * (x * p1 - p0) / (x * x - 1.0);
      double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    double w = 2.0 / ((1.0 - x * x) * dp * dp);
    out.emplace_back((x + 1.0) / 2.0, w / 2.0);  // map [-1,1] -> [0,1]
  }
  std::sort(out.begin(), out.end());
  return cache.emplace(m, std::move(out)).first->second;
}

inline ExprPtr sparse_to_expr(const SparsePoly& p) {
  ExprPtr sum = nullptr;
  for (const auto& [mono, v] : p.c) {
    ExprPtr term = make_number(v);
    for (int i = 0; i < p.n; ++i) {
      int e = mono[std::size_t(i)];
      if (e == 0) continue;
      ExprPtr var = make_var(i);
      term = make_binary(ExprNode::Kind::Mul, term, e == 1 ? var : make_pow(var, e));
    }
    sum = sum ? make_binary(ExprNode::Kind::Add, sum, term) : term;
  }
  return sum ? sum : make_number(0.0);
}

}  // namespace detail

/// Split a collar field by the Hadamard lemma.  Polynomial fields are divided
/// exactly; everything else integrates dF/dx along rays with Gauss-Legendre
/// quadrature in the given number of nodes.
inline CollarSplit hadamard_split(const ScalarField& f, int quadrature_nodes = 16) {
  const int n = f.dimension();
  ExprPtr f0 = substitute_var(f.expr(), 0, make_number(0.0));

  if (auto poly = try_expand_polynomial(f.expr(), n, f.params())) {
    SparsePoly g;
    g.n = n;
    for (const auto& [mono, v] : poly->c) {
      if (mono[0] == 0) continue;  // belongs to F(z,0)
      auto shifted = mono;
      shifted[0] -= 1;
      g.c[shifted] = v;
    }
    return CollarSplit{ScalarField(f0, n, f.params()),
                       ScalarField(detail::sparse_to_expr(g), n, {})};
  }

  if (quadrature_nodes < 2 || quadrature_nodes > 64)
    throw domain_error("hadamard_split: quadrature node count out of range");
  ExprPtr dfdx = diff_var(f.expr(), 0);
  ExprPtr sum = nullptr;
  for (const auto& [node, weight] : detail::gauss_legendre_01(quadrature_nodes)) {
    ExprPtr scaled_x = make_binary(ExprNode::Kind::Mul, make_number(node), make_var(0));
    ExprPtr term = make_binary(ExprNode::Kind::Mul, make_number(weight),
                               substitute_var(dfdx, 0, scaled_x));
    sum = sum ? make_binary(ExprNode::Kind::Add, sum, term) : term;
  }
  return CollarSplit{ScalarField(f0, n, f.params()), ScalarField(sum, n, f.params())};
}

// ---------------------------------------------------------------------------
// The doubling construction
// ---------------------------------------------------------------------------

struct BumpSpec {
  double epsilon = 0.5;      // collar width: the field is untouched for x >= eps/2
  double flag_radius = 0.25; // protected radius r around each boundary critical point
                             // (the cutoff's transition lives between r and 2r)
  double c_eta = 0.0;        // filled by build_double: |D eta| < c_eta / epsilon

  /// Normal cutoff profile: identically 1 on [0, eps/4], identically 0 from eps/2 on.
  double rho(double x) const { return collar_rho(x, epsilon); }
};

/// Equivariant double of a collar field.  Models the same interface as
/// ScalarField and is exactly even in x by construction: the value at (x, y)
/// is P(|x|, y) with P the modified collar field, and jets at x < 0 are the
/// reflections of jets at |x|.
class DoubledField {
 public:
  DoubledField(ScalarField base, BumpSpec bump, std::vector<std::vector<double>> flags,
               double homotopy = 1.0)
      : base_(std::move(base)),
        bump_(bump),
        flags_(std::move(flags)),
        s_(homotopy),
        f0_(substitute_var(base_.expr(), 0, make_number(0.0)), base_.dimension(), base_.params()),
        even_(make_even_part(base_), base_.dimension(), base_.params()),
        odd_(make_odd_part(base_), base_.dimension(), base_.params()) {}

  int dimension() const { return base_.dimension(); }
  const ScalarField& base() const { return base_; }
  const BumpSpec& bump() const { return bump_; }
  const std::vector<std::vector<double>>& flagged() const { return flags_; }
  double homotopy() const { return s_; }

  DoubledField with_homotopy(double s) const { return DoubledField(base_, bump_, flags_, s); }

  /// Boundary-factor cutoff: 0 within flag_radius of a protected point,
  /// 1 outside twice that radius.  `y` holds the n-1 tangential coordinates.
  double eta0(std::span<const double> y) const {
    double v = 1.0;
    for (const auto& c : flags_) {
      double s = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) s += (y[i] - c[i]) * (y[i] - c[i]);
      v *= 1.0 - bump_radial(s, bump_.flag_radius);
    }
    return v;
  }

  double value_at(std::span<const double> p) const {
    const int n = dimension();
    std::vector<double> q(p.begin(), p.end());
    q[0] = std::abs(q[0]);
    if (q[0] >= bump_.epsilon / 2.0) return base_.value_at(q);
    double rho = collar_rho(q[0], bump_.epsilon);
    double eta = eta0(std::span<const double>(q).subspan(1, std::size_t(n - 1)));
    return f0_.value_at(q) + (1.0 - s_ * eta * rho) * even_.value_at(q) +
           (1.0 - s_ * rho) * odd_.value_at(q);
  }

  Jet jet_at(std::span<const double> p, int order) const {
    const int n = dimension();
    std::vector<double> q(p.begin(), p.end());
    const bool flip = q[0] < 0.0;
    q[0] = std::abs(q[0]);

    Jet result = [&] {
      if (q[0] >= bump_.epsilon / 2.0) return base_.jet_at(q, order);
      Jet xj = Jet::variable(n, order, 0, q[0]);
      Jet rho = collar_rho_of(xj, bump_.epsilon);
      Jet eta0 = eta0_jet(q, order);
      Jet one = Jet::constant(n, order, 1.0);
      Jet a = one - (eta0 * rho) * s_;
      Jet b = one - rho * s_;
      return f0_.jet_at(q, order) + a * even_.jet_at(q, order) + b * odd_.jet_at(q, order);
    }();
    return flip ? jet_reflect_x(result) : result;
  }

 private:
  static ExprPtr make_even_part(const ScalarField& f) {
    // even part of x*G = (F(x,y) + F(-x,y))/2 - F(z,0)
    ExprPtr mirrored = substitute_var(f.expr(), 0, make_neg(make_var(0)));
    ExprPtr avg = make_binary(ExprNode::Kind::Mul, make_number(0.5),
                              make_binary(ExprNode::Kind::Add, f.expr(), mirrored));
    return make_binary(ExprNode::Kind::Sub, avg,
                       substitute_var(f.expr(), 0, make_number(0.0)));
  }

  static ExprPtr make_odd_part(const ScalarField& f) {
    // odd part of x*G = (F(x,y) - F(-x,y))/2
    ExprPtr mirrored = substitute_var(f.expr(), 0, make_neg(make_var(0)));
    return make_binary(ExprNode::Kind::Mul, make_number(0.5),
                       make_binary(ExprNode::Kind::Sub, f.expr(), mirrored));
  }

  Jet eta0_jet(std::span<const double> q, int order) const {
    const int n = dimension();
    Jet v = Jet::constant(n, order, 1.0);
    for (const auto& c : flags_) {
      Jet s = Jet::constant(n, order, 0.0);
      for (int i = 1; i < n; ++i) {
        Jet d = Jet::variable(n, order, i, q[std::size_t(i)]) - c[std::size_t(i - 1)];
        s = s + d * d;
      }
      v = v * (Jet::constant(n, order, 1.0) - bump_radial_of(s, bump_.flag_radius));
    }
    return v;
  }

  ScalarField base_;
  BumpSpec bump_;
  std::vector<std::vector<double>> flags_;  // tangential coordinates, size n-1 each
  double s_;
  ScalarField f0_, even_, odd_;
};

static_assert(FieldLike<DoubledField>);

// ---------------------------------------------------------------------------
// build_double: validate preconditions, then assemble the DoubledField
// ---------------------------------------------------------------------------

/// Construct the equivariant double of a boundary Morse collar field.
/// `crit_boundary` lists the boundary critical points to protect (full n-dim
/// coordinates with x = 0, as returned by the solver).  `scan_box` bounds the
/// tangential region for the interior-critical-point scan; when omitted it is
/// inferred from the flagged points padded by one unit.
inline DoubledField build_double(const ScalarField& f,
                                 const std::vector<std::vector<double>>& crit_boundary,
                                 BumpSpec bump, const Box* scan_box = nullptr) {
  const int n = f.dimension();
  if (bump.epsilon <= 0 || bump.flag_radius <= 0)
    throw validation_error("build_double: bump parameters must be positive");

  // normalize flags to tangential coordinates and verify they are boundary
  // critical points satisfying the full-differential condition
  std::vector<std::vector<double>> flags;
  for (const auto& p : crit_boundary) {
    std::vector<double> full(std::size_t(n), 0.0);
    if (int(p.size()) == n) {
      if (std::abs(p[0]) > 1e-8)
        throw validation_error("build_double: flagged point does not lie on the boundary");
      full = p;
      full[0] = 0.0;
    } else if (int(p.size()) == n - 1) {
      for (int i = 1; i < n; ++i) full[std::size_t(i)] = p[std::size_t(i - 1)];
    } else {
      throw validation_error("build_double: flagged point has the wrong dimension");
    }
    Jet j = f.jet_at(full, 1);
    auto g = j.gradient();
    double scale = std::max(1.0, j.max_abs_coeff());
    double tangential = 0.0;
    for (int i = 1; i < n; ++i) tangential += g[std::size_t(i)] * g[std::size_t(i)];
    if (std::sqrt(tangential) > 1e-6 * scale)
      throw validation_error("build_double: flagged point is not critical for the restriction");
    if (std::abs(g[0]) > 1e-6 * scale)
      throw validation_error(
          "build_double: normal derivative does not vanish at a flagged point "
          "(the collar field is not boundary Morse there)");
    flags.push_back(std::vector<double>(full.begin() + 1, full.end()));
  }

  // protected neighborhoods must not overlap (the eta0 factors must have
  // disjoint supports of radius 2r)
  for (std::size_t a = 0; a < flags.size(); ++a)
    for (std::size_t b = a + 1; b < flags.size(); ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < flags[a].size(); ++i)
        s += (flags[a][i] - flags[b][i]) * (flags[a][i] - flags[b][i]);
      if (std::sqrt(s) < 4.0 * bump.flag_radius)
        throw validation_error(
            "build_double: protected neighborhoods overlap; reduce flag_radius");
    }

  // the collar must contain no interior critical points of F
  Box scan;
  if (scan_box) {
    scan = *scan_box;
  } else {
    scan.min.assign(std::size_t(n), -3.0);
    scan.max.assign(std::size_t(n), 3.0);
    for (const auto& c : flags)
      for (std::size_t i = 0; i < c.size(); ++i) {
        scan.min[i + 1] = std::min(scan.min[i + 1], c[i] - 1.0);
        scan.max[i + 1] = std::max(scan.max[i + 1], c[i] + 1.0);
      }
  }
  scan.min[0] = 0.0;
  scan.max[0] = bump.epsilon;
  SolverConfig plain;
  plain.equivariant = false;
  plain.verify_equivariance = false;
  for (const auto& cp : find_all_critical_points(f, scan, 12, plain))
    if (cp.kind == PointKind::InteriorOrbit && cp.location[0] > 1e-6 &&
        cp.location[0] < bump.epsilon)
      throw validation_error(
          "build_double: the collar contains an interior critical point; choose a smaller "
          "epsilon");

  // derivative constant: |D(eta0 rho)| <= hypot(sup|grad eta0|, sup|rho'|) pointwise,
  // with sup|rho'| = 4 sup|step'| / eps.  The flag cutoffs have disjoint supports, so
  // sup|grad eta0| is the single radial-factor bound |bump'(r^2 t^2)| * 2rt over the
  // transition zone t in [1, 2].
  double step_sup = smooth_step_derivative_sup();
  double eta0_grad_sup = 0.0;
  if (!flags.empty()) {
    for (int k = 0; k <= 200; ++k) {
      double radius = bump.flag_radius * (1.0 + k / 200.0);
      Jet sj = Jet::variable(1, 1, 0, radius * radius);
      Jet b = bump_radial_of(sj, bump.flag_radius);
      MultiIndex m;
      m.n = 1;
      m.e[0] = 1;
      eta0_grad_sup = std::max(eta0_grad_sup, std::abs(b.derivative(m)) * 2.0 * radius);
    }
  }
  bump.c_eta = std::hypot(bump.epsilon * eta0_grad_sup, 4.0 * step_sup);

  return DoubledField(f, bump, flags, 1.0);
}

}  // namespace morsetrack
