#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "morsetrack/critical_points.hpp"
#include "morsetrack/jet.hpp"
#include "morsetrack/linalg.hpp"

namespace morsetrack {

// ---------------------------------------------------------------------------
// Stratum labels
// ---------------------------------------------------------------------------

enum class StratumTag { F0Interior, F0Boundary, F1_1, F1_21, F1_22, CodimGe2 };

enum class CodimReason {
  None,
  KernelDimGt1,
  CubicVanishes,
  BFormDegenerate,
  MultipleDegenerateOrbits,  // census-level: two degenerate orbits at one parameter
};

struct StratumLabel {
  StratumTag tag = StratumTag::CodimGe2;
  CodimReason reason = CodimReason::None;

  bool operator==(const StratumLabel&) const = default;
};

inline const char* stratum_name(StratumTag t) {
  switch (t) {
    case StratumTag::F0Interior: return "interior-nondegenerate";
    case StratumTag::F0Boundary: return "boundary-nondegenerate";
    case StratumTag::F1_1: return "interior-fold";
    case StratumTag::F1_21: return "boundary-fold";
    case StratumTag::F1_22: return "collision";
    case StratumTag::CodimGe2: return "codim-ge-2";
  }
  return "?";
}

inline const char* codim_reason_name(CodimReason r) {
  switch (r) {
    case CodimReason::None: return "none";
    case CodimReason::KernelDimGt1: return "kernel-dim>1";
    case CodimReason::CubicVanishes: return "cubic-vanishes";
    case CodimReason::BFormDegenerate: return "bform-degenerate";
    case CodimReason::MultipleDegenerateOrbits: return "multiple-degenerate-orbits";
  }
  return "?";
}

struct StrataConfig {
  double eig_tol = 1e-7;       // relative kernel detection threshold
  double third_tol = 1e-7;     // cubic nondegeneracy threshold
  double det_tol = 1e-9;       // quasi-homogeneous form determinant threshold
  double parity_tol = 1e-12;   // largest tolerated odd-in-x coefficient (relative)
};

// ---------------------------------------------------------------------------
// Kernel analysis at a degenerate critical point
// ---------------------------------------------------------------------------

enum class TauType { Tangent, Normal, NotApplicable };

struct KernelInfo {
  int dim = 0;
  std::vector<double> v;  // unit kernel vector when dim == 1, largest entry positive
  TauType tau_type = TauType::NotApplicable;
};

template <FieldLike F>
KernelInfo kernel_analysis(const F& f, const CriticalPoint& p, const StrataConfig& cfg = {}) {
  const int n = f.dimension();
  Jet j = f.jet_at(p.location, 2);
  Mat h = j.hessian();

  KernelInfo out;
  if (p.kind == PointKind::InteriorOrbit) {
    EigenSym es = jacobi_eigen(h);
    double spectral = 0.0;
    for (double v : es.values) spectral = std::max(spectral, std::abs(v));
    double floor = cfg.eig_tol * std::max(1.0, spectral);
    int best = 0;
    for (int i = 0; i < n; ++i) {
      if (std::abs(es.values[std::size_t(i)]) < floor) ++out.dim;
      if (std::abs(es.values[std::size_t(i)]) < std::abs(es.values[std::size_t(best)])) best = i;
    }
    if (out.dim == 1) {
      out.v.resize(std::size_t(n));
      for (int i = 0; i < n; ++i) out.v[std::size_t(i)] = es.vectors(i, best);
    }
    return out;
  }

  // boundary point: the Hessian splits into the tangential block A and the
  // normal scalar B, and a one-dimensional kernel lies in exactly one of them
  double b = h(0, 0);
  EigenSym ta;
  double spectral = std::abs(b);
  if (n > 1) {
    Mat a(n - 1);
    for (int i = 1; i < n; ++i)
      for (int k = 1; k < n; ++k) a(i - 1, k - 1) = h(i, k);
    ta = jacobi_eigen(a);
    for (double v : ta.values) spectral = std::max(spectral, std::abs(v));
  }
  double floor = cfg.eig_tol * std::max(1.0, spectral);

  int dim_a = 0, best = 0;
  for (int i = 0; i + 1 < n; ++i) {
    if (std::abs(ta.values[std::size_t(i)]) < floor) ++dim_a;
    if (std::abs(ta.values[std::size_t(i)]) < std::abs(ta.values[std::size_t(best)])) best = i;
  }
  bool b_singular = std::abs(b) < floor;
  out.dim = dim_a + (b_singular ? 1 : 0);
  if (out.dim != 1) return out;

  out.v.assign(std::size_t(n), 0.0);
  if (b_singular) {
    out.tau_type = TauType::Normal;
    out.v[0] = 1.0;
  } else {
    out.tau_type = TauType::Tangent;
    for (int i = 1; i < n; ++i) out.v[std::size_t(i)] = ta.vectors(i - 1, best);
  }
  return out;
}

// ---------------------------------------------------------------------------
// The quasi-homogeneous quadratic form at a normal-kernel boundary point
// ---------------------------------------------------------------------------

/// Data of the weighted quadratic form B(a, b) = alpha a^2 + sum alpha_i a b_i
/// + sum alpha_ij b_i b_j attached to a boundary point whose normal block
/// degenerates (a stands for x^2, b for the tangential displacement).  `gamma`
/// is the symmetric matrix of the weighted-least-degree part of the Taylor
/// expansion, scaled so its tangential block equals the raw tangential
/// Hessian: gamma = [[A, alpha_i/2], [alpha_i/2, alpha/12]], with the x^2 slot
/// last.  This scaling makes the congruence law det(gamma~) = det(E)^2
/// det(gamma) exact for weighted changes of coordinates.
struct BFormMatrix {
  double alpha = 0.0;            // d^4 Phi / dx^4
  std::vector<double> alpha_i;   // d^3 Phi / dx^2 dy_i
  Mat alpha_ij{1};               // tangential Hessian d^2 Phi / dy_i dy_j
  Mat gamma{1};                  // n x n, tangential slots first, x^2 slot last
  double det = 0.0;
};

template <FieldLike F>
BFormMatrix compute_bform(const F& f, const CriticalPoint& p) {
  const int n = f.dimension();
  if (p.kind != PointKind::Boundary)
    throw domain_error("compute_bform: the point must lie on the boundary");
  Jet j = f.jet_at(p.location, 4);

  BFormMatrix out;
  MultiIndex m;
  m.n = n;
  m.e[0] = 4;
  out.alpha = j.derivative(m);

  out.alpha_i.assign(std::size_t(n - 1), 0.0);
  for (int i = 1; i < n; ++i) {
    MultiIndex mi;
    mi.n = n;
    mi.e[0] = 2;
    mi.e[i] = 1;
    out.alpha_i[std::size_t(i - 1)] = j.derivative(mi);
  }

  out.alpha_ij = Mat(std::max(1, n - 1));
  Mat h = j.hessian();
  for (int i = 1; i < n; ++i)
    for (int k = 1; k < n; ++k) out.alpha_ij(i - 1, k - 1) = h(i, k);

  out.gamma = Mat(n);
  for (int i = 1; i < n; ++i) {
    for (int k = 1; k < n; ++k) out.gamma(i - 1, k - 1) = h(i, k);
    out.gamma(i - 1, n - 1) = out.gamma(n - 1, i - 1) = out.alpha_i[std::size_t(i - 1)] / 2.0;
  }
  out.gamma(n - 1, n - 1) = out.alpha / 12.0;
  out.det = mat_det(out.gamma);
  return out;
}

// ---------------------------------------------------------------------------
// Stratum classification
// ---------------------------------------------------------------------------

template <FieldLike F>
StratumLabel classify_stratum(const F& f, const CriticalPoint& p, const StrataConfig& cfg = {}) {
  if (!p.degenerate)
    return {p.kind == PointKind::Boundary ? StratumTag::F0Boundary : StratumTag::F0Interior,
            CodimReason::None};

  KernelInfo k = kernel_analysis(f, p, cfg);
  if (k.dim > 1) return {StratumTag::CodimGe2, CodimReason::KernelDimGt1};
  if (k.dim == 0)
    // tolerance disagreement with the caller's degeneracy flag: report the
    // nondegenerate tag rather than invent a stratum
    return {p.kind == PointKind::Boundary ? StratumTag::F0Boundary : StratumTag::F0Interior,
            CodimReason::None};

  if (k.tau_type == TauType::Normal) {
    BFormMatrix bf = compute_bform(f, p);
    double entry_scale = 0.0;
    for (double v : bf.gamma.a) entry_scale = std::max(entry_scale, std::abs(v));
    double det_floor = cfg.det_tol * std::pow(std::max(1.0, entry_scale), f.dimension());
    if (std::abs(bf.det) > det_floor) return {StratumTag::F1_22, CodimReason::None};
    return {StratumTag::CodimGe2, CodimReason::BFormDegenerate};
  }

  Jet j3 = f.jet_at(p.location, 3);
  double cubic = j3.cubic_along(k.v);
  double cubic_floor = cfg.third_tol * std::max(1.0, j3.max_abs_coeff());
  if (std::abs(cubic) <= cubic_floor) return {StratumTag::CodimGe2, CodimReason::CubicVanishes};
  return {p.kind == PointKind::Boundary ? StratumTag::F1_21 : StratumTag::F1_1,
          CodimReason::None};
}

// ---------------------------------------------------------------------------
// Normal form reduction
// ---------------------------------------------------------------------------

struct NormalFormSignature {
  std::vector<int> eps;     // signs of the nondegenerate quadratic directions
  int degenerate_sign = 0;  // epsilon of the degenerate direction (w^3 or x^4)
  bool quartic = false;     // true for the x^4 normal form
  double residual = 0.0;    // max |coefficient| gap to the exact normal form
  JetMap forward;           // old coordinates as jets in the reduced ones
  JetMap inverse;           // reduced coordinates as jets in the old ones
};

namespace detail {

/// Hard-zero every coefficient sitting on an odd monomial.  The reductions
/// only ever compose parity-pure maps, so nonzero odd entries are rounding
/// dust; zeroing them keeps equivariance exact.
inline void enforce_mask(Jet& g, const SymmetryMask& mask, double tol) {
  double scale = std::max(1.0, g.max_abs_coeff());
  if (jet_mask_violation(g, mask) > tol * scale)
    throw domain_error("normal form reduction: input jet is not equivariant");
  for (int i = 0; i < g.size(); ++i)
    if (mask.monomial_parity(g.table().at(i)) < 0) g.raw(i) = 0.0;
}

inline bool mask_active(const SymmetryMask& mask) {
  for (int i = 0; i < mask.n; ++i)
    if (mask.odd[std::size_t(i)]) return true;
  return false;
}

/// Remove, degree by degree, every monomial that is not a pure power of the
/// degenerate slot, using quadratic-completion shifts along the nondegenerate
/// slots.  Returns the fully cleaned jet and accumulates the coordinate change
/// into `total`.
inline Jet kill_mixed_terms(Jet g, int degenerate_slot, const std::vector<double>& c,
                            JetMap& total, const SymmetryMask* mask, double parity_tol) {
  const int n = g.n();
  const int order = g.order();
  for (int d = 3; d <= order; ++d) {
    std::vector<Jet> shift;
    bool any = false;
    for (int i = 0; i < n; ++i) shift.push_back(Jet(n, order));
    for (int idx = 0; idx < g.size(); ++idx) {
      const MultiIndex& m = g.table().at(idx);
      if (m.degree() != d || g[idx] == 0.0) continue;
      int target = -1;
      for (int i = 0; i < n; ++i)
        if (i != degenerate_slot && m.e[i] > 0) {
          target = i;
          break;
        }
      if (target < 0) continue;  // pure power of the degenerate slot: kept
      MultiIndex rest = m;
      rest.e[target] = std::uint8_t(rest.e[target] - 1);
      int ridx = g.table().index_of(rest);
      shift[std::size_t(target)].raw(ridx) -= g[idx] / (2.0 * c[std::size_t(target)]);
      any = true;
    }
    if (!any) continue;
    JetMap step;
    for (int i = 0; i < n; ++i) step.push_back(Jet::variable(n, order, i) + shift[std::size_t(i)]);
    g = jet_compose(g, step);
    if (mask) enforce_mask(g, *mask, parity_tol);
    total = jet_map_compose(total, step);
  }
  return g;
}

inline double normal_form_residual(const Jet& g, const std::vector<int>& slots_nondeg,
                                   const std::vector<int>& eps, int degenerate_slot,
                                   int degenerate_power, int degenerate_sign) {
  double worst = 0.0;
  for (int idx = 0; idx < g.size(); ++idx) {
    const MultiIndex& m = g.table().at(idx);
    double expect = 0.0;
    for (std::size_t k = 0; k < slots_nondeg.size(); ++k) {
      MultiIndex sq;
      sq.n = m.n;
      sq.e[slots_nondeg[k]] = 2;
      if (m == sq) expect = double(eps[k]);
    }
    MultiIndex dg;
    dg.n = m.n;
    dg.e[degenerate_slot] = std::uint8_t(degenerate_power);
    if (m == dg) expect = double(degenerate_sign);
    worst = std::max(worst, std::abs(g[idx] - expect));
  }
  return worst;
}

}  // namespace detail

/// Reduce the jet of a cubic-degenerate critical point (interior fold or
/// boundary fold) to the form sum_i eps_i w_i^2 + eps w_d^3.  The jet must be
/// taken at the critical point itself.  With an active mask (boundary case)
/// the change of coordinates never mixes x with the tangential variables and
/// never produces a monomial odd in x.
inline NormalFormSignature reduce_normal_form_cubic(const Jet& input, const SymmetryMask& mask,
                                                    const StrataConfig& cfg = {}) {
  const int n = input.n();
  const int order = input.order();
  if (order < 3) throw domain_error("reduce_normal_form_cubic: jet order must be at least 3");
  const bool boundary = detail::mask_active(mask);

  Jet g = input;
  {
    double scale = std::max(1.0, g.max_abs_coeff());
    auto grad = g.gradient();
    for (int i = boundary ? 1 : 0; i < n; ++i)
      if (std::abs(grad[std::size_t(i)]) > 1e-6 * scale)
        throw domain_error("reduce_normal_form_cubic: jet is not based at a critical point");
    g.raw(0) = 0.0;
    for (int i = 0; i < g.size(); ++i)
      if (g.table().at(i).degree() == 1) g.raw(i) = 0.0;
  }
  if (boundary) detail::enforce_mask(g, mask, cfg.parity_tol);

  // step 1: orthogonal diagonalization with the kernel direction last; at
  // boundary points x is kept fixed and only the tangential block rotates
  Mat h = g.hessian();
  Mat basis = Mat::identity(n);
  int degenerate_slot = -1;
  if (boundary) {
    if (n > 1) {
      Mat a(n - 1);
      for (int i = 1; i < n; ++i)
        for (int k = 1; k < n; ++k) a(i - 1, k - 1) = h(i, k);
      EigenSym es = jacobi_eigen(a);
      int kernel = 0;
      for (int i = 0; i < n - 1; ++i)
        if (std::abs(es.values[std::size_t(i)]) < std::abs(es.values[std::size_t(kernel)]))
          kernel = i;
      std::vector<int> cols;
      for (int i = 0; i < n - 1; ++i)
        if (i != kernel) cols.push_back(i);
      cols.push_back(kernel);
      for (int j = 0; j < n - 1; ++j)
        for (int i = 0; i < n - 1; ++i) basis(i + 1, j + 1) = es.vectors(i, cols[std::size_t(j)]);
      degenerate_slot = n - 1;
    } else {
      throw domain_error("reduce_normal_form_cubic: boundary case needs a tangential direction");
    }
  } else {
    EigenSym es = jacobi_eigen(h);
    int kernel = 0;
    for (int i = 0; i < n; ++i)
      if (std::abs(es.values[std::size_t(i)]) < std::abs(es.values[std::size_t(kernel)]))
        kernel = i;
    std::vector<int> cols;
    for (int i = 0; i < n; ++i)
      if (i != kernel) cols.push_back(i);
    cols.push_back(kernel);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) basis(i, j) = es.vectors(i, cols[std::size_t(j)]);
    degenerate_slot = n - 1;
  }

  JetMap total;
  for (int i = 0; i < n; ++i) {
    Jet li(n, order);
    for (int j = 0; j < n; ++j) {
      if (basis(i, j) == 0.0) continue;
      li += Jet::variable(n, order, j) * basis(i, j);
    }
    total.push_back(li);
  }
  g = jet_compose(g, total);
  if (boundary) detail::enforce_mask(g, mask, cfg.parity_tol);

  // step 2/3: eliminate every mixed monomial by completion shifts
  std::vector<double> c(std::size_t(n), 0.0);
  std::vector<int> nondeg;
  for (int i = 0; i < n; ++i) {
    MultiIndex sq;
    sq.n = n;
    sq.e[i] = 2;
    c[std::size_t(i)] = g.coeff(sq);
    if (i != degenerate_slot) nondeg.push_back(i);
  }
  for (int i : nondeg)
    if (c[std::size_t(i)] == 0.0)
      throw domain_error("reduce_normal_form_cubic: vanishing pivot in a nondegenerate direction");
  g = detail::kill_mixed_terms(std::move(g), degenerate_slot, c, total,
                               boundary ? &mask : nullptr, cfg.parity_tol);

  // step 4: strip the quartic tail of the degenerate direction, then rescale
  MultiIndex md3, md4;
  md3.n = md4.n = n;
  md3.e[degenerate_slot] = 3;
  md4.e[degenerate_slot] = 4;
  double t3 = g.coeff(md3);
  if (std::abs(t3) <= cfg.third_tol * std::max(1.0, input.max_abs_coeff()))
    throw domain_error("reduce_normal_form_cubic: cubic coefficient vanishes (wrong stratum)");
  if (order >= 4) {
    double t4 = g.coeff(md4);
    if (t4 != 0.0) {
      JetMap step = jet_map_identity(n, order);
      Jet wd = Jet::variable(n, order, degenerate_slot);
      step[std::size_t(degenerate_slot)] = wd + (wd * wd) * (-t4 / (3.0 * t3));
      g = jet_compose(g, step);
      if (boundary) detail::enforce_mask(g, mask, cfg.parity_tol);
      total = jet_map_compose(total, step);
    }
  }

  NormalFormSignature sig;
  {
    JetMap step = jet_map_identity(n, order);
    for (int i : nondeg) {
      step[std::size_t(i)] =
          Jet::variable(n, order, i) * std::pow(std::abs(c[std::size_t(i)]), -0.5);
      sig.eps.push_back(c[std::size_t(i)] > 0 ? 1 : -1);
    }
    step[std::size_t(degenerate_slot)] =
        Jet::variable(n, order, degenerate_slot) * std::pow(std::abs(t3), -1.0 / 3.0);
    sig.degenerate_sign = t3 > 0 ? 1 : -1;
    g = jet_compose(g, step);
    if (boundary) detail::enforce_mask(g, mask, cfg.parity_tol);
    total = jet_map_compose(total, step);
  }

  sig.quartic = false;
  sig.residual = detail::normal_form_residual(g, nondeg, sig.eps, degenerate_slot, 3,
                                              sig.degenerate_sign);
  sig.forward = total;
  sig.inverse = jet_map_invert(total);
  return sig;
}

/// Reduce the jet of a normal-kernel boundary degeneracy to the form
/// sum_i eps_i w_i^2 + eps_x x^4.  The mask must mark x odd; the input jet
/// must have order 4 and be based at the critical point.
inline NormalFormSignature reduce_normal_form_quartic(const Jet& input, const SymmetryMask& mask,
                                                      const StrataConfig& cfg = {}) {
  const int n = input.n();
  const int order = input.order();
  if (order < 4) throw domain_error("reduce_normal_form_quartic: jet order must be at least 4");
  if (!detail::mask_active(mask))
    throw domain_error("reduce_normal_form_quartic: the normal direction must be marked odd");

  Jet g = input;
  {
    double scale = std::max(1.0, g.max_abs_coeff());
    auto grad = g.gradient();
    for (int i = 1; i < n; ++i)
      if (std::abs(grad[std::size_t(i)]) > 1e-6 * scale)
        throw domain_error("reduce_normal_form_quartic: jet is not based at a critical point");
    g.raw(0) = 0.0;
    for (int i = 0; i < g.size(); ++i)
      if (g.table().at(i).degree() == 1) g.raw(i) = 0.0;
  }
  detail::enforce_mask(g, mask, cfg.parity_tol);

  // diagonalize the tangential Hessian; x stays put as the degenerate slot
  Mat h = g.hessian();
  Mat basis = Mat::identity(n);
  if (n > 1) {
    Mat a(n - 1);
    for (int i = 1; i < n; ++i)
      for (int k = 1; k < n; ++k) a(i - 1, k - 1) = h(i, k);
    EigenSym es = jacobi_eigen(a);
    for (int j = 0; j < n - 1; ++j)
      for (int i = 0; i < n - 1; ++i) basis(i + 1, j + 1) = es.vectors(i, j);
  }

  JetMap total;
  for (int i = 0; i < n; ++i) {
    Jet li(n, order);
    for (int j = 0; j < n; ++j) {
      if (basis(i, j) == 0.0) continue;
      li += Jet::variable(n, order, j) * basis(i, j);
    }
    total.push_back(li);
  }
  g = jet_compose(g, total);
  detail::enforce_mask(g, mask, cfg.parity_tol);

  std::vector<double> c(std::size_t(n), 0.0);
  std::vector<int> nondeg;
  for (int i = 1; i < n; ++i) {
    MultiIndex sq;
    sq.n = n;
    sq.e[i] = 2;
    c[std::size_t(i)] = g.coeff(sq);
    nondeg.push_back(i);
    if (c[std::size_t(i)] == 0.0)
      throw domain_error(
          "reduce_normal_form_quartic: vanishing pivot in a nondegenerate direction");
  }
  g = detail::kill_mixed_terms(std::move(g), 0, c, total, &mask, cfg.parity_tol);

  // the odd part of the x-tail vanishes by equivariance (enforced above);
  // the quartic coefficient must survive, or the B-form verdict was wrong
  MultiIndex mx3, mx4;
  mx3.n = mx4.n = n;
  mx3.e[0] = 3;
  mx4.e[0] = 4;
  if (g.coeff(mx3) != 0.0)
    throw domain_error("reduce_normal_form_quartic: odd x-tail survived the reduction");
  double t4 = g.coeff(mx4);
  if (std::abs(t4) <= cfg.det_tol * std::max(1.0, input.max_abs_coeff()))
    throw domain_error(
        "reduce_normal_form_quartic: quartic coefficient vanishes (wrong stratum)");

  NormalFormSignature sig;
  sig.quartic = true;
  {
    JetMap step = jet_map_identity(n, order);
    for (int i : nondeg) {
      step[std::size_t(i)] =
          Jet::variable(n, order, i) * std::pow(std::abs(c[std::size_t(i)]), -0.5);
      sig.eps.push_back(c[std::size_t(i)] > 0 ? 1 : -1);
    }
    step[0] = Jet::variable(n, order, 0) * std::pow(std::abs(t4), -0.25);
    sig.degenerate_sign = t4 > 0 ? 1 : -1;
    g = jet_compose(g, step);
    detail::enforce_mask(g, mask, cfg.parity_tol);
    total = jet_map_compose(total, step);
  }

  sig.residual = detail::normal_form_residual(g, nondeg, sig.eps, 0, 4, sig.degenerate_sign);
  sig.forward = total;
  sig.inverse = jet_map_invert(total);
  return sig;
}

/// The exact model jet of a signature: sum eps_i w_i^2 + eps w_d^3 (or x^4).
inline Jet normal_form_model(const NormalFormSignature& sig, int n, int order) {
  Jet g(n, order);
  int degenerate_slot = sig.quartic ? 0 : n - 1;
  int k = 0;
  for (int i = 0; i < n; ++i) {
    if (i == degenerate_slot) continue;
    MultiIndex sq;
    sq.n = n;
    sq.e[i] = 2;
    g.raw(g.table().index_of(sq)) = double(sig.eps[std::size_t(k++)]);
  }
  MultiIndex md;
  md.n = n;
  md.e[degenerate_slot] = std::uint8_t(sig.quartic ? 4 : 3);
  g.raw(g.table().index_of(md)) = double(sig.degenerate_sign);
  return g;
}

}  // namespace morsetrack
