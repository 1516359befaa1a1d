#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "morsetrack/field.hpp"
#include "morsetrack/jet.hpp"
#include "morsetrack/linalg.hpp"

namespace morsetrack {

// ---------------------------------------------------------------------------
// The field abstraction the solver machinery works against
// ---------------------------------------------------------------------------

template <class F>
concept FieldLike = requires(const F& f, std::span<const double> p, int order) {
  { f.dimension() } -> std::convertible_to<int>;
  { f.value_at(p) } -> std::convertible_to<double>;
  { f.jet_at(p, order) } -> std::same_as<Jet>;
};

struct Box {
  std::vector<double> min, max;

  int dimension() const { return int(min.size()); }

  bool contains(std::span<const double> p, double margin = 1e-6) const {
    for (std::size_t i = 0; i < min.size(); ++i)
      if (p[i] < min[i] - margin || p[i] > max[i] + margin) return false;
    return true;
  }

  double diameter() const {
    double s = 0.0;
    for (std::size_t i = 0; i < min.size(); ++i) s += (max[i] - min[i]) * (max[i] - min[i]);
    return std::sqrt(s);
  }
};

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

enum class PointKind { InteriorOrbit, Boundary };
enum class Stability { BoundaryStable, BoundaryUnstable, NotApplicable };

struct CriticalPoint {
  std::vector<double> location;  // boundary points carry x = 0 exactly
  PointKind kind = PointKind::InteriorOrbit;
  double value = 0.0;
  std::vector<double> hessian_eigs;  // full Hessian spectrum, ascending
  bool degenerate = false;
  int index = -1;           // negative-eigenvalue count of the full Hessian
  int boundary_index = -1;  // tangential-block index (boundary points only)
  Stability stability = Stability::NotApplicable;
  double normal_block = 0.0;  // d^2 Phi / dx^2 (boundary points only)
};

struct SolverConfig {
  double grad_tol = 1e-10;    // relative: convergence when |grad| < grad_tol * scale
  int max_iters = 40;
  double snap_tol = 1e-8;     // interior solutions closer than this to x=0 become boundary
  double dedup_radius = 1e-6;
  double eig_tol = 1e-7;      // relative degeneracy threshold on eigenvalues
  double block_assert_tol = 1e-10;  // mixed x/y Hessian entries at boundary points
  bool equivariant = true;    // fold orbits to x>0, use the block structure
  bool verify_equivariance = true;  // expression fields: reject non-equivariant input
};

// ---------------------------------------------------------------------------
// Seeding
// ---------------------------------------------------------------------------

inline std::vector<std::vector<double>> seed_grid(const Box& box, int density) {
  if (density < 2) throw domain_error("seed_grid: density must be at least 2");
  const int n = box.dimension();
  std::vector<std::vector<double>> axes;
  for (int i = 0; i < n; ++i) {
    std::vector<double> ticks;
    if (box.max[std::size_t(i)] == box.min[std::size_t(i)]) {
      ticks.push_back(box.min[std::size_t(i)]);
    } else {
      for (int k = 0; k < density; ++k)
        ticks.push_back(box.min[std::size_t(i)] +
                        (box.max[std::size_t(i)] - box.min[std::size_t(i)]) * k / (density - 1));
    }
    axes.push_back(std::move(ticks));
  }
  std::vector<std::vector<double>> seeds;
  std::vector<std::size_t> idx(std::size_t(n), 0);
  for (;;) {
    std::vector<double> p(std::size_t(n), 0.0);
    for (int i = 0; i < n; ++i) p[std::size_t(i)] = axes[std::size_t(i)][idx[std::size_t(i)]];
    seeds.push_back(std::move(p));
    int axis = n - 1;
    while (axis >= 0) {
      if (++idx[std::size_t(axis)] < axes[std::size_t(axis)].size()) break;
      idx[std::size_t(axis)] = 0;
      --axis;
    }
    if (axis < 0) break;
  }
  return seeds;
}

// ---------------------------------------------------------------------------
// Newton refinement
// ---------------------------------------------------------------------------

namespace detail {

inline double grad_norm(std::span<const double> g) {
  double s = 0.0;
  for (double v : g) s += v * v;
  return std::sqrt(s);
}

/// Local problem scale: 1 unless the Hessian is large.
inline double hessian_scale(const Mat& h) {
  double m = 1.0;
  for (double v : h.a) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace detail

/// Newton iteration on the gradient.  `constrain_boundary` freezes x = 0 and
/// works on the tangential system only.  Returns nullopt on divergence.
template <FieldLike F>
std::optional<std::vector<double>> refine_newton(const F& f, std::span<const double> seed,
                                                 bool constrain_boundary,
                                                 const SolverConfig& cfg = {}) {
  const int n = f.dimension();
  std::vector<double> p(seed.begin(), seed.end());
  if (constrain_boundary) p[0] = 0.0;
  const double huge_step = 1e3 * std::max(1.0, detail::grad_norm(p));

  double prev_gn = std::numeric_limits<double>::infinity();
  for (int it = 0; it < cfg.max_iters; ++it) {
    Jet j = f.jet_at(p, 2);
    std::vector<double> g = j.gradient();
    Mat h = j.hessian();
    double scale = detail::hessian_scale(h);

    // assemble the active subsystem
    const int m = constrain_boundary ? n - 1 : n;
    const int off = constrain_boundary ? 1 : 0;
    std::vector<double> gr(std::size_t(m), 0.0);
    Mat hs(m);
    for (int i = 0; i < m; ++i) {
      gr[std::size_t(i)] = g[std::size_t(i + off)];
      for (int k = 0; k < m; ++k) hs(i, k) = h(i + off, k + off);
    }

    double gn = detail::grad_norm(gr);
    if (!std::isfinite(gn)) return std::nullopt;
    if (gn < cfg.grad_tol * scale) return p;

    bool ok = true;
    Lu lu(hs, &ok);
    if (!ok) {
      // regularize a singular Hessian slightly; degenerate targets still
      // attract the gradient even if convergence degrades to linear
      Mat reg = hs;
      for (int i = 0; i < m; ++i) reg(i, i) += 1e-10 * scale;
      bool ok2 = true;
      lu = Lu(reg, &ok2);
      if (!ok2) return std::nullopt;
    }
    std::vector<double> step = lu.solve(gr);
    double sn = detail::grad_norm(step);
    if (!std::isfinite(sn) || sn > huge_step) return std::nullopt;

    // damped update: backtrack while the gradient norm grows
    double t = 1.0;
    std::vector<double> q = p;
    for (int bt = 0; bt < 8; ++bt) {
      for (int i = 0; i < m; ++i)
        q[std::size_t(i + off)] = p[std::size_t(i + off)] - t * step[std::size_t(i)];
      Jet jq = f.jet_at(q, 1);
      std::vector<double> gq = jq.gradient();
      double gqn = 0.0;
      for (int i = 0; i < m; ++i)
        gqn += gq[std::size_t(i + off)] * gq[std::size_t(i + off)];
      gqn = std::sqrt(gqn);
      if (std::isfinite(gqn) && (gqn < gn || t < 0.02)) break;
      t *= 0.5;
    }
    p = q;
    prev_gn = gn;
    (void)prev_gn;
  }

  // accept a final iterate that meets the tolerance
  Jet j = f.jet_at(p, 2);
  std::vector<double> g = j.gradient();
  const int m = constrain_boundary ? n - 1 : n;
  const int off = constrain_boundary ? 1 : 0;
  double gn = 0.0;
  for (int i = 0; i < m; ++i) gn += g[std::size_t(i + off)] * g[std::size_t(i + off)];
  if (std::sqrt(gn) < cfg.grad_tol * detail::hessian_scale(j.hessian())) return p;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

/// Morse data at an already-located critical point.  Throws if the gradient is
/// too large for the point to qualify.
template <FieldLike F>
CriticalPoint classify_point(const F& f, std::span<const double> p, const SolverConfig& cfg = {}) {
  const int n = f.dimension();
  Jet j = f.jet_at(p, 2);
  Mat h = j.hessian();
  double scale = detail::hessian_scale(h);

  const bool on_boundary = p[0] == 0.0;
  std::vector<double> g = j.gradient();
  {
    // boundary points are critical points of the restriction, so only the
    // tangential gradient components enter the precondition
    double gn = 0.0;
    const int off = on_boundary ? 1 : 0;
    for (int i = off; i < n; ++i) gn += g[std::size_t(i)] * g[std::size_t(i)];
    if (std::sqrt(gn) > 1e-7 * scale)
      throw domain_error("classify_point: the point is not critical (gradient too large)");
  }

  CriticalPoint out;
  out.location.assign(p.begin(), p.end());
  out.value = j.value();
  out.kind = on_boundary ? PointKind::Boundary : PointKind::InteriorOrbit;

  EigenSym full = jacobi_eigen(h);
  out.hessian_eigs = full.values;
  double spectral = std::max(std::abs(full.values.front()), std::abs(full.values.back()));
  double eig_floor = cfg.eig_tol * std::max(1.0, spectral);

  if (!on_boundary) {
    double min_abs = spectral;
    int neg = 0;
    for (double v : full.values) {
      min_abs = std::min(min_abs, std::abs(v));
      if (v < 0) ++neg;
    }
    out.degenerate = min_abs < eig_floor;
    if (!out.degenerate) out.index = neg;
    return out;
  }

  // boundary point: use the A (tangential) + B (normal) block structure
  if (cfg.equivariant) {
    for (int i = 1; i < n; ++i)
      if (std::abs(h(0, i)) > cfg.block_assert_tol * std::max(1.0, scale))
        throw domain_error(
            "classify_point: mixed normal/tangential Hessian entry at a boundary point "
            "(field not equivariant?)");
  }

  out.normal_block = h(0, 0);
  int tang_neg = 0;
  double tang_min = std::numeric_limits<double>::infinity();
  if (n > 1) {
    Mat a(n - 1);
    for (int i = 1; i < n; ++i)
      for (int k = 1; k < n; ++k) a(i - 1, k - 1) = h(i, k);
    EigenSym ta = jacobi_eigen(a);
    for (double v : ta.values) {
      tang_min = std::min(tang_min, std::abs(v));
      if (v < 0) ++tang_neg;
    }
  } else {
    tang_min = std::numeric_limits<double>::infinity();
  }

  if (!cfg.equivariant && std::abs(g[0]) > 1e-7 * scale) {
    // collar field with a genuine first-order normal derivative: stability is
    // decided by whether the field decreases into the interior
    out.boundary_index = tang_neg;
    out.degenerate = tang_min < eig_floor;
    if (!out.degenerate) {
      bool stable = g[0] < 0.0;
      out.stability = stable ? Stability::BoundaryStable : Stability::BoundaryUnstable;
      out.index = out.boundary_index + (stable ? 1 : 0);
    }
    return out;
  }

  out.degenerate = std::abs(out.normal_block) < eig_floor || tang_min < eig_floor;
  if (out.degenerate) return out;

  out.boundary_index = tang_neg;
  if (out.normal_block < 0) {
    out.stability = Stability::BoundaryStable;
    out.index = out.boundary_index + 1;
  } else {
    out.stability = Stability::BoundaryUnstable;
    out.index = out.boundary_index;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Global search
// ---------------------------------------------------------------------------

namespace detail {

inline bool near(std::span<const double> a, std::span<const double> b, double r) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s <= r * r;
}

}  // namespace detail

/// Best-effort extra Newton polish at a much tighter tolerance.  Near a
/// degeneracy the plain tolerance leaves a basin of half-converged iterates
/// wider than the dedup radius; pushing every accepted hit as far down as it
/// goes collapses such clusters to a single point.
template <FieldLike F>
std::vector<double> polish_hit(const F& f, std::vector<double> p, bool constrain_boundary,
                               const SolverConfig& cfg = {}) {
  SolverConfig tight = cfg;
  tight.grad_tol = std::min(cfg.grad_tol, 1e-13);
  if (auto better = refine_newton(f, p, constrain_boundary, tight)) return *better;
  return p;
}

/// Locate every critical point in the box from a regular seed grid: interior
/// orbits (reported with x > 0) and boundary points (x = 0 exactly).
template <FieldLike F>
std::vector<CriticalPoint> find_all_critical_points(const F& f, const Box& box, int density,
                                                    const SolverConfig& cfg = {}) {
  const int n = f.dimension();
  if (box.dimension() != n) throw domain_error("find_all_critical_points: box dimension mismatch");

  std::vector<std::vector<double>> interior_hits, boundary_hits;
  auto push_unique = [&](std::vector<std::vector<double>>& list, std::vector<double> p) {
    for (const auto& q : list)
      if (detail::near(p, q, cfg.dedup_radius)) return;
    list.push_back(std::move(p));
  };

  for (auto& seed : seed_grid(box, density)) {
    // interior refinement
    if (auto hit = refine_newton(f, seed, false, cfg)) {
      std::vector<double> p = polish_hit(f, *hit, false, cfg);
      if (cfg.equivariant && p[0] < 0.0) p[0] = -p[0];  // orbit representative
      if (std::abs(p[0]) < cfg.snap_tol) {
        p[0] = 0.0;
        if (auto polished = refine_newton(f, p, true, cfg)) {
          std::vector<double> q = polish_hit(f, *polished, true, cfg);
          if (box.contains(q)) push_unique(boundary_hits, q);
        }
      } else if (p[0] > 0.0 && box.contains(p)) {
        push_unique(interior_hits, p);
      }
    }
    // boundary refinement from the seed's boundary projection
    std::vector<double> proj = seed;
    proj[0] = 0.0;
    if (auto hit = refine_newton(f, proj, true, cfg)) {
      std::vector<double> q = polish_hit(f, *hit, true, cfg);
      if (box.contains(q)) push_unique(boundary_hits, q);
    }
  }

  std::vector<CriticalPoint> out;
  for (const auto& p : interior_hits) out.push_back(classify_point(f, p, cfg));
  for (const auto& p : boundary_hits) out.push_back(classify_point(f, p, cfg));

  // Near a degeneracy the gradient is too flat for the dedup radius: Newton
  // stops anywhere inside a wide root cluster and distinct-looking copies of
  // one degenerate point survive.  Degenerate points of a generic field are
  // isolated, so two of the same kind this close are the same point; keep the
  // most singular copy.
  auto min_abs = [](const CriticalPoint& p) {
    double m = std::numeric_limits<double>::infinity();
    for (double v : p.hessian_eigs) m = std::min(m, std::abs(v));
    return m;
  };
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!out[i].degenerate) continue;
    for (std::size_t j = out.size(); j-- > i + 1;) {
      if (!out[j].degenerate || out[j].kind != out[i].kind) continue;
      if (detail::near(out[i].location, out[j].location, 1e-3)) {
        if (min_abs(out[j]) < min_abs(out[i])) out[i] = out[j];
        out.erase(out.begin() + std::ptrdiff_t(j));
      }
    }
  }

  std::sort(out.begin(), out.end(), [](const CriticalPoint& a, const CriticalPoint& b) {
    if (a.value != b.value) return a.value < b.value;
    return a.location < b.location;
  });
  return out;
}

/// Expression-field overload: verifies equivariance up front when requested.
inline std::vector<CriticalPoint> find_all_critical_points(const ScalarField& f, const Box& box,
                                                           int density,
                                                           const SolverConfig& cfg = SolverConfig{}) {
  if (cfg.equivariant && cfg.verify_equivariance) {
    auto rep = check_equivariance(f);
    if (!rep.pass)
      throw validation_error("field is not equivariant under x -> -x (" + rep.detail + ")");
  }
  return find_all_critical_points<ScalarField>(f, box, density, cfg);
}

}  // namespace morsetrack
