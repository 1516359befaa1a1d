#pragma once

// Branch tracking across a one-parameter family of equivariant fields and
// detection/classification of the three codimension-1 transitions: interior
// birth/death, boundary birth/death, and boundary/interior collision.
//
// The per-branch corrector steps inside one sigma interval are independent
// and could run in parallel; the sigma loop itself is sequential because the
// event bookkeeping is order-dependent.  At desk scale everything runs
// sequentially.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "morsetrack/critical_points.hpp"
#include "morsetrack/field.hpp"
#include "morsetrack/linalg.hpp"
#include "morsetrack/strata.hpp"

namespace morsetrack {

// ---------------------------------------------------------------------------
// Domain types
// ---------------------------------------------------------------------------

enum class EventKind {
  InteriorBirth,
  InteriorDeath,
  BoundaryBirth,
  BoundaryDeath,
  Collision,
};

inline const char* event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::InteriorBirth: return "interior-birth";
    case EventKind::InteriorDeath: return "interior-death";
    case EventKind::BoundaryBirth: return "boundary-birth";
    case EventKind::BoundaryDeath: return "boundary-death";
    case EventKind::Collision: return "collision";
  }
  return "?";
}

struct BranchSample {
  double sigma = 0.0;
  std::vector<double> location;
  int index = -1;  // -1 while degenerate
  Stability stability = Stability::NotApplicable;
  double min_abs_eig = 0.0;  // smallest block-eigenvalue magnitude
  double rho = 0.0;          // signed min-magnitude eigenvalue (test function)
};

struct Branch {
  int id = -1;
  PointKind kind = PointKind::InteriorOrbit;
  std::vector<BranchSample> samples;
  int birth_event = -1;  // event ids; -1 when the branch reaches a sigma end
  int death_event = -1;
};

struct CensusSummary {
  int interior = 0;
  int boundary_stable = 0;
  int boundary_unstable = 0;
  int degenerate = 0;
  bool operator==(const CensusSummary&) const = default;
};

struct Event {
  int id = -1;
  double sigma_star = 0.0;
  std::vector<double> location;
  StratumLabel stratum;
  EventKind kind = EventKind::InteriorBirth;
  // births/deaths: the two paired branches; collision: {interior, boundary}
  std::vector<int> branch_ids;
  // births/deaths: Morse indices of the pair adjacent to the event;
  // collision: {interior index, boundary index before, boundary index after}
  std::vector<int> branch_indices;
  Stability stability_before = Stability::NotApplicable;  // collision only
  Stability stability_after = Stability::NotApplicable;
  double transversality = 0.0;  // |d rho / d sigma| at sigma_star
  bool transverse = true;
  CensusSummary census_before, census_after;
  std::string note;
};

/// A trigger that could not be resolved into a codimension-1 event, with the
/// reason.  Paths through codimension >= 2 strata land here; the caller is
/// expected to perturb the path.
struct RejectedEvent {
  double sigma = 0.0;
  std::vector<double> location;
  StratumLabel stratum;
  std::string diagnostic;
};

struct TrackerConfig {
  double sigma_start = 0.0;
  double sigma_end = 1.0;
  int sigma_samples = 200;  // predictor-corrector grid resolution
  int seed_density = 12;    // global re-solve grid per sigma sample
  SolverConfig solver{};
  StrataConfig strata{};
  double trans_tol = 1e-6;     // transversality acceptance threshold
  double bracket_tol = 1e-10;  // event bisection bracket target
  double continuity_factor = 10.0;
  double match_radius = 1e-5;  // branch <-> global-solve correspondence

  void validate() const {
    if (!(sigma_end > sigma_start)) throw validation_error("tracker: sigma_end must exceed sigma_start");
    if (sigma_samples < 2) throw validation_error("tracker: need at least 2 sigma samples");
    if (seed_density < 2) throw validation_error("tracker: seed density must be at least 2");
    if (trans_tol <= 0 || bracket_tol <= 0 || match_radius <= 0 || continuity_factor <= 0)
      throw validation_error("tracker: tolerances must be positive");
  }
};

struct TrackResult {
  std::vector<Branch> branches;
  std::vector<Event> events;
  std::vector<RejectedEvent> rejected;
};

// ---------------------------------------------------------------------------
// Test function and census
// ---------------------------------------------------------------------------

namespace detail {

inline double dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

inline double spectral_radius(const std::vector<double>& eigs) {
  double m = 0.0;
  for (double v : eigs) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace detail

/// Signed minimum-magnitude eigenvalue of the relevant Hessian blocks: the
/// full Hessian for interior orbits, the tangential block plus the normal
/// block for boundary points.  Crossing zero signals a degeneracy; using the
/// minimum-magnitude eigenvalue (not det) keeps the sign meaningful when a
/// single simple eigenvalue crosses.
template <FieldLike F>
double branch_rho(const F& f, const CriticalPoint& p) {
  const int n = f.dimension();
  Jet j = f.jet_at(p.location, 2);
  Mat h = j.hessian();
  if (p.kind == PointKind::InteriorOrbit) {
    EigenSym es = jacobi_eigen(h);
    double best = es.values.front();
    for (double v : es.values)
      if (std::abs(v) < std::abs(best)) best = v;
    return best;
  }
  double best = h(0, 0);
  if (n > 1) {
    Mat a(n - 1);
    for (int i = 1; i < n; ++i)
      for (int k = 1; k < n; ++k) a(i - 1, k - 1) = h(i, k);
    EigenSym es = jacobi_eigen(a);
    for (double v : es.values)
      if (std::abs(v) < std::abs(best)) best = v;
  }
  return best;
}

inline CensusSummary census_of(const std::vector<CriticalPoint>& pts) {
  CensusSummary c;
  for (const auto& p : pts) {
    if (p.degenerate) {
      ++c.degenerate;
    } else if (p.kind == PointKind::InteriorOrbit) {
      ++c.interior;
    } else if (p.stability == Stability::BoundaryStable) {
      ++c.boundary_stable;
    } else {
      ++c.boundary_unstable;
    }
  }
  return c;
}

/// Critical-point census of the family at a frozen sigma.
inline CensusSummary census(const FamilySpec& fam, double sigma, const Box& box,
                            int seed_density = 12, const SolverConfig& solver = SolverConfig{}) {
  auto pts = find_all_critical_points<ScalarField>(fam.at(sigma), box, seed_density, solver);
  return census_of(pts);
}

// ---------------------------------------------------------------------------
// Event location
// ---------------------------------------------------------------------------

struct EventLocation {
  double sigma_star = 0.0;
  std::vector<double> point;
  double bracket_width = 0.0;
  bool by_sign_change = false;
  std::string note;
};

/// Last good sample of a branch next to a suspected event.
struct BranchContext {
  CriticalPoint point;
  double sigma = 0.0;
};

namespace detail {

/// Newton polish of a collision: unknowns (tangential location, sigma),
/// equations (tangential gradient, normal Hessian block).  All derivatives
/// are exact (third-order jets and the analytic sigma-derivative field).
inline bool polish_collision(const FamilySpec& fam, std::vector<double>& p, double& sigma,
                             int iters = 12) {
  const int n = fam.dimension();
  p[0] = 0.0;
  for (int it = 0; it < iters; ++it) {
    ScalarField f = fam.at(sigma);
    ScalarField df = fam.sigma_derivative(sigma);
    Jet j = f.jet_at(p, 3);
    Jet dj = df.jet_at(p, 2);
    std::vector<double> g = j.gradient();
    Mat h = j.hessian();
    Mat dh = dj.hessian();
    std::vector<double> dg = dj.gradient();

    std::vector<double> r(std::size_t(n), 0.0);
    for (int i = 1; i < n; ++i) r[std::size_t(i - 1)] = g[std::size_t(i)];
    r[std::size_t(n - 1)] = h(0, 0);

    double rn = grad_norm(r);
    double scale = hessian_scale(h);
    if (rn < 1e-13 * scale) return true;

    Mat jac(n);
    for (int i = 1; i < n; ++i) {
      for (int k = 1; k < n; ++k) jac(i - 1, k - 1) = h(i, k);
      jac(i - 1, n - 1) = dg[std::size_t(i)];
    }
    for (int k = 1; k < n; ++k) jac(n - 1, k - 1) = j.third_derivative(0, 0, k);
    jac(n - 1, n - 1) = dh(0, 0);

    bool ok = true;
    Lu lu(jac, &ok);
    if (!ok) return false;
    std::vector<double> step = lu.solve(r);
    for (int i = 1; i < n; ++i) p[std::size_t(i)] -= step[std::size_t(i - 1)];
    sigma -= step[std::size_t(n - 1)];
    if (!std::isfinite(sigma)) return false;
  }
  ScalarField f = fam.at(sigma);
  Jet j = f.jet_at(p, 2);
  std::vector<double> g = j.gradient();
  std::vector<double> r(std::size_t(n), 0.0);
  for (int i = 1; i < n; ++i) r[std::size_t(i - 1)] = g[std::size_t(i)];
  r[std::size_t(n - 1)] = j.hessian()(0, 0);
  return grad_norm(r) < 1e-11 * hessian_scale(j.hessian());
}

/// Moore-Spence polish of a fold: unknowns (location, kernel vector, sigma),
/// equations (gradient, Hessian * v, normalization).  `boundary` restricts
/// everything to the tangential system with x frozen at 0.
inline bool polish_fold(const FamilySpec& fam, std::vector<double>& p, std::vector<double>& v,
                        double& sigma, bool boundary, int iters = 16) {
  const int n = fam.dimension();
  const int off = boundary ? 1 : 0;
  const int m = n - off;
  if (int(v.size()) != m) return false;
  if (boundary) p[0] = 0.0;
  const std::vector<double> c = v;  // frozen normalization direction

  for (int it = 0; it < iters; ++it) {
    ScalarField f = fam.at(sigma);
    ScalarField df = fam.sigma_derivative(sigma);
    Jet j = f.jet_at(p, 3);
    Jet dj = df.jet_at(p, 2);
    std::vector<double> g = j.gradient();
    Mat h = j.hessian();
    std::vector<double> dg = dj.gradient();
    Mat dh = dj.hessian();

    const int dim = 2 * m + 1;
    std::vector<double> r(std::size_t(dim), 0.0);
    for (int i = 0; i < m; ++i) {
      r[std::size_t(i)] = g[std::size_t(i + off)];
      double hv = 0.0, dhv = 0.0;
      for (int k = 0; k < m; ++k) {
        hv += h(i + off, k + off) * v[std::size_t(k)];
        dhv += dh(i + off, k + off) * v[std::size_t(k)];
      }
      r[std::size_t(m + i)] = hv;
      (void)dhv;
    }
    double cv = -1.0;
    for (int i = 0; i < m; ++i) cv += c[std::size_t(i)] * v[std::size_t(i)];
    r[std::size_t(2 * m)] = cv;

    double scale = hessian_scale(h);
    if (grad_norm(r) < 1e-12 * scale) return true;

    Mat jac(dim);
    for (int i = 0; i < m; ++i) {
      for (int k = 0; k < m; ++k) {
        jac(i, k) = h(i + off, k + off);
        jac(m + i, m + k) = h(i + off, k + off);
        double tv = 0.0;
        for (int l = 0; l < m; ++l)
          tv += j.third_derivative(i + off, k + off, l + off) * v[std::size_t(l)];
        jac(m + i, k) = tv;
      }
      jac(i, 2 * m) = dg[std::size_t(i + off)];
      double dhv = 0.0;
      for (int k = 0; k < m; ++k) dhv += dh(i + off, k + off) * v[std::size_t(k)];
      jac(m + i, 2 * m) = dhv;
      jac(2 * m, m + i) = c[std::size_t(i)];
    }

    bool ok = true;
    Lu lu(jac, &ok);
    if (!ok) return false;
    std::vector<double> step = lu.solve(r);
    for (int i = 0; i < m; ++i) {
      p[std::size_t(i + off)] -= step[std::size_t(i)];
      v[std::size_t(i)] -= step[std::size_t(m + i)];
    }
    sigma -= step[std::size_t(2 * m)];
    if (!std::isfinite(sigma)) return false;
  }
  return false;
}

/// Kernel direction of the (restricted) Hessian: the eigenvector of the
/// minimum-magnitude eigenvalue.
inline std::vector<double> min_eig_vector(const Mat& h, int off) {
  const int m = h.n - off;
  Mat sub(m);
  for (int i = 0; i < m; ++i)
    for (int k = 0; k < m; ++k) sub(i, k) = h(i + off, k + off);
  EigenSym es = jacobi_eigen(sub);
  int best = 0;
  for (int i = 1; i < m; ++i)
    if (std::abs(es.values[std::size_t(i)]) < std::abs(es.values[std::size_t(best)])) best = i;
  std::vector<double> v(std::size_t(m), 0.0);
  for (int i = 0; i < m; ++i) v[std::size_t(i)] = es.vectors(i, best);
  return v;
}

}  // namespace detail

/// Locate a fold: the branch continues from `ctx` toward sigma_bad and ceases
/// to exist at sigma_star in between.  Existence bisection brackets sigma_star
/// to bracket_tol, a secant step on rho^2 sharpens the estimate (rho vanishes
/// like a square root at a fold), and a Moore-Spence Newton solve polishes
/// (location, sigma) to machine precision.  Works in either sigma direction,
/// so newborn branches are located by running backward from the birth side.
inline std::optional<EventLocation> locate_fold(const FamilySpec& fam, const BranchContext& ctx,
                                                double sigma_bad, const TrackerConfig& cfg) {
  const bool boundary = ctx.point.kind == PointKind::Boundary;
  SolverConfig solver = cfg.solver;
  solver.verify_equivariance = false;

  double s_good = ctx.sigma, s_bad = sigma_bad;
  std::vector<double> loc = ctx.point.location;
  double rho1 = branch_rho(fam.at(s_good), ctx.point);
  double s1 = s_good, s0 = s_good, rho0 = rho1;

  while (std::abs(s_bad - s_good) > cfg.bracket_tol) {
    double mid = 0.5 * (s_good + s_bad);
    ScalarField f = fam.at(mid);
    auto hit = refine_newton(f, loc, boundary, solver);
    bool ok = hit.has_value();
    std::vector<double> q;
    double rho_mid = 0.0;
    if (ok) {
      q = *hit;
      if (!boundary) {
        if (q[0] < 0.0) q[0] = -q[0];
        if (q[0] < solver.snap_tol) ok = false;  // slid onto the boundary
      }
      if (ok) {
        CriticalPoint probe;
        probe.location = q;
        probe.kind = ctx.point.kind;
        rho_mid = branch_rho(f, probe);
        // landing on the partner branch flips the test function's sign; an
        // exact zero is the event itself, so it belongs to the far side too
        if (rho_mid == 0.0 || (rho1 != 0.0 && (rho_mid < 0) != (rho1 < 0))) ok = false;
      }
    }
    if (ok) {
      s0 = s1;
      rho0 = rho1;
      s1 = mid;
      rho1 = rho_mid;
      loc = q;
      s_good = mid;
    } else {
      s_bad = mid;
    }
  }

  double sigma_est = s1;
  double denom = rho0 * rho0 - rho1 * rho1;
  if (std::abs(denom) > 1e-300 && std::abs(rho1) > 1e-14) {
    double ext = s1 + rho1 * rho1 * (s1 - s0) / denom;
    double lo = std::min(s_good, s_bad), hi = std::max(s_good, s_bad);
    sigma_est = std::clamp(ext, lo, hi);
  }

  std::vector<double> p = loc;
  if (boundary) p[0] = 0.0;
  ScalarField f1 = fam.at(s1);
  std::vector<double> v = detail::min_eig_vector(f1.jet_at(p, 2).hessian(), boundary ? 1 : 0);
  double sigma_star = sigma_est;
  EventLocation out;
  if (detail::polish_fold(fam, p, v, sigma_star, boundary)) {
    out.sigma_star = sigma_star;
    out.point = p;
  } else {
    out.sigma_star = sigma_est;
    out.point = p;
    out.note = "fold polish did not converge; bisection/secant estimate";
  }
  out.bracket_width = std::abs(s_bad - s_good);
  out.by_sign_change = false;
  return out;
}

/// Locate a zero crossing of the normal Hessian block along a boundary branch
/// that survives across the event (the collision signature).  Bisection on
/// the sign, then an exact-derivative Newton polish.
inline std::optional<EventLocation> locate_crossing(const FamilySpec& fam, const BranchContext& ctx,
                                                    double sigma_other, const TrackerConfig& cfg) {
  if (ctx.point.kind != PointKind::Boundary) return std::nullopt;
  SolverConfig solver = cfg.solver;
  solver.verify_equivariance = false;

  std::vector<double> loc = ctx.point.location;
  auto probe = [&](double s) -> std::optional<double> {
    ScalarField f = fam.at(s);
    auto hit = refine_newton(f, loc, true, solver);
    if (!hit) return std::nullopt;
    loc = *hit;
    return f.jet_at(loc, 2).hessian()(0, 0);
  };

  double sa = ctx.sigma, sb = sigma_other;
  auto ba = probe(sa);
  auto bb = probe(sb);
  if (!ba || !bb) return std::nullopt;

  double fa = *ba, fb = *bb;
  double sigma_star;
  if ((fa < 0) != (fb < 0) && fa != 0.0 && fb != 0.0) {
    while (std::abs(sb - sa) > cfg.bracket_tol) {
      double mid = 0.5 * (sa + sb);
      auto bm = probe(mid);
      if (!bm) return std::nullopt;
      if ((*bm < 0) == (fa < 0)) {
        sa = mid;
        fa = *bm;
      } else {
        sb = mid;
        fb = *bm;
      }
    }
    sigma_star = (std::abs(fa) < std::abs(fb)) ? sa : sb;
  } else {
    // a sigma sample can land exactly on the crossing: one endpoint is zero
    // (or negligibly small against the other); start the polish there
    double mag = std::max(std::abs(fa), std::abs(fb));
    if (std::abs(fa) <= 1e-9 * std::max(1.0, mag) && std::abs(fa) <= std::abs(fb)) {
      sigma_star = sa;
      probe(sa);  // park the corrector location at the chosen endpoint
    } else if (std::abs(fb) <= 1e-9 * std::max(1.0, mag)) {
      sigma_star = sb;
    } else {
      return std::nullopt;  // same sign, neither endpoint on the zero
    }
    sa = sb = sigma_star;
  }
  std::vector<double> p = loc;
  p[0] = 0.0;
  EventLocation out;
  if (detail::polish_collision(fam, p, sigma_star)) {
    out.sigma_star = sigma_star;
    out.point = p;
  } else {
    out.sigma_star = (std::abs(fa) < std::abs(fb)) ? sa : sb;
    out.point = p;
    out.note = "collision polish did not converge; bisection estimate";
  }
  out.bracket_width = std::max(std::abs(sb - sa), cfg.bracket_tol);
  out.by_sign_change = true;
  return out;
}

/// Locate a tangential (grazing) contact: minimize the Lyapunov-Schmidt
/// defect |v . grad Phi_sigma| at the frozen degenerate location, where v is
/// the kernel direction seen at sigma_hint.  A tangential path touches the
/// stratum without crossing, so there is a magnitude minimum but no sign
/// change.  For a normal-type kernel the defect is identically zero by
/// equivariance and the normal Hessian block is minimized instead.
inline std::optional<EventLocation> locate_graze(const FamilySpec& fam, const CriticalPoint& pt,
                                                 double sigma_hint, double sa, double sb,
                                                 const TrackerConfig& cfg) {
  KernelInfo k = kernel_analysis(fam.at(sigma_hint), pt, cfg.strata);
  const int n = fam.dimension();
  std::vector<double> probe_loc = pt.location;

  std::function<double(double)> h;
  if (pt.kind == PointKind::Boundary && k.tau_type == TauType::Normal) {
    h = [&](double s) { return std::abs(fam.at(s).jet_at(probe_loc, 2).hessian()(0, 0)); };
  } else {
    if (k.dim != 1 || k.v.empty()) {
      // fall back to the tangential-gradient norm at the frozen point
      h = [&](double s) {
        Jet j = fam.at(s).jet_at(probe_loc, 1);
        std::vector<double> g = j.gradient();
        double acc = 0.0;
        int off = pt.kind == PointKind::Boundary ? 1 : 0;
        for (int i = off; i < n; ++i) acc += g[std::size_t(i)] * g[std::size_t(i)];
        return std::sqrt(acc);
      };
    } else {
      std::vector<double> v = k.v;
      h = [&, v](double s) {
        Jet j = fam.at(s).jet_at(probe_loc, 1);
        std::vector<double> g = j.gradient();
        double acc = 0.0;
        for (int i = 0; i < n; ++i) acc += v[std::size_t(i)] * g[std::size_t(i)];
        return std::abs(acc);
      };
    }
  }

  // golden-section minimization of the defect magnitude
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = sa, b = sb;
  double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
  double f1 = h(x1), f2 = h(x2);
  for (int it = 0; it < 90 && (b - a) > 1e-14; ++it) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - gr * (b - a);
      f1 = h(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + gr * (b - a);
      f2 = h(x2);
    }
  }
  double sigma_star = 0.5 * (a + b);

  double scale = std::max(1.0, fam.at(sigma_star).jet_at(probe_loc, 2).max_abs_coeff());
  if (h(sigma_star) > 1e-5 * scale) return std::nullopt;  // never gets close: spurious

  SolverConfig solver = cfg.solver;
  solver.verify_equivariance = false;
  std::vector<double> p = probe_loc;
  if (auto hit = refine_newton(fam.at(sigma_star), p, pt.kind == PointKind::Boundary, solver))
    p = *hit;

  // a genuine tangential contact leaves a (nearly) degenerate point behind
  CriticalPoint probe_pt;
  probe_pt.location = p;
  probe_pt.kind = pt.kind;
  double rho = branch_rho(fam.at(sigma_star), probe_pt);
  if (std::abs(rho) > 1e-3 * scale) return std::nullopt;

  EventLocation out;
  out.sigma_star = sigma_star;
  out.point = p;
  out.bracket_width = std::max(b - a, cfg.bracket_tol);
  out.by_sign_change = false;
  out.note = "magnitude minimum (no sign change)";
  return out;
}

/// Locate an event along a surviving branch: prefer a sign change of the test
/// function (bisection + polish), otherwise a magnitude minimum (graze).
inline std::optional<EventLocation> locate_event(const FamilySpec& fam, const BranchContext& ctx,
                                                 double sigma_other, const TrackerConfig& cfg) {
  const bool boundary = ctx.point.kind == PointKind::Boundary;
  SolverConfig probe = cfg.solver;
  probe.verify_equivariance = false;

  // probe the far end of the interval with the branch corrector
  std::vector<double> seed = ctx.point.location;
  bool far_ok = false;
  std::vector<double> q;
  if (auto far = refine_newton(fam.at(sigma_other), seed, boundary, probe)) {
    q = *far;
    if (!boundary && q[0] < 0.0) q[0] = -q[0];
    far_ok = boundary || q[0] >= probe.snap_tol;
  }

  // corrector lost the point: the branch dies inside the interval at a fold
  if (!far_ok) {
    if (auto loc = locate_fold(fam, ctx, sigma_other, cfg)) return loc;
  }

  if (far_ok && boundary) {
    // surviving boundary branch: a normal-block sign change is a collision
    double b_here = fam.at(ctx.sigma).jet_at(ctx.point.location, 2).hessian()(0, 0);
    double b_far = fam.at(sigma_other).jet_at(q, 2).hessian()(0, 0);
    if ((b_here < 0) != (b_far < 0) || b_here == 0.0 || b_far == 0.0)
      if (auto loc = locate_crossing(fam, ctx, sigma_other, cfg)) return loc;
  }

  if (far_ok) {
    // the corrector may have jumped onto the partner branch across a fold:
    // the test function flips sign without a normal-block crossing
    CriticalPoint far_pt;
    far_pt.location = q;
    far_pt.kind = ctx.point.kind;
    double rho_far = branch_rho(fam.at(sigma_other), far_pt);
    double rho_here = branch_rho(fam.at(ctx.sigma), ctx.point);
    if (rho_here != 0.0 && rho_far != 0.0 && (rho_far < 0) != (rho_here < 0))
      if (auto loc = locate_fold(fam, ctx, sigma_other, cfg)) return loc;
  }

  double lo = std::min(ctx.sigma, sigma_other), hi = std::max(ctx.sigma, sigma_other);
  return locate_graze(fam, ctx.point, ctx.sigma, lo, hi, cfg);
}

// ---------------------------------------------------------------------------
// Transversality and classification
// ---------------------------------------------------------------------------

/// |d rho / d sigma| at the event, by central finite difference with step
/// 1e-5.  For a collision rho is the normal Hessian block along the surviving
/// boundary branch.  For folds the branch exists on one side only, so the
/// square-root eigenvalue is not differentiable; its smooth proxy with the
/// same zero is the Lyapunov-Schmidt defect v . grad Phi_sigma at the frozen
/// degenerate point, whose sigma-slope is the classical fold speed.
inline double transversality_check(const FamilySpec& fam, double sigma_star,
                                   const CriticalPoint& degenerate_pt, const StratumLabel& stratum,
                                   const StrataConfig& scfg = {}) {
  const double step = 1e-5;
  const int n = fam.dimension();

  if (stratum.tag == StratumTag::F1_22) {
    SolverConfig solver;
    solver.verify_equivariance = false;
    auto block = [&](double s) -> double {
      ScalarField f = fam.at(s);
      std::vector<double> seed = degenerate_pt.location;
      auto hit = refine_newton(f, seed, true, solver);
      std::vector<double> p = hit ? *hit : seed;
      return f.jet_at(p, 2).hessian()(0, 0);
    };
    return std::abs((block(sigma_star + step) - block(sigma_star - step)) / (2.0 * step));
  }

  KernelInfo k = kernel_analysis(fam.at(sigma_star), degenerate_pt, scfg);
  std::vector<double> v;
  if (k.dim == 1 && !k.v.empty()) {
    v = k.v;
  } else {
    v.assign(std::size_t(n), 0.0);
    v[std::size_t(n - 1)] = 1.0;
  }
  auto defect = [&](double s) -> double {
    Jet j = fam.at(s).jet_at(degenerate_pt.location, 1);
    std::vector<double> g = j.gradient();
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += v[std::size_t(i)] * g[std::size_t(i)];
    return acc;
  };
  return std::abs((defect(sigma_star + step) - defect(sigma_star - step)) / (2.0 * step));
}

/// Classify a located event.  Throws domain_error with a diagnostic when the
/// point sits on a codimension >= 2 stratum (the path should be perturbed) or
/// when the located point turns out nondegenerate (spurious trigger).
inline Event classify_event(const FamilySpec& fam, double sigma_star, std::span<const double> point,
                            const Box& box, const TrackerConfig& cfg,
                            double bracket_width = 1e-10) {
  SolverConfig solver = cfg.solver;
  solver.verify_equivariance = false;
  ScalarField f = fam.at(sigma_star);
  const int n = fam.dimension();
  CriticalPoint cp = classify_point(f, point, solver);
  StrataConfig scfg = cfg.strata;

  // A located event point can sit marginally off the degeneracy: where the
  // gradient flattens out, Newton stops anywhere inside a wide root cluster.
  // Promote a marginally singular point to degenerate, then recenter it along
  // the near-kernel direction at the root centroid of the 1-d section -- the
  // jet there is the one the stratum conditions describe.
  double spectral = detail::spectral_radius(cp.hessian_eigs);
  double marg = std::abs(branch_rho(f, cp));
  if (!cp.degenerate && marg < 1e-4 * std::max(1.0, spectral)) {
    // only promote when the relaxed threshold separates cleanly: if the next
    // eigenvalue is comparable, the honest reading is a higher-dimensional
    // kernel (a codimension >= 2 situation), not a marginal simple one
    double second = std::numeric_limits<double>::infinity();
    for (double v : cp.hessian_eigs) {
      double a = std::abs(v);
      if (a > marg * (1.0 + 1e-12) && a < second) second = a;
    }
    if (second >= 20.0 * marg) {
      solver.eig_tol = std::max(solver.eig_tol, 2.0 * marg / std::max(1.0, spectral));
      scfg.eig_tol = solver.eig_tol;
      cp = classify_point(f, cp.location, solver);
    }
  }
  if (cp.degenerate) {
    KernelInfo k = kernel_analysis(f, cp, scfg);
    bool normal_kernel = cp.kind == PointKind::Boundary && k.tau_type == TauType::Normal;
    if (k.dim == 1 && !k.v.empty() && !normal_kernel) {
      Jet j4 = f.jet_at(cp.location, 4);
      Mat hh = j4.hessian();
      double c1 = 0.0;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) c1 += k.v[std::size_t(i)] * hh(i, j) * k.v[std::size_t(j)];
      double c2 = 0.5 * j4.cubic_along(k.v);
      double c3 = j4.quartic_along(k.v) / 6.0;
      double s = std::max({std::abs(c1), std::abs(c2), std::abs(c3)});
      double t = 0.0;
      if (s > 0.0) {
        if (std::abs(c3) > 1e-6 * s)
          t = -c2 / (3.0 * c3);
        else if (std::abs(c2) > 1e-6 * s)
          t = -c1 / (2.0 * c2);
      }
      if (std::abs(t) > 1e-2) t = 0.0;  // recentring is a local correction only
      if (t != 0.0) {
        std::vector<double> p2 = cp.location;
        for (int i = 0; i < n; ++i) p2[std::size_t(i)] += t * k.v[std::size_t(i)];
        if (cp.kind == PointKind::Boundary || std::abs(p2[0]) < solver.snap_tol)
          p2[0] = 0.0;
        else if (p2[0] < 0.0)
          p2[0] = -p2[0];  // orbit representative
        try {
          cp = classify_point(f, p2, solver);
        } catch (const domain_error&) {
          // recentered point fell outside the critical cluster; keep the original
        }
      }
    }
  }
  StratumLabel stratum = classify_stratum(f, cp, scfg);

  if (stratum.tag == StratumTag::F0Interior || stratum.tag == StratumTag::F0Boundary)
    throw domain_error("classify_event: located point is nondegenerate (spurious trigger)");
  if (stratum.tag == StratumTag::CodimGe2)
    throw domain_error(std::string("classify_event: path hits a codimension >= 2 stratum (") +
                       codim_reason_name(stratum.reason) +
                       "); a generic path avoids these - perturb the path");

  Event e;
  e.sigma_star = sigma_star;
  e.location.assign(point.begin(), point.end());
  e.stratum = stratum;

  // censuses just off the event decide birth vs death
  double delta = std::max(10.0 * bracket_width, 1e-9);
  SolverConfig tight = solver;
  tight.grad_tol = 1e-12;
  tight.max_iters = 120;
  double s_before = std::max(sigma_star - delta, cfg.sigma_start);
  double s_after = std::min(sigma_star + delta, cfg.sigma_end);
  e.census_before = census(fam, s_before, box, cfg.seed_density, tight);
  e.census_after = census(fam, s_after, box, cfg.seed_density, tight);

  if (stratum.tag == StratumTag::F1_22) {
    e.kind = EventKind::Collision;
  } else {
    bool interior = stratum.tag == StratumTag::F1_1;
    int before = interior ? e.census_before.interior
                          : e.census_before.boundary_stable + e.census_before.boundary_unstable;
    int after = interior ? e.census_after.interior
                         : e.census_after.boundary_stable + e.census_after.boundary_unstable;
    if (after == before)
      e.note = "censuses agree across the event (tangential contact?); direction uncertain";
    if (after >= before)
      e.kind = interior ? EventKind::InteriorBirth : EventKind::BoundaryBirth;
    else
      e.kind = interior ? EventKind::InteriorDeath : EventKind::BoundaryDeath;
  }

  e.transversality = transversality_check(fam, sigma_star, cp, stratum, cfg.strata);
  e.transverse = e.transversality > cfg.trans_tol;
  if (!e.transverse) {
    if (!e.note.empty()) e.note += "; ";
    e.note += "transversality measure below tolerance: the crossing is tangential and the event "
              "record is unreliable";
  }
  return e;
}

// ---------------------------------------------------------------------------
// The tracker
// ---------------------------------------------------------------------------

namespace detail {

struct ActiveBranch {
  int id = -1;
  CriticalPoint cur;
  double rho = 0.0;
  double speed = 0.0;  // |location step| / |sigma step| from the last advance
};

struct LocatedEvent {
  EventLocation loc;
  std::vector<int> dying;        // active-branch ids ending at the event
  std::vector<int> born_global;  // indices into the sigma_b global solve
  int boundary_branch = -1;      // surviving boundary branch id (collision)
};

inline bool same_event(const LocatedEvent& a, const LocatedEvent& b) {
  return std::abs(a.loc.sigma_star - b.loc.sigma_star) < 1e-6 &&
         dist(a.loc.point, b.loc.point) < 1e-3;
}

}  // namespace detail

/// Track every critical point of the family across [sigma_start, sigma_end]:
/// predictor-corrector continuation per branch, a fresh global solve at every
/// sigma sample (newborn branches have no predictor), and event search on any
/// trigger: corrector failure, test-function sign flip or sub-tolerance
/// magnitude, normal-block sign flip, census change, or continuity violation.
inline TrackResult track_branches(const FamilySpec& fam, const Box& box,
                                  const TrackerConfig& cfg = {}) {
  cfg.validate();
  TrackResult res;
  SolverConfig solver = cfg.solver;
  solver.verify_equivariance = false;

  const double h = (cfg.sigma_end - cfg.sigma_start) / cfg.sigma_samples;

  auto field_at = [&](double s) -> ScalarField {
    ScalarField f = fam.at(s);
    auto rep = check_equivariance(f);
    if (!rep.pass) {
      std::string msg = "family loses equivariance at sigma=" + std::to_string(s) +
                        " (max violation " + std::to_string(rep.max_violation);
      if (!rep.witness.empty()) {
        msg += " at point (";
        for (std::size_t i = 0; i < rep.witness.size(); ++i)
          msg += (i ? ", " : "") + std::to_string(rep.witness[i]);
        msg += ")";
      }
      throw validation_error(msg + ")");
    }
    return f;
  };

  std::vector<detail::ActiveBranch> active;
  auto new_branch = [&](const CriticalPoint& cp, double sigma, int birth_event,
                        const ScalarField& f) -> int {
    Branch b;
    b.id = int(res.branches.size());
    b.kind = cp.kind;
    b.birth_event = birth_event;
    res.branches.push_back(std::move(b));
    detail::ActiveBranch a;
    a.id = int(res.branches.size()) - 1;
    a.cur = cp;
    a.rho = branch_rho(f, cp);
    a.speed = 0.0;
    active.push_back(a);
    BranchSample s;
    s.sigma = sigma;
    s.location = cp.location;
    s.index = cp.index;
    s.stability = cp.stability;
    s.rho = active.back().rho;
    s.min_abs_eig = std::abs(s.rho);
    res.branches.back().samples.push_back(std::move(s));
    return active.back().id;
  };
  auto append_sample = [&](detail::ActiveBranch& a, double sigma) {
    BranchSample s;
    s.sigma = sigma;
    s.location = a.cur.location;
    s.index = a.cur.index;
    s.stability = a.cur.stability;
    s.rho = a.rho;
    s.min_abs_eig = std::abs(a.rho);
    res.branches[std::size_t(a.id)].samples.push_back(std::move(s));
  };
  auto push_event = [&](Event e) -> int {
    // merge with an existing record of the same event (a sample landing
    // exactly on an event can surface it from two adjacent intervals)
    auto resolved = [](const Event& ev) {
      int n = 0;
      for (int id : ev.branch_ids)
        if (id >= 0) ++n;
      return n;
    };
    for (auto& old : res.events) {
      if (std::abs(old.sigma_star - e.sigma_star) < 1e-6 && old.stratum == e.stratum &&
          detail::dist(old.location, e.location) < 1e-3) {
        if (e.kind == EventKind::Collision || old.kind == EventKind::Collision) {
          // positional ids ({interior, boundary}): keep the better-resolved one
          if (resolved(e) > resolved(old)) {
            e.id = old.id;
            old = std::move(e);
          }
        } else if (old.branch_ids.empty() && !e.branch_ids.empty()) {
          e.id = old.id;
          old = std::move(e);
        } else {
          // plain id list: union in what the new sighting adds
          for (std::size_t i = 0; i < e.branch_ids.size(); ++i) {
            int id = e.branch_ids[i];
            if (id < 0) continue;
            if (std::find(old.branch_ids.begin(), old.branch_ids.end(), id) ==
                old.branch_ids.end()) {
              old.branch_ids.push_back(id);
              old.branch_indices.push_back(i < e.branch_indices.size() ? e.branch_indices[i] : -1);
            }
          }
        }
        return old.id;
      }
    }
    e.id = int(res.events.size());
    res.events.push_back(std::move(e));
    return res.events.back().id;
  };

  double sa = cfg.sigma_start;
  ScalarField fa = field_at(sa);
  auto global_a = find_all_critical_points<ScalarField>(fa, box, cfg.seed_density, solver);
  for (const auto& cp : global_a)
    if (!cp.degenerate) new_branch(cp, sa, -1, fa);
    else
      res.rejected.push_back({sa, cp.location, classify_stratum(fa, cp, cfg.strata),
                              "degenerate point at the start of the sigma range"});
  CensusSummary census_a = census_of(global_a);

  for (int k = 1; k <= cfg.sigma_samples; ++k) {
    const double sb = (k == cfg.sigma_samples) ? cfg.sigma_end : cfg.sigma_start + k * h;
    ScalarField fb = field_at(sb);
    auto global_b = find_all_critical_points<ScalarField>(fb, box, cfg.seed_density, solver);

    const std::size_t na = active.size();
    std::vector<char> alive(na, 1);
    std::vector<char> snapped(na, 0);      // interior point slid onto x = 0
    std::vector<char> rho_flip(na, 0);     // test function changed sign
    std::vector<char> rho_small(na, 0);    // |test function| under tolerance
    std::vector<char> normal_flip(na, 0);  // boundary normal block changed sign
    std::vector<CriticalPoint> corrected(na);
    std::vector<double> new_rho(na, 0.0);

    for (std::size_t i = 0; i < na; ++i) {
      auto& a = active[i];
      const bool on_bnd = a.cur.kind == PointKind::Boundary;
      auto hit = refine_newton(fb, a.cur.location, on_bnd, solver);
      bool ok = hit.has_value();
      CriticalPoint cp;
      if (ok) {
        std::vector<double> p = polish_hit(fb, *hit, on_bnd, solver);
        if (a.cur.kind == PointKind::InteriorOrbit) {
          if (p[0] < 0.0) p[0] = -p[0];
          if (p[0] < solver.snap_tol) {
            ok = false;
            snapped[i] = 1;
          }
        }
        if (ok && !box.contains(p)) ok = false;
        if (ok) {
          try {
            cp = classify_point(fb, p, solver);
          } catch (const domain_error&) {
            ok = false;
          }
        }
        if (ok) {
          double move = detail::dist(cp.location, a.cur.location);
          double bound = cfg.continuity_factor * h * std::max(a.speed, box.diameter());
          if (move > bound) ok = false;  // jumped to a different basin
        }
      }
      if (!ok) {
        alive[i] = 0;
        continue;
      }
      corrected[i] = cp;
      double r = branch_rho(fb, cp);
      new_rho[i] = r;
      // an exact zero means a sample sat right on the degeneracy; entering or
      // leaving that state is a crossing too
      if ((a.rho == 0.0) != (r == 0.0)) rho_flip[i] = 1;
      if (a.rho != 0.0 && r != 0.0 && (a.rho < 0) != (r < 0)) rho_flip[i] = 1;
      double spectral = detail::spectral_radius(cp.hessian_eigs);
      if (std::abs(r) < solver.eig_tol * std::max(1.0, spectral)) rho_small[i] = 1;
      if (a.cur.kind == PointKind::Boundary) {
        double nb0 = a.cur.normal_block, nb1 = cp.normal_block;
        if ((nb0 == 0.0) != (nb1 == 0.0)) normal_flip[i] = 1;
        if (nb0 != 0.0 && nb1 != 0.0 && (nb0 < 0) != (nb1 < 0)) normal_flip[i] = 1;
      }
    }

    // branch <-> global-solve correspondence (greedy nearest)
    std::vector<int> match(na, -1);
    {
      struct Cand {
        double d;
        std::size_t i;
        int j;
      };
      std::vector<Cand> cands;
      for (std::size_t i = 0; i < na; ++i) {
        if (!alive[i]) continue;
        for (int j = 0; j < int(global_b.size()); ++j) {
          if (global_b[std::size_t(j)].kind != corrected[i].kind) continue;
          double d = detail::dist(global_b[std::size_t(j)].location, corrected[i].location);
          if (d < cfg.match_radius) cands.push_back({d, i, j});
        }
      }
      std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) { return a.d < b.d; });
      std::vector<char> used(global_b.size(), 0);
      for (const auto& c : cands) {
        if (match[c.i] >= 0 || used[std::size_t(c.j)]) continue;
        match[c.i] = c.j;
        used[std::size_t(c.j)] = 1;
      }
      std::vector<int> newborn;
      for (int j = 0; j < int(global_b.size()); ++j) {
        const auto& cp = global_b[std::size_t(j)];
        if (used[std::size_t(j)] || cp.degenerate) continue;
        // a sample landing on an event leaves barely-resolved debris around
        // the degeneracy; points this close to singular are not yet branches
        double r = branch_rho(fb, cp);
        if (std::abs(r) <
            100.0 * solver.eig_tol * std::max(1.0, detail::spectral_radius(cp.hessian_eigs)))
          continue;
        newborn.push_back(j);
      }

      CensusSummary census_b = census_of(global_b);
      bool vanish_any = std::find(alive.begin(), alive.end(), char(0)) != alive.end();
      bool flip_any = std::find(rho_flip.begin(), rho_flip.end(), char(1)) != rho_flip.end() ||
                      std::find(normal_flip.begin(), normal_flip.end(), char(1)) !=
                          normal_flip.end();
      bool small_any = std::find(rho_small.begin(), rho_small.end(), char(1)) != rho_small.end();
      bool quiet = !vanish_any && !flip_any && !small_any && newborn.empty() &&
                   census_b == census_a;

      if (quiet) {
        for (std::size_t i = 0; i < na; ++i) {
          auto& a = active[i];
          a.speed = detail::dist(corrected[i].location, a.cur.location) / h;
          a.cur = corrected[i];
          a.rho = new_rho[i];
          append_sample(a, sb);
        }
        census_a = census_b;
        sa = sb;
        global_a = std::move(global_b);
        continue;
      }

      // ------------------- event resolution in [sa, sb] -------------------
      std::vector<detail::LocatedEvent> located;
      auto add_located = [&](detail::LocatedEvent le) {
        for (auto& old : located)
          if (detail::same_event(old, le)) {
            old.dying.insert(old.dying.end(), le.dying.begin(), le.dying.end());
            old.born_global.insert(old.born_global.end(), le.born_global.begin(),
                                   le.born_global.end());
            if (le.boundary_branch >= 0) old.boundary_branch = le.boundary_branch;
            return;
          }
        located.push_back(std::move(le));
      };

      // collisions: surviving boundary branches whose normal block flips (or
      // lands exactly on zero at an endpoint sample)
      for (std::size_t i = 0; i < na; ++i) {
        if (!alive[i]) continue;
        bool on_bnd = active[i].cur.kind == PointKind::Boundary;
        bool normal_zeroed =
            on_bnd && rho_small[i] &&
            std::abs(corrected[i].normal_block) <=
                solver.eig_tol *
                    std::max(1.0, detail::spectral_radius(corrected[i].hessian_eigs));
        bool key = normal_flip[i] || (on_bnd && rho_flip[i]) || normal_zeroed;
        if (!key) continue;
        BranchContext ctx{active[i].cur, sa};
        if (auto loc = locate_crossing(fam, ctx, sb, cfg)) {
          detail::LocatedEvent le;
          le.loc = *loc;
          le.boundary_branch = int(i);
          add_located(std::move(le));
        }
      }
      // folds and collision-deaths: branches whose corrector lost the point
      for (std::size_t i = 0; i < na; ++i) {
        if (alive[i]) continue;
        BranchContext ctx{active[i].cur, sa};
        if (auto loc = locate_fold(fam, ctx, sb, cfg)) {
          detail::LocatedEvent le;
          le.loc = *loc;
          le.dying.push_back(int(i));
          if (snapped[i]) le.loc.point[0] = 0.0;
          add_located(std::move(le));
        } else {
          res.rejected.push_back({sa, active[i].cur.location, StratumLabel{},
                                  "branch lost without a locatable event in [" +
                                      std::to_string(sa) + ", " + std::to_string(sb) + "]"});
        }
      }
      // births: newborn global points, located by running backward
      for (int j : newborn) {
        CriticalPoint cp = global_b[std::size_t(j)];
        BranchContext ctx{cp, sb};
        if (auto loc = locate_fold(fam, ctx, sa, cfg)) {
          detail::LocatedEvent le;
          le.loc = *loc;
          le.born_global.push_back(j);
          add_located(std::move(le));
        } else {
          res.rejected.push_back({sb, cp.location, StratumLabel{},
                                  "newborn point without a locatable event in [" +
                                      std::to_string(sa) + ", " + std::to_string(sb) + "]"});
        }
      }
      // grazes along surviving branches: sub-tolerance magnitude, no flip
      for (std::size_t i = 0; i < na; ++i) {
        if (!alive[i] || !rho_small[i] || rho_flip[i] || normal_flip[i]) continue;
        bool involved = false;
        for (const auto& le : located)
          if (detail::dist(le.loc.point, corrected[i].location) < 1e-3) involved = true;
        if (involved) continue;
        double hint = std::abs(new_rho[i]) < std::abs(active[i].rho) ? sb : sa;
        const CriticalPoint& pt = hint == sb ? corrected[i] : active[i].cur;
        if (auto loc = locate_graze(fam, pt, hint, std::max(cfg.sigma_start, sa - h),
                                    std::min(cfg.sigma_end, sb + h), cfg)) {
          detail::LocatedEvent le;
          le.loc = *loc;
          add_located(std::move(le));
        }
      }
      // census blips with nothing else: a sample landed on (or next to) a
      // degeneracy; probe around any degenerate or near-singular point the
      // solves saw (a blip point may stop just above the eigen threshold)
      if (located.empty()) {
        const std::vector<CriticalPoint>* pools[2] = {&global_b, &global_a};
        double hints[2] = {sb, sa};
        for (int pool = 0; pool < 2 && located.empty(); ++pool) {
          ScalarField fpool = pool == 0 ? fb : fam.at(sa);
          for (const auto& cp : *pools[pool]) {
            if (!cp.degenerate) {
              double r = std::abs(branch_rho(fpool, cp));
              if (r >= 100.0 * solver.eig_tol *
                           std::max(1.0, detail::spectral_radius(cp.hessian_eigs)))
                continue;
            }
            if (auto loc = locate_graze(fam, cp, hints[pool], std::max(cfg.sigma_start, sa - h),
                                        std::min(cfg.sigma_end, sb + h), cfg)) {
              detail::LocatedEvent le;
              le.loc = *loc;
              add_located(std::move(le));
            }
          }
        }
      }

      std::sort(located.begin(), located.end(),
                [](const detail::LocatedEvent& a, const detail::LocatedEvent& b) {
                  return a.loc.sigma_star < b.loc.sigma_star;
                });

      std::vector<char> born_made(global_b.size(), 0);
      for (auto& le : located) {
        Event e;
        try {
          e = classify_event(fam, le.loc.sigma_star, le.loc.point, box, cfg,
                             std::max(le.loc.bracket_width, cfg.bracket_tol));
        } catch (const domain_error& ex) {
          StratumLabel s;
          try {
            ScalarField f = fam.at(le.loc.sigma_star);
            s = classify_stratum(f, classify_point(f, le.loc.point, solver), cfg.strata);
          } catch (...) {
          }
          res.rejected.push_back({le.loc.sigma_star, le.loc.point, s, ex.what()});
          continue;
        }
        if (!le.loc.note.empty()) {
          if (!e.note.empty()) e.note += "; ";
          e.note += le.loc.note;
        }

        if (e.kind == EventKind::Collision) {
          int interior_id = -1, interior_index = -1;
          for (int i : le.dying) {
            if (active[std::size_t(i)].cur.kind == PointKind::InteriorOrbit) {
              interior_id = active[std::size_t(i)].id;
              interior_index = active[std::size_t(i)].cur.index;
            }
          }
          for (int j : le.born_global) {
            if (global_b[std::size_t(j)].kind == PointKind::InteriorOrbit && !born_made[std::size_t(j)]) {
              int id = new_branch(global_b[std::size_t(j)], sb, /*birth_event=*/-1, fb);
              born_made[std::size_t(j)] = 1;
              interior_id = id;
              interior_index = global_b[std::size_t(j)].index;
            }
          }
          int boundary_id = -1, idx_before = -1, idx_after = -1;
          if (le.boundary_branch >= 0) {
            auto& bb = active[std::size_t(le.boundary_branch)];
            boundary_id = bb.id;
            idx_before = bb.cur.index;
            idx_after = corrected[std::size_t(le.boundary_branch)].index;
            e.stability_before = bb.cur.stability;
            e.stability_after = corrected[std::size_t(le.boundary_branch)].stability;
            if (idx_before < 0) {
              // the sample before the event sat on the degeneracy itself;
              // read the state off the last resolved sample instead
              const auto& hist = res.branches[std::size_t(boundary_id)].samples;
              for (auto it = hist.rbegin(); it != hist.rend(); ++it) {
                if (it->index < 0) continue;
                idx_before = it->index;
                e.stability_before = it->stability;
                break;
              }
            }
          }
          e.branch_ids = {interior_id, boundary_id};
          e.branch_indices = {interior_index, idx_before, idx_after};
          int id = push_event(std::move(e));
          for (int i : le.dying) res.branches[std::size_t(active[std::size_t(i)].id)].death_event = id;
          if (interior_id >= 0 && !le.born_global.empty())
            res.branches[std::size_t(interior_id)].birth_event = id;
        } else {
          for (int i : le.dying) {
            e.branch_ids.push_back(active[std::size_t(i)].id);
            e.branch_indices.push_back(active[std::size_t(i)].cur.index);
          }
          std::vector<int> born_ids;
          for (int j : le.born_global) {
            if (born_made[std::size_t(j)]) continue;
            int id = new_branch(global_b[std::size_t(j)], sb, /*birth_event=*/-1, fb);
            born_made[std::size_t(j)] = 1;
            born_ids.push_back(id);
            e.branch_ids.push_back(id);
            e.branch_indices.push_back(global_b[std::size_t(j)].index);
          }
          int id = push_event(std::move(e));
          for (int i : le.dying) res.branches[std::size_t(active[std::size_t(i)].id)].death_event = id;
          for (int bid : born_ids) res.branches[std::size_t(bid)].birth_event = id;
        }
      }

      // remaining unmatched newborns: make branches without an event link
      for (int j : newborn) {
        if (born_made[std::size_t(j)]) continue;
        new_branch(global_b[std::size_t(j)], sb, -1, fb);
      }

      // advance survivors, drop the lost (new branches are already current)
      std::vector<detail::ActiveBranch> next;
      for (std::size_t i = 0; i < na; ++i) {
        if (!alive[i]) continue;
        auto& a = active[i];
        a.speed = detail::dist(corrected[i].location, a.cur.location) / h;
        a.cur = corrected[i];
        a.rho = new_rho[i];
        append_sample(a, sb);
        next.push_back(a);
      }
      for (std::size_t i = na; i < active.size(); ++i) next.push_back(active[i]);
      active = std::move(next);

      census_a = census_b;
      sa = sb;
      global_a = std::move(global_b);
    }
  }

  std::sort(res.events.begin(), res.events.end(),
            [](const Event& a, const Event& b) { return a.sigma_star < b.sigma_star; });
  for (int i = 0; i < int(res.events.size()); ++i) {
    // re-key events by sigma order and remap branch links
    int old_id = res.events[std::size_t(i)].id;
    if (old_id == i) continue;
    for (auto& b : res.branches) {
      if (b.birth_event == old_id) b.birth_event = -2 - i;  // two-phase remap
      if (b.death_event == old_id) b.death_event = -2 - i;
    }
    res.events[std::size_t(i)].id = i;
  }
  for (auto& b : res.branches) {
    if (b.birth_event <= -2) b.birth_event = -2 - b.birth_event;
    if (b.death_event <= -2) b.death_event = -2 - b.death_event;
  }
  return res;
}

}  // namespace morsetrack
