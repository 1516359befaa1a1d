#pragma once

#include <cmath>
#include <vector>

#include "morsetrack/jet.hpp"

namespace morsetrack {

// Standard C-infinity splines built from t -> e^{-1/t}.

inline double smooth_h(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }

/// Monotone step: 0 for t <= 0, 1 for t >= 1, smooth everywhere.
inline double smooth_step(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  double a = smooth_h(t), b = smooth_h(1.0 - t);
  return a / (a + b);
}

/// smooth_step composed with an arbitrary jet argument.  The flat tails make
/// this exact: outside (0,1) every derivative of the step vanishes.
inline Jet smooth_step_of(const Jet& u) {
  const int order = u.order();
  const double t0 = u.value();
  std::vector<double> derivs(std::size_t(order) + 1, 0.0);
  if (t0 >= 1.0) {
    derivs[0] = 1.0;
  } else if (t0 > 0.0) {
    Jet t = Jet::variable(1, order, 0, t0);
    Jet ht = jet_exp(-jet_reciprocal(t));
    Jet hc = jet_exp(-jet_reciprocal(Jet::constant(1, order, 1.0) - t));
    Jet s = ht / (ht + hc);
    MultiIndex m;
    m.n = 1;
    for (int k = 0; k <= order; ++k) {
      m.e[0] = std::uint8_t(k);
      derivs[std::size_t(k)] = s.derivative(m);
    }
  }
  return jet_analytic(u, derivs);
}

/// Radial plateau profile in the squared distance s: identically 1 for
/// s <= r^2, identically 0 for s >= (2r)^2.
inline double bump_radial(double s, double r) {
  return 1.0 - smooth_step((s - r * r) / (3.0 * r * r));
}

inline Jet bump_radial_of(const Jet& s, double r) {
  Jet arg = (s - r * r) * (1.0 / (3.0 * r * r));
  Jet one = Jet::constant(s.n(), s.order(), 1.0);
  return one - smooth_step_of(arg);
}

/// Normal cutoff rho: identically 1 on [0, eps/4], identically 0 beyond eps/2.
inline double collar_rho(double x, double eps) {
  return 1.0 - smooth_step((x - eps / 4.0) / (eps / 4.0));
}

inline Jet collar_rho_of(const Jet& x, double eps) {
  Jet arg = (x - eps / 4.0) * (4.0 / eps);
  Jet one = Jet::constant(x.n(), x.order(), 1.0);
  return one - smooth_step_of(arg);
}

/// Numeric bound on |d/dt smooth_step| over (0,1), used for the derivative
/// constant of the collar cutoffs.
inline double smooth_step_derivative_sup(int samples = 2000) {
  double sup = 0.0;
  for (int i = 1; i < samples; ++i) {
    double t = double(i) / samples;
    Jet u = Jet::variable(1, 1, 0, t);
    Jet s = smooth_step_of(u);
    MultiIndex m;
    m.n = 1;
    m.e[0] = 1;
    sup = std::max(sup, std::abs(s.derivative(m)));
  }
  return sup;
}

}  // namespace morsetrack
