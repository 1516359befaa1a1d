#pragma once

// Seeded random helpers shared by the property tests.  Everything downstream
// of a fixed seed is deterministic.

#include <functional>
#include <random>
#include <vector>

#include "morsetrack/jet.hpp"
#include "support/poly_oracle.hpp"

namespace testrand {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo = -1.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

/// Random polynomial with all monomials up to `order`, coefficients in [-1,1].
inline oracle::Poly random_poly(Rng& rng, int n, int order) {
  oracle::Poly p;
  p.n = n;
  std::vector<int> e(std::size_t(n), 0);
  // enumerate exponents with total degree <= order
  std::function<void(int, int)> rec = [&](int pos, int budget) {
    if (pos == n) {
      p.c[e] = uniform(rng);
      return;
    }
    for (int v = 0; v <= budget; ++v) {
      e[std::size_t(pos)] = v;
      rec(pos + 1, budget - v);
    }
    e[std::size_t(pos)] = 0;
  };
  rec(0, order);
  return p;
}

/// The same polynomial as a jet around the origin.
inline morsetrack::Jet poly_to_jet(const oracle::Poly& p, int order) {
  morsetrack::Jet j(p.n, order);
  for (const auto& [e, v] : p.c) {
    morsetrack::MultiIndex m;
    m.n = p.n;
    int deg = 0;
    for (int i = 0; i < p.n; ++i) {
      m.e[i] = std::uint8_t(e[std::size_t(i)]);
      deg += e[std::size_t(i)];
    }
    if (deg > order) continue;
    int idx = j.table().index_of(m);
    j.raw(idx) = v;
  }
  return j;
}

/// Coefficient-exact comparison helper: max |jet - truncated poly| coefficient.
inline double max_coeff_diff(const morsetrack::Jet& j, const oracle::Poly& p) {
  double worst = 0.0;
  for (int i = 0; i < j.size(); ++i) {
    const morsetrack::MultiIndex& m = j.table().at(i);
    std::vector<int> e;
    for (int v = 0; v < j.n(); ++v) e.push_back(m.e[v]);
    worst = std::max(worst, std::fabs(j[i] - oracle::coeff(p, e)));
  }
  return worst;
}

}  // namespace testrand
