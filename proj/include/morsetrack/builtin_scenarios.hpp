#pragma once

// Builtin scenario catalogue.  Each entry is the exact text of the matching
// file in scenarios/; the CLI resolves bare names through this table so the
// binary is usable standalone.

#include <array>
#include <string_view>
#include <utility>

namespace morsetrack::builtins {

namespace detail {

inline constexpr const char* k_unfold_f11 = R"mtjson({
  "name": "unfold_f11",
  "description": "Birth/death of an interior pair: a cubic fold unfolds at the interior orbit x = 1 while the boundary restriction stays free of critical points.",
  "n": 2,
  "field": "(x^2 - 1)^2 * (1 + 5*y1/4) + y1^3 + lambda*y1",
  "params": { "lambda": "2*sigma - 1" },
  "sigma": [0.0, 1.0],
  "box": { "min": [0.0, -2.0], "max": [2.0, 2.0] },
  "config": { "sigma_samples": 120 },
  "expected": [
    { "kind": "interior-death", "sigma": 0.5, "tol": 1e-6 }
  ]
}
)mtjson";

inline constexpr const char* k_unfold_f121_stable = R"mtjson({
  "name": "unfold_f121_stable",
  "description": "Birth/death of a boundary pair with negative normal sign: both points are boundary-stable and their boundary indices differ by 1.",
  "n": 2,
  "field": "y1^3 + lambda*y1 - x^2",
  "params": { "lambda": "2*sigma - 1" },
  "sigma": [0.0, 1.0],
  "box": { "min": [0.0, -2.0], "max": [2.0, 2.0] },
  "expected": [
    { "kind": "boundary-death", "sigma": 0.5, "tol": 1e-6 }
  ]
}
)mtjson";

inline constexpr const char* k_unfold_f121_unstable = R"mtjson({
  "name": "unfold_f121_unstable",
  "description": "Birth/death of a boundary pair with positive normal sign: both points are boundary-unstable and their boundary indices differ by 1.",
  "n": 2,
  "field": "x^2 + y1^3 + lambda*y1",
  "params": { "lambda": "2*sigma - 1" },
  "sigma": [0.0, 1.0],
  "box": { "min": [0.0, -2.0], "max": [2.0, 2.0] },
  "expected": [
    { "kind": "boundary-death", "sigma": 0.5, "tol": 1e-6 }
  ]
}
)mtjson";

inline constexpr const char* k_unfold_f122 = R"mtjson({
  "name": "unfold_f122",
  "description": "Collision: the interior orbit at x = sqrt(-lambda/2) merges into the boundary point at sigma = 1/2, flipping it from boundary-unstable to boundary-stable.",
  "n": 2,
  "field": "x^4 + lambda*x^2 + y1^2",
  "params": { "lambda": "1 - 2*sigma" },
  "sigma": [0.0, 1.0],
  "box": { "min": [0.0, -2.0], "max": [2.0, 2.0] },
  "expected": [
    { "kind": "collision", "sigma": 0.5, "tol": 1e-6 }
  ]
}
)mtjson";

inline constexpr const char* k_d4_ccw = R"mtjson({
  "name": "d4_ccw",
  "description": "Counterclockwise circle (lambda, mu) = (cos pi sigma, sin pi sigma) through the quartic family's discriminant: a boundary-unstable pair is born at sigma = 1/2, then the interior orbit collides with the upper boundary point.",
  "n": 2,
  "field": "y1^3 - x^2*y1 + lambda*y1 + mu*x^2",
  "params": {
    "lambda": "cos(3.141592653589793*sigma)",
    "mu": "sin(3.141592653589793*sigma)"
  },
  "sigma": [0.0, 1.0],
  "box": { "min": [0.0, -2.0], "max": [2.0, 2.0] },
  "expected": [
    { "kind": "boundary-birth", "sigma": 0.5, "tol": 1e-6 },
    { "kind": "collision", "sigma": 0.821669761744973, "tol": 1e-6 }
  ]
}
)mtjson";

inline constexpr const char* k_d4_cw = R"mtjson({
  "name": "d4_cw",
  "description": "Clockwise circle (lambda, mu) = (cos pi sigma, -sin pi sigma) through the quartic family's discriminant: a boundary-stable pair is born at sigma = 1/2, then the interior orbit collides with the lower boundary point.",
  "n": 2,
  "field": "y1^3 - x^2*y1 + lambda*y1 + mu*x^2",
  "params": {
    "lambda": "cos(3.141592653589793*sigma)",
    "mu": "-sin(3.141592653589793*sigma)"
  },
  "sigma": [0.0, 1.0],
  "box": { "min": [0.0, -2.0], "max": [2.0, 2.0] },
  "expected": [
    { "kind": "boundary-birth", "sigma": 0.5, "tol": 1e-6 },
    { "kind": "collision", "sigma": 0.821669761744973, "tol": 1e-6 }
  ]
}
)mtjson";

inline constexpr const char* k_d4_census_grid = R"mtjson({
  "name": "d4_census_grid",
  "description": "Parameter-plane census of the quartic family over (lambda, mu): the region pattern follows the discriminant {lambda = 0} union {lambda = -3 mu^2}.",
  "n": 2,
  "field": "y1^3 - x^2*y1 + lambda*y1 + mu*x^2",
  "box": { "min": [0.0, -2.0], "max": [3.0, 2.0] },
  "config": { "seed_density": 6 },
  "map": {
    "params": ["lambda", "mu"],
    "min": [-1.5, -1.5],
    "max": [1.5, 1.5],
    "grid": 61
  }
}
)mtjson";

inline constexpr const char* k_double_demo = R"mtjson({
  "name": "double_demo",
  "description": "Equivariant double of the collar field cos(y1) + x^2 + x*sin(y1)^2: checks evenness at the wall, the collar C0 bound, critical-set preservation, and exact identity beyond the half-collar.",
  "n": 2,
  "field": "cos(y1) + x^2 + x*sin(y1)^2",
  "double": {
    "flags": [[0.0, 0.0], [0.0, 3.141592653589793]],
    "epsilon": 0.5,
    "flag_radius": 0.25,
    "scan_box": { "min": [0.0, -2.0], "max": [1.0, 5.0] },
    "tangential": [-2.0, 5.0],
    "grid": [200, 50]
  }
}
)mtjson";

}  // namespace detail

/// All builtin scenarios as (name, json text) pairs, in a stable order.
inline const std::array<std::pair<std::string_view, std::string_view>, 8>& all() {
  static const std::array<std::pair<std::string_view, std::string_view>, 8> table = {{
      {"unfold_f11", detail::k_unfold_f11},
      {"unfold_f121_stable", detail::k_unfold_f121_stable},
      {"unfold_f121_unstable", detail::k_unfold_f121_unstable},
      {"unfold_f122", detail::k_unfold_f122},
      {"d4_ccw", detail::k_d4_ccw},
      {"d4_cw", detail::k_d4_cw},
      {"d4_census_grid", detail::k_d4_census_grid},
      {"double_demo", detail::k_double_demo},
  }};
  return table;
}

/// The builtin names in catalogue order.
inline std::array<std::string_view, 8> names() {
  std::array<std::string_view, 8> out{};
  for (std::size_t i = 0; i < all().size(); ++i) out[i] = all()[i].first;
  return out;
}

/// Scenario text for `name`, or nullptr if there is no such builtin.
inline const char* find(std::string_view name) {
  for (const auto& [key, text] : all())
    if (key == name) return text.data();
  return nullptr;
}

}  // namespace morsetrack::builtins
