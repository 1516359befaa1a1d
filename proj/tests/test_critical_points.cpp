#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "morsetrack/critical_points.hpp"
#include "support/random_gen.hpp"

using namespace morsetrack;

namespace {

ScalarField phi(double lambda, double mu) {
  return ScalarField::parse("y1^3 - x^2*y1 + lambda*y1 + mu*x^2", 2,
                            {{"lambda", lambda}, {"mu", mu}});
}

Box box2() { return Box{{0.0, -2.0}, {2.0, 2.0}}; }

double dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

/// Random polynomial expression of total degree <= deg in n variables.
ExprPtr random_poly_expr(testrand::Rng& rng, int n, int deg, int terms) {
  ExprPtr sum = make_number(0.0);
  for (int t = 0; t < terms; ++t) {
    ExprPtr term = make_number(testrand::uniform(rng, -1.0, 1.0));
    int budget = testrand::uniform_int(rng, 0, deg);
    for (int i = 0; i < n && budget > 0; ++i) {
      int e = testrand::uniform_int(rng, 0, budget);
      budget -= e;
      if (e > 0) term = make_binary(ExprNode::Kind::Mul, term, make_pow(make_var(i), e));
    }
    sum = make_binary(ExprNode::Kind::Add, sum, term);
  }
  return sum;
}

}  // namespace

TEST_CASE("seed grids") {
  auto g = seed_grid(Box{{0.0, -1.0}, {1.0, 1.0}}, 3);
  CHECK(g.size() == 9);
  bool has_boundary_row = false;
  for (const auto& p : g)
    if (p[0] == 0.0) has_boundary_row = true;
  CHECK(has_boundary_row);

  auto flat = seed_grid(Box{{0.0, -1.0}, {0.0, 1.0}}, 3);
  CHECK(flat.size() == 3);
  for (const auto& p : flat) CHECK(p[0] == 0.0);

  CHECK_THROWS_AS(seed_grid(Box{{0.0}, {1.0}}, 1), domain_error);
}

TEST_CASE("newton refinement on the cubic-family field") {
  SECTION("interior mode converges to the closed-form root") {
    ScalarField f = phi(1.0, 0.0);
    std::vector<double> seed{0.9, 0.1};
    auto hit = refine_newton(f, seed, false);
    REQUIRE(hit.has_value());
    CHECK((*hit)[0] == Catch::Approx(1.0).margin(1e-9));
    CHECK((*hit)[1] == Catch::Approx(0.0).margin(1e-9));
  }

  SECTION("boundary mode converges on the restriction") {
    ScalarField f = phi(-1.0, 0.0);
    std::vector<double> seed{0.0, 0.5};
    auto hit = refine_newton(f, seed, true);
    REQUIRE(hit.has_value());
    CHECK((*hit)[0] == 0.0);
    CHECK((*hit)[1] == Catch::Approx(std::sqrt(1.0 / 3.0)).margin(1e-10));
  }

  SECTION("an exact critical point is a fixed point") {
    ScalarField f = phi(1.0, 0.0);
    std::vector<double> seed{1.0, 0.0};
    auto hit = refine_newton(f, seed, false);
    REQUIRE(hit.has_value());
    CHECK(dist(*hit, seed) < 1e-12);
  }
}

TEST_CASE("global search reproduces the worked family's census") {
  SECTION("lambda > 0: single interior orbit") {
    auto pts = find_all_critical_points(phi(1.0, 0.0), box2(), 41);
    REQUIRE(pts.size() == 1);
    CHECK(pts[0].kind == PointKind::InteriorOrbit);
    CHECK(pts[0].location[0] == Catch::Approx(1.0).margin(1e-8));
    CHECK(pts[0].location[1] == Catch::Approx(0.0).margin(1e-8));
    CHECK(pts[0].index == 1);
    CHECK(pts[0].hessian_eigs[0] == Catch::Approx(-2.0).margin(1e-8));
    CHECK(pts[0].hessian_eigs[1] == Catch::Approx(2.0).margin(1e-8));
  }

  SECTION("lambda < 0, mu = 0: two boundary points of opposite stability") {
    auto pts = find_all_critical_points(phi(-1.0, 0.0), box2(), 41);
    REQUIRE(pts.size() == 2);
    for (const auto& p : pts) CHECK(p.kind == PointKind::Boundary);
    double root = std::sqrt(1.0 / 3.0);
    // sorted by value: Phi(0, +root) = root^3 - root < 0 comes first
    CHECK(pts[0].location[1] == Catch::Approx(root).margin(1e-8));
    CHECK(pts[1].location[1] == Catch::Approx(-root).margin(1e-8));
    CHECK(pts[0].stability == Stability::BoundaryStable);
    CHECK(pts[0].normal_block == Catch::Approx(-2.0 * root).margin(1e-8));
    CHECK(pts[0].index == 1);
    CHECK(pts[0].boundary_index == 0);
    CHECK(pts[1].stability == Stability::BoundaryUnstable);
    CHECK(pts[1].index == 1);
    CHECK(pts[1].boundary_index == 1);
  }

  SECTION("lambda = -0.75, mu = 0.6: unstable pair plus one interior orbit") {
    auto pts = find_all_critical_points(phi(-0.75, 0.6), box2(), 41);
    REQUIRE(pts.size() == 3);
    int interior = 0, unstable = 0;
    for (const auto& p : pts) {
      if (p.kind == PointKind::InteriorOrbit) {
        ++interior;
        CHECK(p.location[0] == Catch::Approx(std::sqrt(0.33)).margin(1e-8));
        CHECK(p.location[1] == Catch::Approx(0.6).margin(1e-8));
      } else {
        CHECK(std::abs(p.location[1]) == Catch::Approx(0.5).margin(1e-8));
        if (p.stability == Stability::BoundaryUnstable) ++unstable;
      }
    }
    CHECK(interior == 1);
    CHECK(unstable == 2);
  }
}

TEST_CASE("pointwise classification examples") {
  SECTION("interior saddle") {
    std::vector<double> p{1.0, 0.0};
    auto cp = classify_point(phi(1.0, 0.0), p);
    CHECK(cp.kind == PointKind::InteriorOrbit);
    CHECK(cp.index == 1);
    CHECK_FALSE(cp.degenerate);
  }

  SECTION("boundary-stable point with block spectrum") {
    double root = std::sqrt(1.0 / 3.0);
    std::vector<double> p{0.0, root};
    auto cp = classify_point(phi(-1.0, 0.0), p);
    CHECK(cp.stability == Stability::BoundaryStable);
    CHECK(cp.normal_block == Catch::Approx(-2.0 / std::sqrt(3.0)).margin(1e-12));
    CHECK(cp.index == 1);
    CHECK(cp.boundary_index == 0);
    // full spectrum is the two blocks
    CHECK(cp.hessian_eigs[0] == Catch::Approx(-2.0 / std::sqrt(3.0)).margin(1e-12));
    CHECK(cp.hessian_eigs[1] == Catch::Approx(2.0 * std::sqrt(3.0)).margin(1e-12));
  }

  SECTION("paraboloid corner: boundary-unstable minimum") {
    ScalarField f = ScalarField::parse("x^2 + y1^2", 2);
    std::vector<double> p{0.0, 0.0};
    auto cp = classify_point(f, p);
    CHECK(cp.stability == Stability::BoundaryUnstable);
    CHECK(cp.index == 0);
    CHECK(cp.boundary_index == 0);
  }

  SECTION("non-critical point is rejected") {
    std::vector<double> p{0.5, 0.5};
    CHECK_THROWS_AS(classify_point(phi(1.0, 0.0), p), domain_error);
  }

  SECTION("degenerate tangential block is flagged, not classified") {
    std::vector<double> p{0.0, 0.0};
    auto cp = classify_point(phi(0.0, 0.5), p);
    CHECK(cp.degenerate);
    CHECK(cp.index == -1);
  }
}

TEST_CASE("every returned point re-verifies as critical") {
  for (auto [lambda, mu] : {std::pair{1.0, 0.0}, {-1.0, 0.0}, {-0.75, 0.6}, {-0.3, -0.4}}) {
    auto pts = find_all_critical_points(phi(lambda, mu), box2(), 25);
    for (const auto& cp : pts) {
      Jet j = phi(lambda, mu).jet_at(cp.location, 1);
      auto g = j.gradient();
      double gn = 0.0;
      for (int i = (cp.kind == PointKind::Boundary ? 1 : 0); i < 2; ++i)
        gn += g[std::size_t(i)] * g[std::size_t(i)];
      CHECK(std::sqrt(gn) < 1e-8);
      if (cp.kind == PointKind::Boundary) {
        bool stable_by_index = cp.index == cp.boundary_index + 1;
        CHECK(stable_by_index == (cp.normal_block < 0));
      }
    }
  }
}

TEST_CASE("completeness against closed-form roots of the family") {
  testrand::Rng rng(1234);
  int tested = 0;
  while (tested < 20) {
    double lambda = testrand::uniform(rng, -1.0, 1.0);
    double mu = testrand::uniform(rng, -0.6, 0.6);
    if (std::abs(lambda) < 0.05 || std::abs(lambda + 3 * mu * mu) < 0.05) continue;
    ++tested;

    std::vector<std::vector<double>> expected;
    if (lambda < 0) {
      double r = std::sqrt(-lambda / 3.0);
      expected.push_back({0.0, r});
      expected.push_back({0.0, -r});
    }
    if (lambda + 3 * mu * mu > 0) expected.push_back({std::sqrt(lambda + 3 * mu * mu), mu});

    auto pts = find_all_critical_points(phi(lambda, mu), box2(), 41);
    INFO("lambda=" << lambda << " mu=" << mu);
    REQUIRE(pts.size() == expected.size());
    for (const auto& e : expected) {
      double best = 1e9;
      for (const auto& p : pts) best = std::min(best, dist(p.location, e));
      CHECK(best < 1e-8);
    }
  }
}

TEST_CASE("block structure of symmetrized random fields at boundary points") {
  testrand::Rng rng(7777);
  int boundary_points_seen = 0;
  for (int trial = 0; trial < 100; ++trial) {
    int n = testrand::uniform_int(rng, 2, 4);
    ScalarField raw(random_poly_expr(rng, n, 4, 8), n);
    ScalarField f = symmetrize(raw);

    Box box;
    box.min.assign(std::size_t(n), -1.2);
    box.max.assign(std::size_t(n), 1.2);
    box.min[0] = 0.0;

    SolverConfig cfg;
    auto pts = find_all_critical_points(f, box, n <= 3 ? 7 : 4, cfg);
    for (const auto& cp : pts) {
      if (cp.kind != PointKind::Boundary) continue;
      ++boundary_points_seen;
      Mat h = f.jet_at(cp.location, 2).hessian();
      for (int i = 1; i < n; ++i) CHECK(std::abs(h(0, i)) < 1e-10);
    }
  }
  // the property must actually have been exercised
  CHECK(boundary_points_seen > 50);
}

TEST_CASE("non-equivariant input is rejected up front") {
  ScalarField f = ScalarField::parse("x*y1 + y1^2", 2);
  CHECK_THROWS_AS(find_all_critical_points(f, box2(), 5), validation_error);
}

TEST_CASE("plain mode handles collar fields that are not equivariant") {
  ScalarField f = ScalarField::parse("cos(y1) + x^2 + x*sin(y1)^2", 2);
  SolverConfig cfg;
  cfg.equivariant = false;
  cfg.verify_equivariance = false;

  Box box{{0.0, -1.0}, {0.6, 4.0}};
  auto pts = find_all_critical_points(f, box, 21, cfg);
  REQUIRE(pts.size() == 2);
  // sorted by value: cos(pi) = -1 < cos(0) = 1
  CHECK(pts[0].location[1] == Catch::Approx(3.14159265358979).margin(1e-8));
  CHECK(pts[1].location[1] == Catch::Approx(0.0).margin(1e-8));
  for (const auto& p : pts) {
    CHECK(p.kind == PointKind::Boundary);
    CHECK(p.stability == Stability::BoundaryUnstable);  // d2F/dx2 = 2 > 0, dF/dx = 0
  }
  CHECK(pts[0].boundary_index == 0);
  CHECK(pts[1].boundary_index == 1);
}
