#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "morsetrack/field.hpp"
#include "morsetrack/strata.hpp"
#include "support/random_gen.hpp"
#include "support/transformed_field.hpp"

using namespace morsetrack;
using testsupport::TransformedField;
using testsupport::WeightedChange;

namespace {

ScalarField running_family(double lambda, double mu) {
  return ScalarField::parse("y1^3 - x^2*y1 + lambda*y1 + mu*x^2", 2,
                            {{"lambda", lambda}, {"mu", mu}});
}

CriticalPoint boundary_point(std::vector<double> loc) {
  CriticalPoint p;
  p.location = std::move(loc);
  p.kind = PointKind::Boundary;
  p.degenerate = true;
  return p;
}

WeightedChange random_change(testrand::Rng& rng, int n) {
  WeightedChange ch;
  ch.linear = Mat(n - 1);
  do {
    for (int i = 0; i < n - 1; ++i)
      for (int j = 0; j < n - 1; ++j) ch.linear(i, j) = testrand::uniform(rng, -1.0, 1.0);
  } while (std::abs(mat_det(ch.linear)) < 0.3);
  do {
    ch.a = testrand::uniform(rng, -1.5, 1.5);
  } while (std::abs(ch.a) < 0.4);
  ch.quad.clear();
  for (int i = 0; i < n - 1; ++i) ch.quad.push_back(testrand::uniform(rng, -1.0, 1.0));
  return ch;
}

/// Random equivariant polynomial with a degenerate normal block at the origin:
/// tangential quadratic + x^2 y_i cross terms + x^4 + higher-weight junk.
ScalarField random_bform_field(testrand::Rng& rng, int n, bool with_x4) {
  using K = ExprNode::Kind;
  auto num = [](double v) { return make_number(v); };
  auto mul = [](ExprPtr a, ExprPtr b) { return make_binary(K::Mul, std::move(a), std::move(b)); };
  ExprPtr sum;
  auto add_term = [&](ExprPtr t) {
    sum = sum ? make_binary(K::Add, std::move(sum), std::move(t)) : std::move(t);
  };

  for (int i = 1; i < n; ++i)
    for (int j = i; j < n; ++j)
      add_term(mul(num(testrand::uniform(rng, -1.0, 1.0)), mul(make_var(i), make_var(j))));
  for (int i = 1; i < n; ++i)
    add_term(mul(num(testrand::uniform(rng, -1.0, 1.0)), mul(make_pow(make_var(0), 2), make_var(i))));
  if (with_x4) add_term(mul(num(testrand::uniform(rng, -1.0, 1.0)), make_pow(make_var(0), 4)));
  // higher-weight junk, invisible to the weighted quadratic form
  add_term(mul(num(testrand::uniform(rng, -0.5, 0.5)),
               mul(make_pow(make_var(0), 2), make_pow(make_var(1), 2))));
  add_term(mul(num(testrand::uniform(rng, -0.5, 0.5)), make_pow(make_var(1), 3)));
  return ScalarField(sum, n);
}

double max_coeff_gap(const Jet& a, const Jet& b) {
  double worst = 0.0;
  for (int i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

/// Largest coefficient on a slot of the wrong x-parity (want = 0 checks even
/// slots of an odd jet, want = 1 checks odd slots of an even jet).
double parity_violation(const Jet& j, int odd_parity_expected) {
  double worst = 0.0;
  for (int i = 0; i < j.size(); ++i)
    if (j.table().at(i).e[0] % 2 != odd_parity_expected)
      worst = std::max(worst, std::abs(j[i]));
  return worst;
}

Jet scrambled(const Jet& g, testrand::Rng& rng, bool equivariant) {
  const int n = g.n();
  Mat lin(n);
  do {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (equivariant && ((i == 0) != (j == 0))) {
          lin(i, j) = 0.0;
          continue;
        }
        lin(i, j) = testrand::uniform(rng, -1.0, 1.0);
      }
  } while (std::abs(mat_det(lin)) < 0.3);
  JetMap map;
  for (int i = 0; i < n; ++i) {
    Jet li(n, g.order());
    for (int j = 0; j < n; ++j)
      if (lin(i, j) != 0.0) li += Jet::variable(n, g.order(), j) * lin(i, j);
    map.push_back(li);
  }
  return jet_compose(g, map);
}

}  // namespace

TEST_CASE("kernel analysis identifies the degenerate direction") {
  SECTION("tangent kernel at the boundary fold of the running family") {
    ScalarField f = running_family(0.0, 0.5);
    CriticalPoint p = classify_point(f, std::vector<double>{0.0, 0.0});
    REQUIRE(p.degenerate);
    KernelInfo k = kernel_analysis(f, p);
    CHECK(k.dim == 1);
    CHECK(k.tau_type == TauType::Tangent);
    REQUIRE(k.v.size() == 2);
    CHECK(k.v[0] == 0.0);
    CHECK(k.v[1] == Catch::Approx(1.0).margin(1e-12));
  }

  SECTION("normal kernel where the normal block degenerates") {
    ScalarField f = running_family(-0.75, 0.5);
    CriticalPoint p = classify_point(f, std::vector<double>{0.0, 0.5});
    REQUIRE(p.degenerate);
    KernelInfo k = kernel_analysis(f, p);
    CHECK(k.dim == 1);
    CHECK(k.tau_type == TauType::Normal);
    CHECK(k.v[0] == 1.0);
    CHECK(k.v[1] == 0.0);
  }

  SECTION("fully degenerate Hessian has a two-dimensional kernel") {
    ScalarField f = running_family(0.0, 0.0);
    CriticalPoint p = classify_point(f, std::vector<double>{0.0, 0.0});
    REQUIRE(p.degenerate);
    KernelInfo k = kernel_analysis(f, p);
    CHECK(k.dim == 2);
    CHECK(k.v.empty());
  }

  SECTION("interior degenerate point") {
    ScalarField f = ScalarField::parse("(x-1)^2 + y1^3", 2);
    CriticalPoint p = classify_point(f, std::vector<double>{1.0, 0.0});
    REQUIRE(p.kind == PointKind::InteriorOrbit);
    REQUIRE(p.degenerate);
    KernelInfo k = kernel_analysis(f, p);
    CHECK(k.dim == 1);
    CHECK(k.tau_type == TauType::NotApplicable);
    CHECK(std::abs(k.v[0]) < 1e-12);
    CHECK(k.v[1] == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("the weighted quadratic form at normal-kernel points") {
  SECTION("running family at its collision point") {
    ScalarField f = running_family(-0.75, 0.5);
    BFormMatrix bf = compute_bform(f, boundary_point({0.0, 0.5}));
    CHECK(bf.alpha == Catch::Approx(0.0).margin(1e-12));
    CHECK(bf.alpha_i[0] == Catch::Approx(-2.0).margin(1e-12));
    CHECK(bf.alpha_ij(0, 0) == Catch::Approx(3.0).margin(1e-12));
    CHECK(bf.gamma(0, 0) == Catch::Approx(3.0).margin(1e-12));
    CHECK(bf.gamma(0, 1) == Catch::Approx(-1.0).margin(1e-12));
    CHECK(bf.gamma(1, 0) == Catch::Approx(-1.0).margin(1e-12));
    CHECK(bf.gamma(1, 1) == Catch::Approx(0.0).margin(1e-12));
    CHECK(bf.det == Catch::Approx(-1.0).margin(1e-10));
  }

  SECTION("collision unfolding at the degenerate parameter") {
    ScalarField f = ScalarField::parse("x^4 + y1^2", 2);
    BFormMatrix bf = compute_bform(f, boundary_point({0.0, 0.0}));
    CHECK(bf.alpha == Catch::Approx(24.0).margin(1e-12));
    CHECK(bf.alpha_i[0] == Catch::Approx(0.0).margin(1e-12));
    CHECK(bf.alpha_ij(0, 0) == Catch::Approx(2.0).margin(1e-12));
    CHECK(bf.det > 0.0);
  }

  SECTION("nondegenerate form despite a vanishing quartic term") {
    ScalarField f = ScalarField::parse("y1^2 + x^2*y1", 2);
    BFormMatrix bf = compute_bform(f, boundary_point({0.0, 0.0}));
    CHECK(bf.alpha == Catch::Approx(0.0).margin(1e-12));
    CHECK(bf.alpha_i[0] == Catch::Approx(2.0).margin(1e-12));
    CHECK(bf.gamma(0, 1) == Catch::Approx(1.0).margin(1e-12));
    CHECK(bf.det == Catch::Approx(-1.0).margin(1e-10));
  }
}

TEST_CASE("stratum classification") {
  SECTION("nondegenerate points get the residual tags") {
    ScalarField f = running_family(-0.75, 0.5);
    CriticalPoint p = classify_point(f, std::vector<double>{0.0, -0.5});
    // tangential block 6y = -3, normal block 2(mu - y) = 2
    REQUIRE_FALSE(p.degenerate);
    CHECK(classify_stratum(f, p).tag == StratumTag::F0Boundary);

    ScalarField g = ScalarField::parse("(x-1)^2 + y1^2", 2);
    CriticalPoint q = classify_point(g, std::vector<double>{1.0, 0.0});
    CHECK(classify_stratum(g, q).tag == StratumTag::F0Interior);
  }

  SECTION("interior fold") {
    ScalarField f = ScalarField::parse("(x-1)^2 + y1^3", 2);
    CriticalPoint p = classify_point(f, std::vector<double>{1.0, 0.0});
    StratumLabel s = classify_stratum(f, p);
    CHECK(s.tag == StratumTag::F1_1);
    CHECK(s.reason == CodimReason::None);
  }

  SECTION("boundary fold: the cubic tangential derivative is 6") {
    ScalarField f = running_family(0.0, 0.5);
    CriticalPoint p = classify_point(f, std::vector<double>{0.0, 0.0});
    CHECK(classify_stratum(f, p).tag == StratumTag::F1_21);
  }

  SECTION("collision stratum via the nondegenerate weighted form") {
    ScalarField f = running_family(-0.75, 0.5);
    CriticalPoint p = classify_point(f, std::vector<double>{0.0, 0.5});
    CHECK(classify_stratum(f, p).tag == StratumTag::F1_22);
  }

  SECTION("higher-codimension reasons") {
    ScalarField f = running_family(0.0, 0.0);
    CriticalPoint p = classify_point(f, std::vector<double>{0.0, 0.0});
    StratumLabel s = classify_stratum(f, p);
    CHECK(s.tag == StratumTag::CodimGe2);
    CHECK(s.reason == CodimReason::KernelDimGt1);

    ScalarField g = ScalarField::parse("x^2 + y1^4", 2);
    CriticalPoint q = classify_point(g, std::vector<double>{0.0, 0.0});
    StratumLabel t = classify_stratum(g, q);
    CHECK(t.tag == StratumTag::CodimGe2);
    CHECK(t.reason == CodimReason::CubicVanishes);

    ScalarField h = ScalarField::parse("y1^2 + x^2*y1^2", 2);
    CriticalPoint r = classify_point(h, std::vector<double>{0.0, 0.0});
    StratumLabel u = classify_stratum(h, r);
    CHECK(u.tag == StratumTag::CodimGe2);
    CHECK(u.reason == CodimReason::BFormDegenerate);
  }
}

TEST_CASE("congruence law for the weighted form determinant") {
  testrand::Rng rng(9001);
  int sign_flips = 0;
  for (int trial = 0; trial < 200; ++trial) {
    int n = testrand::uniform_int(rng, 2, 4);
    ScalarField f = random_bform_field(rng, n, trial % 3 != 0);
    std::vector<double> origin(std::size_t(n), 0.0);
    BFormMatrix base = compute_bform(f, boundary_point(origin));

    WeightedChange ch = random_change(rng, n);
    TransformedField tf(f, ch);
    BFormMatrix moved = compute_bform(tf, boundary_point(origin));

    double det_e = ch.det_e();
    double expected = det_e * det_e * base.det;
    CHECK(std::abs(moved.det - expected) <= 1e-8 * std::max(1.0, std::abs(expected)));
    if (std::abs(base.det) > 1e-6) {
      bool same_sign = (moved.det > 0) == (base.det > 0);
      CHECK(same_sign);
      if (!same_sign) ++sign_flips;
    }
  }
  CHECK(sign_flips == 0);
}

TEST_CASE("strata are invariant under equivariant coordinate changes") {
  testrand::Rng rng(9002);

  SECTION("interior fold exemplar") {
    ScalarField f = ScalarField::parse("(x-1)^2 + y1^3 + 0.2*y1^4", 2);
    for (int trial = 0; trial < 200; ++trial) {
      WeightedChange ch = random_change(rng, 2);
      TransformedField tf(f, ch);
      auto moved = ch.pullback(std::vector<double>{1.0, 0.0});
      CriticalPoint p = classify_point(tf, moved);
      REQUIRE(p.degenerate);
      CHECK(classify_stratum(tf, p).tag == StratumTag::F1_1);
    }
  }

  SECTION("boundary fold exemplar") {
    ScalarField f = running_family(0.0, 0.5);
    for (int trial = 0; trial < 200; ++trial) {
      WeightedChange ch = random_change(rng, 2);
      TransformedField tf(f, ch);
      auto moved = ch.pullback(std::vector<double>{0.0, 0.0});
      REQUIRE(moved[0] == 0.0);
      CriticalPoint p = classify_point(tf, moved);
      REQUIRE(p.degenerate);
      CHECK(classify_stratum(tf, p).tag == StratumTag::F1_21);
    }
  }

  SECTION("collision exemplar") {
    ScalarField f = running_family(-0.75, 0.5);
    for (int trial = 0; trial < 200; ++trial) {
      WeightedChange ch = random_change(rng, 2);
      TransformedField tf(f, ch);
      auto moved = ch.pullback(std::vector<double>{0.0, 0.5});
      CriticalPoint p = classify_point(tf, moved);
      REQUIRE(p.degenerate);
      CHECK(classify_stratum(tf, p).tag == StratumTag::F1_22);
    }
  }

  SECTION("codim >= 2 exemplar stays codim >= 2") {
    ScalarField f = running_family(0.0, 0.0);
    for (int trial = 0; trial < 50; ++trial) {
      WeightedChange ch = random_change(rng, 2);
      TransformedField tf(f, ch);
      CriticalPoint p = classify_point(tf, std::vector<double>{0.0, 0.0});
      StratumLabel s = classify_stratum(tf, p);
      CHECK(s.tag == StratumTag::CodimGe2);
      CHECK(s.reason == CodimReason::KernelDimGt1);
    }
  }
}

TEST_CASE("cubic normal form reduction") {
  SECTION("already-normal jets are fixed points") {
    Jet g(3, 4);
    auto set = [&](int a, int b, int c, double v) {
      MultiIndex m;
      m.n = 3;
      m.e[0] = std::uint8_t(a);
      m.e[1] = std::uint8_t(b);
      m.e[2] = std::uint8_t(c);
      g.raw(g.table().index_of(m)) = v;
    };
    set(2, 0, 0, 1.0);
    set(0, 2, 0, -1.0);
    set(0, 0, 3, 1.0);
    SymmetryMask none;
    none.n = 3;
    NormalFormSignature sig = reduce_normal_form_cubic(g, none);
    REQUIRE(sig.eps.size() == 2);
    CHECK(sig.eps[0] == -1);  // eigenvalues are reported ascending
    CHECK(sig.eps[1] == 1);
    CHECK(sig.degenerate_sign == 1);
    CHECK_FALSE(sig.quartic);
    CHECK(sig.residual < 1e-12);
  }

  SECTION("mixed cubic terms are removable") {
    ScalarField f = ScalarField::parse("x^2 + y1^3 + 0.3*x*y1^2", 2);
    Jet j = f.jet_at(std::vector<double>{0.0, 0.0}, 4);
    SymmetryMask none;
    none.n = 2;
    NormalFormSignature sig = reduce_normal_form_cubic(j, none);
    REQUIRE(sig.eps.size() == 1);
    CHECK(sig.eps[0] == 1);
    CHECK(sig.degenerate_sign == 1);
    CHECK(sig.residual < 1e-8);
    Jet recon = jet_compose(normal_form_model(sig, 2, 4), sig.inverse);
    Jet in = j;
    in.raw(0) = 0.0;
    CHECK(max_coeff_gap(recon, in) < 1e-8);
  }

  SECTION("boundary case keeps the change equivariant") {
    ScalarField f = ScalarField::parse("x^2 + y1^3 + 0.1*x^2*y1", 2);
    Jet j = f.jet_at(std::vector<double>{0.0, 0.0}, 4);
    NormalFormSignature sig = reduce_normal_form_cubic(j, SymmetryMask::x_odd(2));
    REQUIRE(sig.eps.size() == 1);
    CHECK(sig.eps[0] == 1);  // eps_x
    CHECK(sig.degenerate_sign == 1);
    CHECK(sig.residual < 1e-8);
    // x-slot of the change is odd in x, tangential slots are even - exactly
    CHECK(parity_violation(sig.forward[0], 1) == 0.0);
    CHECK(parity_violation(sig.forward[1], 0) == 0.0);
    CHECK(parity_violation(sig.inverse[0], 1) == 0.0);
    CHECK(parity_violation(sig.inverse[1], 0) == 0.0);
  }

  SECTION("wrong stratum is rejected") {
    ScalarField f = ScalarField::parse("x^2 + y1^4", 2);
    Jet j = f.jet_at(std::vector<double>{0.0, 0.0}, 4);
    CHECK_THROWS_AS(reduce_normal_form_cubic(j, SymmetryMask::x_odd(2)), domain_error);
  }
}

TEST_CASE("quartic normal form reduction") {
  SECTION("exemplars") {
    auto reduce_field = [](const char* text) {
      ScalarField f = ScalarField::parse(text, 2);
      Jet j = f.jet_at(std::vector<double>{0.0, 0.0}, 4);
      return reduce_normal_form_quartic(j, SymmetryMask::x_odd(2));
    };

    NormalFormSignature a = reduce_field("y1^2 + x^4");
    CHECK(a.eps == std::vector<int>{1});
    CHECK(a.degenerate_sign == 1);
    CHECK(a.quartic);
    CHECK(a.residual < 1e-12);

    NormalFormSignature b = reduce_field("y1^2 - x^4");
    CHECK(b.degenerate_sign == -1);

    NormalFormSignature c = reduce_field("2*y1^2 + 3*x^4");
    CHECK(c.eps == std::vector<int>{1});
    CHECK(c.degenerate_sign == 1);
    CHECK(c.residual < 1e-8);
  }

  SECTION("the quartic coefficient can come entirely from the cross term") {
    ScalarField f = ScalarField::parse("y1^2 + x^2*y1", 2);
    Jet j = f.jet_at(std::vector<double>{0.0, 0.0}, 4);
    NormalFormSignature sig = reduce_normal_form_quartic(j, SymmetryMask::x_odd(2));
    CHECK(sig.eps == std::vector<int>{1});
    CHECK(sig.degenerate_sign == -1);  // Schur complement -1/4
    CHECK(sig.residual < 1e-8);
    Jet recon = jet_compose(normal_form_model(sig, 2, 4), sig.inverse);
    Jet in = j;
    in.raw(0) = 0.0;
    CHECK(max_coeff_gap(recon, in) < 1e-8);
  }

  SECTION("degenerate weighted form is rejected") {
    ScalarField f = ScalarField::parse("y1^2 + x^6", 2);
    Jet j = f.jet_at(std::vector<double>{0.0, 0.0}, 4);
    CHECK_THROWS_AS(reduce_normal_form_quartic(j, SymmetryMask::x_odd(2)), domain_error);
  }
}

TEST_CASE("reduction soundness on random stratum members") {
  testrand::Rng rng(9003);

  auto set_coeff = [](Jet& g, std::initializer_list<int> exps, double v) {
    MultiIndex m;
    m.n = g.n();
    int i = 0;
    for (int e : exps) m.e[i++] = std::uint8_t(e);
    g.raw(g.table().index_of(m)) = v;
  };

  SECTION("interior cubic jets") {
    for (int trial = 0; trial < 50; ++trial) {
      int n = testrand::uniform_int(rng, 2, 3);
      Jet g(n, 4);
      // diagonal quadratic with an exact kernel in the last slot
      for (int i = 0; i < n - 1; ++i) {
        MultiIndex m;
        m.n = n;
        m.e[i] = 2;
        double c;
        do {
          c = testrand::uniform(rng, -2.0, 2.0);
        } while (std::abs(c) < 0.5);
        g.raw(g.table().index_of(m)) = c;
      }
      // random cubic and quartic content, with a solid kernel-direction cubic
      for (int idx = 0; idx < g.size(); ++idx)
        if (g.table().at(idx).degree() >= 3) g.raw(idx) = testrand::uniform(rng, -0.3, 0.3);
      MultiIndex d3;
      d3.n = n;
      d3.e[n - 1] = 3;
      g.raw(g.table().index_of(d3)) += (testrand::uniform(rng) > 0 ? 1.0 : -1.0);

      Jet input = scrambled(g, rng, false);
      SymmetryMask none;
      none.n = n;
      NormalFormSignature sig = reduce_normal_form_cubic(input, none);
      CHECK(sig.residual < 1e-8);
      for (int e : sig.eps) CHECK((e == 1 || e == -1));
      Jet recon = jet_compose(normal_form_model(sig, n, 4), sig.inverse);
      CHECK(max_coeff_gap(recon, input) < 1e-8 * std::max(1.0, input.max_abs_coeff()));
    }
  }

  SECTION("boundary cubic jets") {
    for (int trial = 0; trial < 50; ++trial) {
      int n = testrand::uniform_int(rng, 2, 3);
      Jet g(n, 4);
      set_coeff(g, {2}, testrand::uniform(rng) > 0 ? 1.3 : -1.3);  // x^2 block
      for (int i = 1; i < n - 1; ++i) {
        MultiIndex m;
        m.n = n;
        m.e[i] = 2;
        g.raw(g.table().index_of(m)) = testrand::uniform(rng) > 0 ? 0.9 : -0.9;
      }
      SymmetryMask mask = SymmetryMask::x_odd(n);
      for (int idx = 0; idx < g.size(); ++idx) {
        const MultiIndex& m = g.table().at(idx);
        if (m.degree() >= 3 && mask.monomial_parity(m) > 0)
          g.raw(idx) = testrand::uniform(rng, -0.3, 0.3);
      }
      MultiIndex d3;
      d3.n = n;
      d3.e[n - 1] = 3;
      g.raw(g.table().index_of(d3)) += (testrand::uniform(rng) > 0 ? 1.0 : -1.0);

      Jet input = scrambled(g, rng, true);
      NormalFormSignature sig = reduce_normal_form_cubic(input, mask);
      CHECK(sig.residual < 1e-8);
      CHECK(parity_violation(sig.forward[0], 1) == 0.0);
      for (int i = 1; i < n; ++i) CHECK(parity_violation(sig.forward[std::size_t(i)], 0) == 0.0);
      Jet recon = jet_compose(normal_form_model(sig, n, 4), sig.inverse);
      CHECK(max_coeff_gap(recon, input) < 1e-8 * std::max(1.0, input.max_abs_coeff()));
    }
  }

  SECTION("boundary quartic jets") {
    for (int trial = 0; trial < 50; ++trial) {
      int n = testrand::uniform_int(rng, 2, 3);
      Jet g(n, 4);
      for (int i = 1; i < n; ++i) {
        MultiIndex m;
        m.n = n;
        m.e[i] = 2;
        double c;
        do {
          c = testrand::uniform(rng, -2.0, 2.0);
        } while (std::abs(c) < 0.5);
        g.raw(g.table().index_of(m)) = c;
      }
      set_coeff(g, {4}, testrand::uniform(rng) > 0 ? 1.1 : -1.1);
      SymmetryMask mask = SymmetryMask::x_odd(n);
      for (int idx = 0; idx < g.size(); ++idx) {
        const MultiIndex& m = g.table().at(idx);
        if (m.degree() >= 3 && m.e[0] != 4 && mask.monomial_parity(m) > 0 &&
            g[idx] == 0.0)
          g.raw(idx) = testrand::uniform(rng, -0.3, 0.3);
      }

      Jet input = scrambled(g, rng, true);
      NormalFormSignature sig = reduce_normal_form_quartic(input, mask);
      CHECK(sig.quartic);
      CHECK(sig.residual < 1e-8);
      CHECK(parity_violation(sig.forward[0], 1) == 0.0);
      for (int i = 1; i < n; ++i) CHECK(parity_violation(sig.forward[std::size_t(i)], 0) == 0.0);
      Jet recon = jet_compose(normal_form_model(sig, n, 4), sig.inverse);
      CHECK(max_coeff_gap(recon, input) < 1e-8 * std::max(1.0, input.max_abs_coeff()));
    }
  }
}
