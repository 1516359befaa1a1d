#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "morsetrack/expression.hpp"
#include "support/fd_oracle.hpp"
#include "support/random_gen.hpp"

using namespace morsetrack;

namespace {

int count_top_level_summands(const ExprPtr& e) {
  if (e->kind == ExprNode::Kind::Add || e->kind == ExprNode::Kind::Sub)
    return count_top_level_summands(e->a) + 1;
  return 1;
}

double sparse_eval(const SparsePoly& p, const std::vector<double>& x) {
  double s = 0.0;
  for (const auto& [mono, v] : p.c) {
    double t = v;
    for (int i = 0; i < p.n; ++i)
      for (int k = 0; k < mono[std::size_t(i)]; ++k) t *= x[std::size_t(i)];
    s += t;
  }
  return s;
}

}  // namespace

TEST_CASE("parser handles the running example") {
  ExprPtr e = parse_expression("y1^3 - x^2*y1 + lambda*y1 + mu*x^2");
  CHECK(count_top_level_summands(e) == 4);

  ParamMap params{{"lambda", -0.75}, {"mu", 0.5}};
  std::vector<double> at{2.0, 3.0};  // x = 2, y1 = 3
  // 27 - 4*3 + (-0.75)*3 + 0.5*4 = 27 - 12 - 2.25 + 2 = 14.75
  CHECK(eval(e, at, params) == Catch::Approx(14.75).margin(1e-14));

  std::vector<std::string> names;
  collect_params(e, names);
  REQUIRE(names.size() == 2);
  CHECK(names[0] == "lambda");
  CHECK(names[1] == "mu");
  CHECK(max_var_index(e) == 1);
}

TEST_CASE("operator precedence and unary minus") {
  ParamMap none;
  std::vector<double> at{3.0};
  CHECK(eval(parse_expression("-x^2"), at, none) == -9.0);
  CHECK(eval(parse_expression("(-x)^2"), at, none) == 9.0);
  CHECK(eval(parse_expression("2*x^2"), at, none) == 18.0);
  CHECK(eval(parse_expression("1 - x - x"), at, none) == -5.0);
  CHECK(eval(parse_expression("12/x/2"), at, none) == 2.0);
  CHECK(eval(parse_expression("x^2^3"), at, none) == 6561.0);  // x^(2^3)

  std::vector<double> at2{1.0, 2.0};
  CHECK(eval(parse_expression("2*(x+y1)^2"), at2, none) == 18.0);
}

TEST_CASE("numeric literals") {
  ParamMap none;
  std::vector<double> at{0.0};
  CHECK(eval(parse_expression("2e3"), at, none) == 2000.0);
  CHECK(eval(parse_expression("1.5e-2"), at, none) == 0.015);
  CHECK(eval(parse_expression(".5"), at, none) == 0.5);
  CHECK(eval(parse_expression("3.14159"), at, none) == 3.14159);
}

TEST_CASE("parse errors carry byte offsets") {
  auto offset_of = [](const char* src) -> std::size_t {
    try {
      parse_expression(src);
    } catch (const parse_error& err) {
      return err.offset;
    }
    FAIL("expected a parse error");
    return std::size_t(-1);
  };

  CHECK(offset_of("y1^^2") == 3);       // second '^' where an exponent should be
  CHECK(offset_of("x + ") == 4);        // dangling operator
  CHECK(offset_of("(x + y1") == 7);     // missing ')'
  CHECK(offset_of("x + y9") == 4);      // variable index out of range
  CHECK(offset_of("a1 + x") == 0);      // digits are not allowed in parameter names
  CHECK(offset_of("sin 2") == 4);       // function call needs parentheses
  CHECK(offset_of("x @ y1") == 2);      // stray character
  CHECK(offset_of("2 2") == 2);         // trailing input

  try {
    parse_expression("y1^^2");
    FAIL("expected a parse error");
  } catch (const parse_error& err) {
    CHECK(std::string(err.what()).find("byte 3") != std::string::npos);
  }
}

TEST_CASE("evaluation errors carry byte offsets") {
  ParamMap none;
  std::vector<double> at{1.0};

  try {
    eval(parse_expression("1/(x - 1)"), at, none);
    FAIL("expected an eval error");
  } catch (const eval_error& err) {
    CHECK(err.offset == 1);
  }

  try {
    eval(parse_expression("x + sqrt(0 - 2)"), at, none);
    FAIL("expected an eval error");
  } catch (const eval_error& err) {
    CHECK(err.offset == 4);
  }

  try {
    eval(parse_expression("x + lambda"), at, none);
    FAIL("expected an eval error");
  } catch (const eval_error& err) {
    CHECK(err.offset == 4);
    CHECK(std::string(err.what()).find("lambda") != std::string::npos);
  }
}

TEST_CASE("pretty-printing reaches a fixed point after one round trip") {
  const char* samples[] = {
      "y1^3 - x^2*y1 + lambda*y1 + mu*x^2",
      "-x^2",
      "(-x)^2",
      "a*(b*c)",
      "x - (y1 - y2)",
      "12/x/2",
      "cos(y1) + x^2 + x*sin(y1)^2",
      "exp(-(x^2 + y1^2))",
      "2*(x+y1)^2",
      "x^2^3",
      "1/(1 + x)",
      "sqrt(1 + x^2)",
      "--x",
      "0.1*x + 2.5e-3",
  };
  for (const char* s : samples) {
    INFO("source: " << s);
    std::string once = to_string(parse_expression(s));
    std::string twice = to_string(parse_expression(once));
    CHECK(once == twice);
  }
}

TEST_CASE("pretty-printed text evaluates identically to the original") {
  testrand::Rng rng(2024);
  const char* samples[] = {
      "y1^3 - x^2*y1 + lambda*y1 + mu*x^2",
      "exp(-(x^2 + y1^2)) * cos(3*y1) - x/(2 + sin(x))",
      "sqrt(4 + x^2)^3 / (1 + y1^2)",
  };
  ParamMap params{{"lambda", 0.3}, {"mu", -1.2}};
  for (const char* s : samples) {
    ExprPtr orig = parse_expression(s);
    ExprPtr round = parse_expression(to_string(orig));
    for (int t = 0; t < 50; ++t) {
      std::vector<double> at{testrand::uniform(rng, -2, 2), testrand::uniform(rng, -2, 2)};
      double a = eval(orig, at, params);
      double b = eval(round, at, params);
      CHECK(a == b);  // printing must not perturb values at all
    }
  }
}

TEST_CASE("jet evaluation matches finite differences") {
  ExprPtr e = parse_expression("exp(x*y1/4) * cos(y1) + sqrt(4 + x^2) - lambda*x^2*y1");
  ParamMap params{{"lambda", 0.7}};
  testrand::Rng rng(77);

  for (int t = 0; t < 20; ++t) {
    std::vector<double> at{testrand::uniform(rng, -1.5, 1.5), testrand::uniform(rng, -1.5, 1.5)};
    std::vector<Jet> vars;
    for (int i = 0; i < 2; ++i) vars.push_back(Jet::variable(2, 4, i, at[std::size_t(i)]));
    Jet j = eval_jet(e, vars, params);

    oracle::Fn f = [&](const std::vector<double>& p) { return eval(e, p, params); };
    CHECK(j.value() == Catch::Approx(f(at)).margin(1e-13));
    auto grad = j.gradient();
    for (int i = 0; i < 2; ++i)
      CHECK(grad[std::size_t(i)] ==
            Catch::Approx(oracle::fd_partial(f, at, i)).margin(2e-6));
    Mat h = j.hessian();
    for (int i = 0; i < 2; ++i)
      for (int k = 0; k < 2; ++k)
        CHECK(h(i, k) == Catch::Approx(oracle::fd_second(f, at, i, k)).margin(5e-5));
  }
}

TEST_CASE("symbolic differentiation matches finite differences") {
  ExprPtr e = parse_expression("exp(x*y1/3) * cos(2*y1) + sqrt(9 + x^2) / (2 + sin(x)) + c*x^3");
  ParamMap params{{"c", -0.4}};
  ExprPtr dx = diff_var(e, 0);
  ExprPtr dy = diff_var(e, 1);
  ExprPtr dc = diff_param(e, "c");

  testrand::Rng rng(4242);
  for (int t = 0; t < 25; ++t) {
    std::vector<double> at{testrand::uniform(rng, -1, 1), testrand::uniform(rng, -1, 1)};
    oracle::Fn f = [&](const std::vector<double>& p) { return eval(e, p, params); };
    CHECK(eval(dx, at, params) == Catch::Approx(oracle::fd_partial(f, at, 0)).margin(2e-6));
    CHECK(eval(dy, at, params) == Catch::Approx(oracle::fd_partial(f, at, 1)).margin(2e-6));

    // derivative in the parameter: vary c by central differences
    double h = 1e-5;
    ParamMap up{{"c", -0.4 + h}}, dn{{"c", -0.4 - h}};
    double fd = (eval(e, at, up) - eval(e, at, dn)) / (2 * h);
    CHECK(eval(dc, at, params) == Catch::Approx(fd).margin(2e-6));
  }
}

TEST_CASE("variable substitution") {
  ExprPtr e = parse_expression("x^3 + x*y1 + cos(x) + y1^2");
  ExprPtr mirrored = substitute_var(e, 0, make_neg(make_var(0)));
  ExprPtr at_zero = substitute_var(e, 0, make_number(0.0));

  ParamMap none;
  testrand::Rng rng(9);
  for (int t = 0; t < 30; ++t) {
    double x = testrand::uniform(rng, -2, 2), y = testrand::uniform(rng, -2, 2);
    std::vector<double> p{x, y}, q{-x, y}, z{0.0, y};
    CHECK(eval(mirrored, p, none) == Catch::Approx(eval(e, q, none)).margin(1e-14));
    CHECK(eval(at_zero, p, none) == Catch::Approx(eval(e, z, none)).margin(1e-14));
  }
}

TEST_CASE("polynomial expansion is exact when the expression is polynomial") {
  ParamMap params{{"lambda", -0.75}, {"mu", 0.5}};

  SECTION("the running example expands with the right coefficients") {
    auto p = try_expand_polynomial(
        parse_expression("y1^3 - x^2*y1 + lambda*y1 + mu*x^2"), 2, params);
    REQUIRE(p.has_value());
    std::array<int, kMaxVars> y3{}, x2y{}, y{}, x2{};
    y3[1] = 3;
    x2y[0] = 2;
    x2y[1] = 1;
    y[1] = 1;
    x2[0] = 2;
    CHECK(p->c.at(y3) == 1.0);
    CHECK(p->c.at(x2y) == -1.0);
    CHECK(p->c.at(y) == -0.75);
    CHECK(p->c.at(x2) == 0.5);
    CHECK(p->c.size() == 4);
  }

  SECTION("binomial powers expand correctly") {
    auto p = try_expand_polynomial(parse_expression("(x + y1)^3"), 2, ParamMap{});
    REQUIRE(p.has_value());
    std::array<int, kMaxVars> x2y{};
    x2y[0] = 2;
    x2y[1] = 1;
    CHECK(p->c.at(x2y) == 3.0);
  }

  SECTION("functions of constants fold, functions of variables do not expand") {
    auto ok = try_expand_polynomial(parse_expression("sin(2)*x"), 1, ParamMap{});
    REQUIRE(ok.has_value());
    std::array<int, kMaxVars> x1{};
    x1[0] = 1;
    CHECK(ok->c.at(x1) == Catch::Approx(std::sin(2.0)).margin(1e-16));

    CHECK_FALSE(try_expand_polynomial(parse_expression("cos(x)*y1"), 2, ParamMap{}).has_value());
    CHECK_FALSE(try_expand_polynomial(parse_expression("x/y1"), 2, ParamMap{}).has_value());
  }

  SECTION("division by a constant subexpression is allowed") {
    auto p = try_expand_polynomial(parse_expression("x/2 + y1/(1+1)"), 2, ParamMap{});
    REQUIRE(p.has_value());
    std::array<int, kMaxVars> x1{}, y1{};
    x1[0] = 1;
    y1[1] = 1;
    CHECK(p->c.at(x1) == 0.5);
    CHECK(p->c.at(y1) == 0.5);
  }

  SECTION("expansion agrees with direct evaluation on random points") {
    testrand::Rng rng(31);
    ExprPtr e = parse_expression("(x^2 - y1 + 1)^3 * (y2 - 2*x) - mu*(x*y1*y2)^2");
    ParamMap ps{{"mu", 1.25}};
    auto p = try_expand_polynomial(e, 3, ps);
    REQUIRE(p.has_value());
    for (int t = 0; t < 40; ++t) {
      std::vector<double> at{testrand::uniform(rng, -1, 1), testrand::uniform(rng, -1, 1),
                             testrand::uniform(rng, -1, 1)};
      CHECK(sparse_eval(*p, at) == Catch::Approx(eval(e, at, ps)).margin(1e-12));
    }
  }
}
