#pragma once

#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "morsetrack/expression.hpp"
#include "morsetrack/jet.hpp"

namespace morsetrack {

// ---------------------------------------------------------------------------
// ScalarField: an expression over (x, y1..y_{n-1}) with all parameters bound
// ---------------------------------------------------------------------------

class ScalarField {
 public:
  ScalarField(ExprPtr expr, int n, ParamMap params = {})
      : expr_(std::move(expr)), n_(n), params_(std::move(params)) {
    if (n_ < 1 || n_ > kMaxVars) throw validation_error("field dimension must be 1..8");
    if (max_var_index(expr_) >= n_)
      throw validation_error("field references a variable beyond its dimension");
    std::vector<std::string> used;
    collect_params(expr_, used);
    for (const auto& name : used)
      if (!params_.count(name))
        throw validation_error("field parameter '" + name + "' is unbound");
  }

  static ScalarField parse(std::string_view text, int n, ParamMap params = {}) {
    return ScalarField(parse_expression(text), n, std::move(params));
  }

  int dimension() const { return n_; }
  const ExprPtr& expr() const { return expr_; }
  const ParamMap& params() const { return params_; }

  double value_at(std::span<const double> p) const { return eval(expr_, p, params_); }

  Jet jet_at(std::span<const double> p, int order) const {
    if (int(p.size()) != n_) throw domain_error("jet_at: wrong point dimension");
    std::vector<Jet> vars;
    vars.reserve(std::size_t(n_));
    for (int i = 0; i < n_; ++i) vars.push_back(Jet::variable(n_, order, i, p[std::size_t(i)]));
    return eval_jet(expr_, vars, params_);
  }

  ScalarField with_expr(ExprPtr e) const { return ScalarField(std::move(e), n_, params_); }

 private:
  ExprPtr expr_;
  int n_;
  ParamMap params_;
};

// ---------------------------------------------------------------------------
// Equivariance of a field under (x, y) -> (-x, y)
// ---------------------------------------------------------------------------

struct EquivarianceReport {
  enum class Method { Exact, Numeric };
  Method method = Method::Numeric;
  bool pass = false;
  double max_violation = 0.0;     // coefficient magnitude (exact) or |odd part| (numeric)
  std::vector<double> witness;    // point witnessing the failure (empty on pass)
  std::string detail;
};

namespace detail {

inline double odd_part_at(const ScalarField& f, std::span<const double> p) {
  std::vector<double> q(p.begin(), p.end());
  q[0] = -q[0];
  return 0.5 * (f.value_at(p) - f.value_at(q));
}

}  // namespace detail

/// Decide whether f(-x, y) == f(x, y).  Polynomial fields get an exact verdict
/// from their expansion; everything else is sampled.  Failing verdicts carry a
/// witness point.
inline EquivarianceReport check_equivariance(const ScalarField& f) {
  EquivarianceReport rep;
  const int n = f.dimension();

  auto sample_witness = [&](double& worst) {
    std::mt19937_64 rng(0x5eedc0de);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> best(std::size_t(n), 0.0);
    worst = -1.0;
    int valid = 0;
    for (int t = 0; t < 1000; ++t) {
      std::vector<double> p(std::size_t(n), 0.0);
      for (auto& c : p) c = dist(rng);
      double v;
      try {
        v = std::abs(detail::odd_part_at(f, p));
      } catch (const eval_error&) {
        continue;  // point outside the field's domain
      }
      ++valid;
      if (v > worst) {
        worst = v;
        best = p;
      }
    }
    if (valid < 100)
      throw validation_error("could not sample the field's domain to test equivariance");
    return best;
  };

  auto poly = try_expand_polynomial(f.expr(), n, f.params());
  if (poly) {
    rep.method = EquivarianceReport::Method::Exact;
    double max_abs = 0.0, max_odd = 0.0;
    for (const auto& [mono, v] : poly->c) {
      max_abs = std::max(max_abs, std::abs(v));
      if (mono[0] % 2 == 1) max_odd = std::max(max_odd, std::abs(v));
    }
    rep.max_violation = max_odd;
    rep.pass = max_odd <= 1e-14 * std::max(1.0, max_abs);
    rep.detail = rep.pass ? "polynomial expansion has no odd-in-x terms"
                          : "polynomial expansion has odd-in-x terms";
    if (!rep.pass) {
      double worst;
      rep.witness = sample_witness(worst);
    }
    return rep;
  }

  rep.method = EquivarianceReport::Method::Numeric;
  double scale = 1.0;
  {
    std::mt19937_64 rng(0x5eedc0de);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (int t = 0; t < 1000; ++t) {
      std::vector<double> p(std::size_t(n), 0.0);
      for (auto& c : p) c = dist(rng);
      try {
        scale = std::max(scale, std::abs(f.value_at(p)));
      } catch (const eval_error&) {
      }
    }
  }
  double worst;
  std::vector<double> point = sample_witness(worst);
  rep.max_violation = worst;
  rep.pass = worst <= 1e-9 * scale;
  rep.detail = "sampled at 1000 points";
  if (!rep.pass) rep.witness = point;
  return rep;
}

/// Even part of the field in x: (f(x,y) + f(-x,y)) / 2.  The result is always
/// equivariant and agrees with f wherever f already was.
inline ScalarField symmetrize(const ScalarField& f) {
  ExprPtr mirrored = substitute_var(f.expr(), 0, make_neg(make_var(0)));
  ExprPtr avg = make_binary(ExprNode::Kind::Mul, make_number(0.5),
                            make_binary(ExprNode::Kind::Add, f.expr(), mirrored));
  return f.with_expr(avg);
}

// ---------------------------------------------------------------------------
// FamilySpec: a field whose parameters follow smooth paths in sigma
// ---------------------------------------------------------------------------

class FamilySpec {
 public:
  FamilySpec(ExprPtr field, int n, std::map<std::string, ExprPtr> paths, ParamMap constants = {})
      : field_(std::move(field)), n_(n), paths_(std::move(paths)), constants_(std::move(constants)) {
    if (n_ < 1 || n_ > kMaxVars) throw validation_error("field dimension must be 1..8");
    if (max_var_index(field_) >= n_)
      throw validation_error("field references a variable beyond its dimension");
    for (const auto& [name, path] : paths_) {
      if (max_var_index(path) >= 0)
        throw validation_error("parameter path '" + name + "' must not reference variables");
      std::vector<std::string> used;
      collect_params(path, used);
      for (const auto& u : used)
        if (u != "sigma")
          throw validation_error("parameter path '" + name + "' may only depend on sigma");
      path_derivs_[name] = diff_param(path, "sigma");
    }
    std::vector<std::string> used;
    collect_params(field_, used);
    for (const auto& name : used)
      if (!paths_.count(name) && !constants_.count(name))
        throw validation_error("field parameter '" + name + "' has neither a path nor a value");
  }

  int dimension() const { return n_; }
  const ExprPtr& field_expr() const { return field_; }
  const std::map<std::string, ExprPtr>& paths() const { return paths_; }

  ParamMap params_at(double sigma) const {
    ParamMap out = constants_;
    ParamMap s{{"sigma", sigma}};
    for (const auto& [name, path] : paths_)
      out[name] = eval(path, std::span<const double>{}, s);
    return out;
  }

  ScalarField at(double sigma) const { return ScalarField(field_, n_, params_at(sigma)); }

  /// The field  dPhi/dsigma  at a frozen sigma: sum over parameters of
  /// (dPhi/dparam) * (dparam/dsigma).  Useful as an ordinary scalar field.
  ScalarField sigma_derivative(double sigma) const {
    ParamMap s{{"sigma", sigma}};
    ExprPtr total = make_number(0.0);
    for (const auto& [name, dpath] : path_derivs_) {
      double rate = eval(dpath, std::span<const double>{}, s);
      ExprPtr term = make_binary(ExprNode::Kind::Mul, make_number(rate),
                                 diff_param(field_, name));
      total = make_binary(ExprNode::Kind::Add, total, term);
    }
    return ScalarField(total, n_, params_at(sigma));
  }

 private:
  ExprPtr field_;
  int n_;
  std::map<std::string, ExprPtr> paths_;
  std::map<std::string, ExprPtr> path_derivs_;
  ParamMap constants_;
};

}  // namespace morsetrack
