#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "morsetrack/errors.hpp"
#include "morsetrack/jet.hpp"

namespace morsetrack {

// ---------------------------------------------------------------------------
// AST
// ---------------------------------------------------------------------------

enum class FuncKind { Sin, Cos, Exp, Sqrt };

struct ExprNode;
using ExprPtr = std::shared_ptr<const ExprNode>;

/// Immutable expression tree.  Variable indices: 0 is the normal coordinate x,
/// 1..7 are the boundary coordinates y1..y7.  Anything else named is a parameter.
struct ExprNode {
  enum class Kind { Number, Var, Param, Add, Sub, Mul, Div, Pow, Neg, Func };

  Kind kind;
  double number = 0.0;
  int var = -1;
  std::string param;
  FuncKind func = FuncKind::Sin;
  long long exponent = 0;
  ExprPtr a, b;
  std::size_t offset = 0;  // byte offset in the source text, for diagnostics
};

inline ExprPtr make_number(double v, std::size_t off = 0) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprNode::Kind::Number;
  n->number = v;
  n->offset = off;
  return n;
}

inline ExprPtr make_var(int idx, std::size_t off = 0) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprNode::Kind::Var;
  n->var = idx;
  n->offset = off;
  return n;
}

inline ExprPtr make_param(std::string name, std::size_t off = 0) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprNode::Kind::Param;
  n->param = std::move(name);
  n->offset = off;
  return n;
}

inline ExprPtr make_binary(ExprNode::Kind k, ExprPtr a, ExprPtr b, std::size_t off = 0) {
  auto n = std::make_shared<ExprNode>();
  n->kind = k;
  n->a = std::move(a);
  n->b = std::move(b);
  n->offset = off;
  return n;
}

inline ExprPtr make_pow(ExprPtr base, long long e, std::size_t off = 0) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprNode::Kind::Pow;
  n->a = std::move(base);
  n->exponent = e;
  n->offset = off;
  return n;
}

inline ExprPtr make_neg(ExprPtr c, std::size_t off = 0) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprNode::Kind::Neg;
  n->a = std::move(c);
  n->offset = off;
  return n;
}

inline ExprPtr make_func(FuncKind f, ExprPtr arg, std::size_t off = 0) {
  auto n = std::make_shared<ExprNode>();
  n->kind = ExprNode::Kind::Func;
  n->func = f;
  n->a = std::move(arg);
  n->offset = off;
  return n;
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------
//
//   expr   := term (('+'|'-') term)*
//   term   := factor (('*'|'/') factor)*
//   factor := atom ('^' uint)* | '-' factor
//   atom   := number | ident | func '(' expr ')' | '(' expr ')'
//
// '+','-','*','/' are left associative, '^' (integer exponents only) folds
// right associatively and binds tighter than unary minus.

namespace detail {

class Parser {
 public:
  explicit Parser(std::string_view src) : src_(src) {}

  ExprPtr run() {
    ExprPtr e = parse_expr();
    skip_ws();
    if (pos_ != src_.size()) throw parse_error("unexpected trailing input", pos_);
    return e;
  }

 private:
  void skip_ws() {
    while (pos_ < src_.size() && (src_[pos_] == ' ' || src_[pos_] == '\t')) ++pos_;
  }

  bool peek(char c) {
    skip_ws();
    return pos_ < src_.size() && src_[pos_] == c;
  }

  bool accept(char c) {
    if (peek(c)) {
      ++pos_;
      return true;
    }
    return false;
  }

  ExprPtr parse_expr() {
    ExprPtr lhs = parse_term();
    for (;;) {
      skip_ws();
      std::size_t off = pos_;
      if (accept('+'))
        lhs = make_binary(ExprNode::Kind::Add, lhs, parse_term(), off);
      else if (accept('-'))
        lhs = make_binary(ExprNode::Kind::Sub, lhs, parse_term(), off);
      else
        return lhs;
    }
  }

  ExprPtr parse_term() {
    ExprPtr lhs = parse_factor();
    for (;;) {
      skip_ws();
      std::size_t off = pos_;
      if (accept('*'))
        lhs = make_binary(ExprNode::Kind::Mul, lhs, parse_factor(), off);
      else if (accept('/'))
        lhs = make_binary(ExprNode::Kind::Div, lhs, parse_factor(), off);
      else
        return lhs;
    }
  }

  ExprPtr parse_factor() {
    skip_ws();
    std::size_t off = pos_;
    if (accept('-')) return make_neg(parse_factor(), off);
    ExprPtr base = parse_atom();
    if (!peek('^')) return base;
    // collect the exponent chain and fold it right associatively
    std::vector<long long> exps;
    std::size_t pow_off = pos_;
    while (accept('^')) exps.push_back(parse_uint());
    long long e = exps.back();
    for (int i = int(exps.size()) - 2; i >= 0; --i) {
      double folded = std::pow(double(exps[std::size_t(i)]), double(e));
      if (folded > 1e6) throw parse_error("exponent too large", pow_off);
      e = (long long)(folded + 0.5);
    }
    return make_pow(base, e, pow_off);
  }

  long long parse_uint() {
    skip_ws();
    std::size_t off = pos_;
    if (pos_ >= src_.size() || !std::isdigit((unsigned char)src_[pos_]))
      throw parse_error("expected integer exponent", off);
    long long v = 0;
    while (pos_ < src_.size() && std::isdigit((unsigned char)src_[pos_])) {
      v = v * 10 + (src_[pos_] - '0');
      if (v > 1000000) throw parse_error("exponent too large", off);
      ++pos_;
    }
    return v;
  }

  ExprPtr parse_atom() {
    skip_ws();
    if (pos_ >= src_.size()) throw parse_error("unexpected end of input", pos_);
    std::size_t off = pos_;
    char c = src_[pos_];
    if (std::isdigit((unsigned char)c) || c == '.') return parse_number();
    if (c == '(') {
      ++pos_;
      ExprPtr e = parse_expr();
      if (!accept(')')) throw parse_error("expected ')'", pos_);
      return e;
    }
    if (std::islower((unsigned char)c) || c == '_') return parse_ident();
    throw parse_error(std::string("unexpected character '") + c + "'", off);
  }

  ExprPtr parse_number() {
    std::size_t off = pos_;
    std::size_t p = pos_;
    while (p < src_.size() && std::isdigit((unsigned char)src_[p])) ++p;
    if (p < src_.size() && src_[p] == '.') {
      ++p;
      while (p < src_.size() && std::isdigit((unsigned char)src_[p])) ++p;
    }
    if (p < src_.size() && (src_[p] == 'e' || src_[p] == 'E')) {
      std::size_t q = p + 1;
      if (q < src_.size() && (src_[q] == '+' || src_[q] == '-')) ++q;
      if (q < src_.size() && std::isdigit((unsigned char)src_[q])) {
        ++q;
        while (q < src_.size() && std::isdigit((unsigned char)src_[q])) ++q;
        p = q;
      }
    }
    std::string text(src_.substr(off, p - off));
    if (text.empty() || text == ".") throw parse_error("malformed number", off);
    char* end = nullptr;
    double v = std::strtod(text.c_str(), &end);
    if (end != text.c_str() + text.size()) throw parse_error("malformed number", off);
    pos_ = p;
    return make_number(v, off);
  }

  ExprPtr parse_ident() {
    std::size_t off = pos_;
    std::size_t p = pos_;
    while (p < src_.size() &&
           (std::islower((unsigned char)src_[p]) || std::isdigit((unsigned char)src_[p]) ||
            src_[p] == '_'))
      ++p;
    std::string name(src_.substr(off, p - off));
    pos_ = p;

    if (name == "x") return make_var(0, off);
    if (name.size() >= 2 && name[0] == 'y' &&
        name.find_first_not_of("0123456789", 1) == std::string::npos) {
      long idx = std::strtol(name.c_str() + 1, nullptr, 10);
      if (idx < 1 || idx > kMaxVars - 1)
        throw parse_error("variable index out of range (y1..y7)", off);
      return make_var(int(idx), off);
    }

    static const std::map<std::string, FuncKind> funcs = {{"sin", FuncKind::Sin},
                                                          {"cos", FuncKind::Cos},
                                                          {"exp", FuncKind::Exp},
                                                          {"sqrt", FuncKind::Sqrt}};
    auto it = funcs.find(name);
    if (it != funcs.end()) {
      if (!accept('(')) throw parse_error("expected '(' after function name", pos_);
      ExprPtr arg = parse_expr();
      if (!accept(')')) throw parse_error("expected ')'", pos_);
      return make_func(it->second, arg, off);
    }

    // parameter names: lowercase letters and underscores only
    if (name.find_first_of("0123456789") != std::string::npos)
      throw parse_error("invalid identifier '" + name + "'", off);
    return make_param(name, off);
  }

  std::string_view src_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline ExprPtr parse_expression(std::string_view src) { return detail::Parser(src).run(); }

// ---------------------------------------------------------------------------
// Pretty printing (canonical: minimal parentheses, round-trip stable)
// ---------------------------------------------------------------------------

/// Shortest decimal string that parses back to exactly the same double.
inline std::string format_double(double v) {
  char buf[64];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) return buf;
  }
  return buf;
}

namespace detail {

inline int precedence_of(const ExprNode& e) {
  switch (e.kind) {
    case ExprNode::Kind::Add:
    case ExprNode::Kind::Sub:
      return 1;
    case ExprNode::Kind::Mul:
    case ExprNode::Kind::Div:
      return 2;
    case ExprNode::Kind::Neg:
      return 3;
    case ExprNode::Kind::Pow:
      return 4;
    case ExprNode::Kind::Number:
      // a negative literal prints with a leading '-', so give it the same
      // precedence as unary minus to force parentheses where needed
      return e.number < 0 ? 3 : 5;
    default:
      return 5;
  }
}

inline void print_node(const ExprNode& e, int min_prec, std::string& out) {
  int prec = precedence_of(e);
  bool parens = prec < min_prec;
  if (parens) out += '(';
  switch (e.kind) {
    case ExprNode::Kind::Number:
      out += format_double(e.number);
      break;
    case ExprNode::Kind::Var:
      out += e.var == 0 ? std::string("x") : "y" + std::to_string(e.var);
      break;
    case ExprNode::Kind::Param:
      out += e.param;
      break;
    case ExprNode::Kind::Add:
      print_node(*e.a, 1, out);
      out += " + ";
      print_node(*e.b, 2, out);
      break;
    case ExprNode::Kind::Sub:
      print_node(*e.a, 1, out);
      out += " - ";
      print_node(*e.b, 2, out);
      break;
    case ExprNode::Kind::Mul:
      print_node(*e.a, 2, out);
      out += "*";
      print_node(*e.b, 3, out);
      break;
    case ExprNode::Kind::Div:
      print_node(*e.a, 2, out);
      out += "/";
      print_node(*e.b, 3, out);
      break;
    case ExprNode::Kind::Neg:
      out += '-';
      print_node(*e.a, 3, out);
      break;
    case ExprNode::Kind::Pow:
      print_node(*e.a, 5, out);
      out += '^';
      out += std::to_string(e.exponent);
      break;
    case ExprNode::Kind::Func: {
      const char* names[] = {"sin", "cos", "exp", "sqrt"};
      out += names[int(e.func)];
      out += '(';
      print_node(*e.a, 1, out);
      out += ')';
      break;
    }
  }
  if (parens) out += ')';
}

}  // namespace detail

inline std::string to_string(const ExprPtr& e) {
  std::string out;
  detail::print_node(*e, 1, out);
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation over an arbitrary arithmetic carrier (double or Jet)
// ---------------------------------------------------------------------------

using ParamMap = std::map<std::string, double>;

namespace detail {

struct DoubleOps {
  double constant(double v) const { return v; }
  double add(double a, double b) const { return a + b; }
  double sub(double a, double b) const { return a - b; }
  double mul(double a, double b) const { return a * b; }
  double div(double a, double b, std::size_t off) const {
    if (b == 0.0) throw eval_error("division by zero", off);
    return a / b;
  }
  double neg(double a) const { return -a; }
  double pow_int(double a, long long e) const {
    double r = 1.0, base = a;
    long long k = e;
    while (k > 0) {
      if (k & 1) r *= base;
      base *= base;
      k >>= 1;
    }
    return r;
  }
  double apply(FuncKind f, double a, std::size_t off) const {
    switch (f) {
      case FuncKind::Sin:
        return std::sin(a);
      case FuncKind::Cos:
        return std::cos(a);
      case FuncKind::Exp:
        return std::exp(a);
      case FuncKind::Sqrt:
        if (a < 0.0) throw eval_error("sqrt of a negative value", off);
        return std::sqrt(a);
    }
    return 0.0;
  }
};

struct JetOps {
  int n, order;
  Jet constant(double v) const { return Jet::constant(n, order, v); }
  Jet add(const Jet& a, const Jet& b) const { return a + b; }
  Jet sub(const Jet& a, const Jet& b) const { return a - b; }
  Jet mul(const Jet& a, const Jet& b) const { return a * b; }
  Jet div(const Jet& a, const Jet& b, std::size_t off) const {
    if (b.value() == 0.0) throw eval_error("division by zero (in the jet's constant term)", off);
    return a / b;
  }
  Jet neg(const Jet& a) const { return -a; }
  Jet pow_int(const Jet& a, long long e) const {
    Jet r = constant(1.0);
    Jet base = a;
    long long k = e;
    while (k > 0) {
      if (k & 1) r = r * base;
      base = base * base;
      k >>= 1;
    }
    return r;
  }
  Jet apply(FuncKind f, const Jet& a, std::size_t off) const {
    switch (f) {
      case FuncKind::Sin:
        return jet_sin(a);
      case FuncKind::Cos:
        return jet_cos(a);
      case FuncKind::Exp:
        return jet_exp(a);
      case FuncKind::Sqrt:
        if (a.value() <= 0.0) throw eval_error("sqrt needs a positive argument", off);
        return jet_sqrt(a);
    }
    return a;
  }
};

template <class T, class Ops>
T eval_node(const ExprNode& e, std::span<const T> vars, const ParamMap& params, const Ops& ops) {
  switch (e.kind) {
    case ExprNode::Kind::Number:
      return ops.constant(e.number);
    case ExprNode::Kind::Var:
      if (e.var < 0 || e.var >= int(vars.size()))
        throw eval_error("variable index out of range for this field", e.offset);
      return vars[std::size_t(e.var)];
    case ExprNode::Kind::Param: {
      auto it = params.find(e.param);
      if (it == params.end()) throw eval_error("unbound parameter '" + e.param + "'", e.offset);
      return ops.constant(it->second);
    }
    case ExprNode::Kind::Add:
      return ops.add(eval_node(*e.a, vars, params, ops), eval_node(*e.b, vars, params, ops));
    case ExprNode::Kind::Sub:
      return ops.sub(eval_node(*e.a, vars, params, ops), eval_node(*e.b, vars, params, ops));
    case ExprNode::Kind::Mul:
      return ops.mul(eval_node(*e.a, vars, params, ops), eval_node(*e.b, vars, params, ops));
    case ExprNode::Kind::Div:
      return ops.div(eval_node(*e.a, vars, params, ops), eval_node(*e.b, vars, params, ops),
                     e.offset);
    case ExprNode::Kind::Neg:
      return ops.neg(eval_node(*e.a, vars, params, ops));
    case ExprNode::Kind::Pow:
      return ops.pow_int(eval_node(*e.a, vars, params, ops), e.exponent);
    case ExprNode::Kind::Func:
      return ops.apply(e.func, eval_node(*e.a, vars, params, ops), e.offset);
  }
  throw eval_error("corrupt expression node", e.offset);
}

}  // namespace detail

inline double eval(const ExprPtr& e, std::span<const double> vars, const ParamMap& params) {
  return detail::eval_node<double>(*e, vars, params, detail::DoubleOps{});
}

inline Jet eval_jet(const ExprPtr& e, std::span<const Jet> vars, const ParamMap& params) {
  if (vars.empty()) throw domain_error("eval_jet: need at least one variable");
  detail::JetOps ops{vars[0].n(), vars[0].order()};
  return detail::eval_node<Jet>(*e, vars, params, ops);
}

// ---------------------------------------------------------------------------
// Structural transforms
// ---------------------------------------------------------------------------

/// Replace every occurrence of variable `var` with `replacement`.
inline ExprPtr substitute_var(const ExprPtr& e, int var, const ExprPtr& replacement) {
  switch (e->kind) {
    case ExprNode::Kind::Var:
      return e->var == var ? replacement : e;
    case ExprNode::Kind::Number:
    case ExprNode::Kind::Param:
      return e;
    case ExprNode::Kind::Neg:
      return make_neg(substitute_var(e->a, var, replacement), e->offset);
    case ExprNode::Kind::Pow:
      return make_pow(substitute_var(e->a, var, replacement), e->exponent, e->offset);
    case ExprNode::Kind::Func:
      return make_func(e->func, substitute_var(e->a, var, replacement), e->offset);
    default:
      return make_binary(e->kind, substitute_var(e->a, var, replacement),
                         substitute_var(e->b, var, replacement), e->offset);
  }
}

namespace detail {

inline ExprPtr diff(const ExprPtr& e, int var, const std::string& param) {
  auto zero = [] { return make_number(0.0); };
  switch (e->kind) {
    case ExprNode::Kind::Number:
      return zero();
    case ExprNode::Kind::Var:
      return make_number(!param.empty() ? 0.0 : (e->var == var ? 1.0 : 0.0));
    case ExprNode::Kind::Param:
      return make_number(!param.empty() && e->param == param ? 1.0 : 0.0);
    case ExprNode::Kind::Add:
      return make_binary(ExprNode::Kind::Add, diff(e->a, var, param), diff(e->b, var, param));
    case ExprNode::Kind::Sub:
      return make_binary(ExprNode::Kind::Sub, diff(e->a, var, param), diff(e->b, var, param));
    case ExprNode::Kind::Neg:
      return make_neg(diff(e->a, var, param));
    case ExprNode::Kind::Mul:
      return make_binary(
          ExprNode::Kind::Add,
          make_binary(ExprNode::Kind::Mul, diff(e->a, var, param), e->b),
          make_binary(ExprNode::Kind::Mul, e->a, diff(e->b, var, param)));
    case ExprNode::Kind::Div: {
      ExprPtr num = make_binary(
          ExprNode::Kind::Sub,
          make_binary(ExprNode::Kind::Mul, diff(e->a, var, param), e->b),
          make_binary(ExprNode::Kind::Mul, e->a, diff(e->b, var, param)));
      return make_binary(ExprNode::Kind::Div, num, make_pow(e->b, 2));
    }
    case ExprNode::Kind::Pow: {
      if (e->exponent == 0) return zero();
      ExprPtr inner = diff(e->a, var, param);
      ExprPtr scaled = make_binary(ExprNode::Kind::Mul, make_number(double(e->exponent)),
                                   make_pow(e->a, e->exponent - 1));
      return make_binary(ExprNode::Kind::Mul, scaled, inner);
    }
    case ExprNode::Kind::Func: {
      ExprPtr inner = diff(e->a, var, param);
      ExprPtr outer;
      switch (e->func) {
        case FuncKind::Sin:
          outer = make_func(FuncKind::Cos, e->a);
          break;
        case FuncKind::Cos:
          outer = make_neg(make_func(FuncKind::Sin, e->a));
          break;
        case FuncKind::Exp:
          outer = make_func(FuncKind::Exp, e->a);
          break;
        case FuncKind::Sqrt:
          outer = make_binary(ExprNode::Kind::Div, make_number(0.5),
                              make_func(FuncKind::Sqrt, e->a));
          break;
      }
      return make_binary(ExprNode::Kind::Mul, outer, inner);
    }
  }
  throw domain_error("diff: corrupt node");
}

}  // namespace detail

inline ExprPtr diff_var(const ExprPtr& e, int var) { return detail::diff(e, var, ""); }
inline ExprPtr diff_param(const ExprPtr& e, const std::string& name) {
  return detail::diff(e, -1, name);
}

/// All parameter names referenced by the expression.
inline void collect_params(const ExprPtr& e, std::vector<std::string>& out) {
  switch (e->kind) {
    case ExprNode::Kind::Param:
      if (std::find(out.begin(), out.end(), e->param) == out.end()) out.push_back(e->param);
      return;
    case ExprNode::Kind::Number:
    case ExprNode::Kind::Var:
      return;
    default:
      if (e->a) collect_params(e->a, out);
      if (e->b) collect_params(e->b, out);
  }
}

inline int max_var_index(const ExprPtr& e) {
  switch (e->kind) {
    case ExprNode::Kind::Var:
      return e->var;
    case ExprNode::Kind::Number:
    case ExprNode::Kind::Param:
      return -1;
    default: {
      int m = -1;
      if (e->a) m = std::max(m, max_var_index(e->a));
      if (e->b) m = std::max(m, max_var_index(e->b));
      return m;
    }
  }
}

// ---------------------------------------------------------------------------
// Exact polynomial expansion (when possible)
// ---------------------------------------------------------------------------

/// Arbitrary-degree sparse polynomial over the field variables, used for the
/// exact equivariance verdict and the exact Hadamard split.
struct SparsePoly {
  int n = 0;
  std::map<std::array<int, kMaxVars>, double> c;

  static SparsePoly constant(int n, double v) {
    SparsePoly p;
    p.n = n;
    if (v != 0.0) p.c[{}] = v;
    return p;
  }

  std::optional<double> as_constant() const {
    if (c.empty()) return 0.0;
    if (c.size() == 1 && c.begin()->first == std::array<int, kMaxVars>{}) return c.begin()->second;
    return std::nullopt;
  }
};

inline SparsePoly sp_add(const SparsePoly& a, const SparsePoly& b, double sign = 1.0) {
  SparsePoly r = a;
  for (const auto& [e, v] : b.c) {
    r.c[e] += sign * v;
    if (r.c[e] == 0.0) r.c.erase(e);
  }
  return r;
}

inline SparsePoly sp_mul(const SparsePoly& a, const SparsePoly& b) {
  SparsePoly r;
  r.n = a.n;
  for (const auto& [ea, va] : a.c)
    for (const auto& [eb, vb] : b.c) {
      std::array<int, kMaxVars> e{};
      for (int i = 0; i < kMaxVars; ++i) e[std::size_t(i)] = ea[std::size_t(i)] + eb[std::size_t(i)];
      r.c[e] += va * vb;
    }
  for (auto it = r.c.begin(); it != r.c.end();)
    it = it->second == 0.0 ? r.c.erase(it) : std::next(it);
  return r;
}

/// Expand to a polynomial in the variables with parameters substituted
/// numerically.  Returns nullopt when the expression is genuinely
/// non-polynomial (transcendental functions of the variables, division by a
/// non-constant, or absurdly large exponents).
inline std::optional<SparsePoly> try_expand_polynomial(const ExprPtr& e, int n,
                                                       const ParamMap& params) {
  constexpr std::size_t kTermCap = 200000;
  constexpr long long kExpCap = 64;
  switch (e->kind) {
    case ExprNode::Kind::Number:
      return SparsePoly::constant(n, e->number);
    case ExprNode::Kind::Param: {
      auto it = params.find(e->param);
      if (it == params.end()) throw eval_error("unbound parameter '" + e->param + "'", e->offset);
      return SparsePoly::constant(n, it->second);
    }
    case ExprNode::Kind::Var: {
      if (e->var >= n) throw eval_error("variable index out of range for this field", e->offset);
      SparsePoly p;
      p.n = n;
      std::array<int, kMaxVars> mono{};
      mono[std::size_t(e->var)] = 1;
      p.c[mono] = 1.0;
      return p;
    }
    case ExprNode::Kind::Add:
    case ExprNode::Kind::Sub: {
      auto a = try_expand_polynomial(e->a, n, params);
      auto b = try_expand_polynomial(e->b, n, params);
      if (!a || !b) return std::nullopt;
      return sp_add(*a, *b, e->kind == ExprNode::Kind::Add ? 1.0 : -1.0);
    }
    case ExprNode::Kind::Mul: {
      auto a = try_expand_polynomial(e->a, n, params);
      auto b = try_expand_polynomial(e->b, n, params);
      if (!a || !b) return std::nullopt;
      auto r = sp_mul(*a, *b);
      if (r.c.size() > kTermCap) return std::nullopt;
      return r;
    }
    case ExprNode::Kind::Div: {
      auto a = try_expand_polynomial(e->a, n, params);
      auto b = try_expand_polynomial(e->b, n, params);
      if (!a || !b) return std::nullopt;
      auto denom = b->as_constant();
      if (!denom) return std::nullopt;
      if (*denom == 0.0) throw eval_error("division by zero", e->offset);
      SparsePoly r = *a;
      for (auto& [mono, v] : r.c) v /= *denom;
      return r;
    }
    case ExprNode::Kind::Neg: {
      auto a = try_expand_polynomial(e->a, n, params);
      if (!a) return std::nullopt;
      SparsePoly r = *a;
      for (auto& [mono, v] : r.c) v = -v;
      return r;
    }
    case ExprNode::Kind::Pow: {
      if (e->exponent > kExpCap) return std::nullopt;
      auto a = try_expand_polynomial(e->a, n, params);
      if (!a) return std::nullopt;
      SparsePoly r = SparsePoly::constant(n, 1.0);
      for (long long k = 0; k < e->exponent; ++k) {
        r = sp_mul(r, *a);
        if (r.c.size() > kTermCap) return std::nullopt;
      }
      return r;
    }
    case ExprNode::Kind::Func: {
      auto a = try_expand_polynomial(e->a, n, params);
      if (!a) return std::nullopt;
      auto cst = a->as_constant();
      if (!cst) return std::nullopt;  // transcendental in the variables
      detail::DoubleOps ops;
      return SparsePoly::constant(n, ops.apply(e->func, *cst, e->offset));
    }
  }
  return std::nullopt;
}

}  // namespace morsetrack
