#pragma once

// Closed-form expressions over the chart coordinates x0..x3.
//
// Expressions are immutable DAGs of shared nodes. They can be parsed from the
// catalog expression language, printed back, differentiated symbolically and
// evaluated on any scalar type that provides the usual arithmetic and the
// elementary functions (double, or the truncated Taylor jets of jet.hpp).
// Division by zero and log/sqrt of non-positive arguments raise DomainError.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace chlab {

using Point = std::array<double, 4>;

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Op : std::uint8_t {
  Const, Var, Param, Add, Sub, Mul, Div, Neg, Pow, Exp, Log, Sin, Cos, Sinh, Cosh, Sqrt
};

struct ExprNode;
using NodePtr = std::shared_ptr<const ExprNode>;

struct ExprNode {
  Op op = Op::Const;
  double value = 0.0;  // Const, and bound Param
  int index = 0;       // Var index, Pow exponent
  bool bound = true;   // Param with a value
  std::string name;    // Param
  NodePtr a, b;
};

// Named parameter values used while parsing catalog expressions.
using ParamMap = std::map<std::string, double, std::less<>>;

namespace detail {

template <class T>
T apply_unary(Op op, const T& a);

}  // namespace detail

class Expr {
 public:
  Expr() : Expr(constant(0.0)) {}
  explicit Expr(NodePtr n) : node_(std::move(n)) {}

  static Expr constant(double v);
  static Expr variable(int i);
  static Expr parameter(std::string name, double value);
  // A free symbol: printable and differentiable (derivative 0) but not evaluable.
  static Expr symbol(std::string name);

  const ExprNode& node() const { return *node_; }
  const NodePtr& ptr() const { return node_; }

  bool is_constant() const { return node_->op == Op::Const; }
  bool is_zero() const { return is_constant() && node_->value == 0.0; }
  bool is_one() const { return is_constant() && node_->value == 1.0; }

  // Symbolic partial derivative with respect to coordinate `var`.
  Expr derivative(int var) const;
  // Substitute the coordinate variables by the given expressions.
  Expr substitute(const std::array<Expr, 4>& xs) const;
  bool depends_on(int var) const;

  double operator()(const Point& x) const { return eval<double>(std::span<const double, 4>(x)); }

  template <class T>
  T eval(std::span<const T, 4> x) const;

  std::string str() const;
  std::size_t size() const;  // number of distinct nodes

  friend Expr operator+(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a, const Expr& b);
  friend Expr operator*(const Expr& a, const Expr& b);
  friend Expr operator/(const Expr& a, const Expr& b);
  friend Expr operator-(const Expr& a);
  friend Expr pow(const Expr& a, int n);
  friend Expr apply(Op f, const Expr& a);

 private:
  template <class T>
  T eval_node(const ExprNode& n, std::span<const T, 4> x) const;

  NodePtr node_;
};

inline Expr operator+(const Expr& a, double b) { return a + Expr::constant(b); }
inline Expr operator+(double a, const Expr& b) { return Expr::constant(a) + b; }
inline Expr operator-(const Expr& a, double b) { return a - Expr::constant(b); }
inline Expr operator-(double a, const Expr& b) { return Expr::constant(a) - b; }
inline Expr operator*(const Expr& a, double b) { return a * Expr::constant(b); }
inline Expr operator*(double a, const Expr& b) { return Expr::constant(a) * b; }
inline Expr operator/(const Expr& a, double b) { return a / Expr::constant(b); }
inline Expr operator/(double a, const Expr& b) { return Expr::constant(a) / b; }
inline Expr exp(const Expr& a) { return apply(Op::Exp, a); }
inline Expr log(const Expr& a) { return apply(Op::Log, a); }
inline Expr sin(const Expr& a) { return apply(Op::Sin, a); }
inline Expr cos(const Expr& a) { return apply(Op::Cos, a); }
inline Expr sinh(const Expr& a) { return apply(Op::Sinh, a); }
inline Expr cosh(const Expr& a) { return apply(Op::Cosh, a); }
inline Expr sqrt(const Expr& a) { return apply(Op::Sqrt, a); }

// Parse the catalog expression language:
//   expr := term (('+'|'-') term)*
//   term := factor (('*'|'/') factor)*
//   factor := base ('^' integer)?
//   base := number | ident | func '(' expr ')' | '(' expr ')' | '-' base
// Identifiers are x0..x3 or names from `params`; `symbols` are left free.
Expr parse_expr(std::string_view source, const ParamMap& params = {},
                const std::vector<std::string>& symbols = {});

// ---------------------------------------------------------------------------
// Elementary functions with domain checks, overloaded for double. Jet types
// provide the same names in namespace chlab.

inline double checked_div(double a, double b) {
  if (b == 0.0) throw DomainError("division by zero");
  return a / b;
}
inline double checked_log(double a) {
  if (!(a > 0.0)) throw DomainError("log of non-positive value");
  return std::log(a);
}
inline double checked_sqrt(double a) {
  if (a < 0.0) throw DomainError("sqrt of negative value");
  return std::sqrt(a);
}
inline double powi(double a, int n) {
  if (n < 0) return checked_div(1.0, powi(a, -n));
  double r = 1.0, b = a;
  while (n) {
    if (n & 1) r *= b;
    b *= b;
    n >>= 1;
  }
  return r;
}

namespace detail {

template <class T>
T apply_unary(Op op, const T& a) {
  using std::cos;
  using std::cosh;
  using std::exp;
  using std::sin;
  using std::sinh;
  switch (op) {
    case Op::Exp: return exp(a);
    case Op::Log: return checked_log(a);
    case Op::Sin: return sin(a);
    case Op::Cos: return cos(a);
    case Op::Sinh: return sinh(a);
    case Op::Cosh: return cosh(a);
    case Op::Sqrt: return checked_sqrt(a);
    default: throw std::logic_error("not a unary function");
  }
}

}  // namespace detail

template <class T>
T Expr::eval(std::span<const T, 4> x) const {
  return eval_node(*node_, x);
}

template <class T>
T Expr::eval_node(const ExprNode& n, std::span<const T, 4> x) const {
  switch (n.op) {
    case Op::Const: return T(n.value);
    case Op::Var: return x[n.index];
    case Op::Param:
      if (!n.bound) throw DomainError("free symbol '" + n.name + "' cannot be evaluated");
      return T(n.value);
    case Op::Add: return eval_node(*n.a, x) + eval_node(*n.b, x);
    case Op::Sub: return eval_node(*n.a, x) - eval_node(*n.b, x);
    case Op::Mul: return eval_node(*n.a, x) * eval_node(*n.b, x);
    case Op::Div: return checked_div(eval_node(*n.a, x), eval_node(*n.b, x));
    case Op::Neg: return -eval_node(*n.a, x);
    case Op::Pow: return powi(eval_node(*n.a, x), n.index);
    default: return detail::apply_unary(n.op, eval_node(*n.a, x));
  }
}

// ---------------------------------------------------------------------------
// A flattened, common-subexpression-shared program evaluating several
// expressions at once. This is the hot path of every geodesic integration.

class Tape {
 public:
  Tape() = default;
  explicit Tape(std::span<const Expr> outputs);

  std::size_t num_outputs() const { return outputs_.size(); }
  std::size_t num_instructions() const { return code_.size(); }

  template <class T>
  void eval(std::span<const T, 4> x, std::span<T> out) const;

 private:
  struct Instr {
    Op op;
    int a = -1, b = -1;
    int n = 0;
    double value = 0.0;
  };
  int emit(const NodePtr& node, std::map<const ExprNode*, int>& seen,
           std::map<std::tuple<int, int, int, int, std::uint64_t>, int>& cse);

  std::vector<Instr> code_;
  std::vector<int> outputs_;
};

template <class T>
void Tape::eval(std::span<const T, 4> x, std::span<T> out) const {
  thread_local std::vector<T> reg;
  if (reg.size() < code_.size()) reg.resize(code_.size());
  for (std::size_t i = 0; i < code_.size(); ++i) {
    const Instr& in = code_[i];
    switch (in.op) {
      case Op::Const: reg[i] = T(in.value); break;
      case Op::Var: reg[i] = x[in.n]; break;
      case Op::Add: reg[i] = reg[in.a] + reg[in.b]; break;
      case Op::Sub: reg[i] = reg[in.a] - reg[in.b]; break;
      case Op::Mul: reg[i] = reg[in.a] * reg[in.b]; break;
      case Op::Div: reg[i] = checked_div(reg[in.a], reg[in.b]); break;
      case Op::Neg: reg[i] = -reg[in.a]; break;
      case Op::Pow: reg[i] = powi(reg[in.a], in.n); break;
      default: reg[i] = detail::apply_unary(in.op, reg[in.a]); break;
    }
  }
  std::size_t n = std::min(out.size(), outputs_.size());
  for (std::size_t k = 0; k < n; ++k) out[k] = reg[outputs_[k]];
}

}  // namespace chlab
