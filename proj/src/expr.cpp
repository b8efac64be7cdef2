#include "chlab/expr.hpp"

#include <bit>
#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <set>
#include <unordered_map>

namespace chlab {

namespace {

NodePtr make(Op op, NodePtr a = nullptr, NodePtr b = nullptr, int index = 0) {
  auto n = std::make_shared<ExprNode>();
  n->op = op;
  n->a = std::move(a);
  n->b = std::move(b);
  n->index = index;
  return n;
}

bool is_const(const Expr& e, double v) { return e.is_constant() && e.node().value == v; }

}  // namespace

Expr Expr::constant(double v) {
  auto n = std::make_shared<ExprNode>();
  n->op = Op::Const;
  n->value = v;
  return Expr(n);
}

Expr Expr::variable(int i) {
  if (i < 0 || i > 3) throw std::out_of_range("coordinate index must be 0..3");
  return Expr(make(Op::Var, nullptr, nullptr, i));
}

Expr Expr::parameter(std::string name, double value) {
  auto n = std::make_shared<ExprNode>();
  n->op = Op::Param;
  n->name = std::move(name);
  n->value = value;
  return Expr(n);
}

Expr Expr::symbol(std::string name) {
  auto n = std::make_shared<ExprNode>();
  n->op = Op::Param;
  n->name = std::move(name);
  n->bound = false;
  return Expr(n);
}

Expr operator+(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) return Expr::constant(a.node().value + b.node().value);
  if (a.is_zero()) return b;
  if (b.is_zero()) return a;
  if (b.node().op == Op::Neg) return a - Expr(b.node().a);
  return Expr(make(Op::Add, a.ptr(), b.ptr()));
}

Expr operator-(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) return Expr::constant(a.node().value - b.node().value);
  if (b.is_zero()) return a;
  if (a.is_zero()) return -b;
  if (a.ptr() == b.ptr()) return Expr::constant(0.0);
  if (b.node().op == Op::Neg) return a + Expr(b.node().a);
  return Expr(make(Op::Sub, a.ptr(), b.ptr()));
}

Expr operator*(const Expr& a, const Expr& b) {
  if (a.is_constant() && b.is_constant()) return Expr::constant(a.node().value * b.node().value);
  if (a.is_zero() || b.is_zero()) return Expr::constant(0.0);
  if (a.is_one()) return b;
  if (b.is_one()) return a;
  if (is_const(a, -1.0)) return -b;
  if (is_const(b, -1.0)) return -a;
  if (a.node().op == Op::Neg && b.node().op == Op::Neg) return Expr(a.node().a) * Expr(b.node().a);
  if (a.node().op == Op::Neg) return -(Expr(a.node().a) * b);
  if (b.node().op == Op::Neg) return -(a * Expr(b.node().a));
  if (a.ptr() == b.ptr()) return pow(a, 2);
  return Expr(make(Op::Mul, a.ptr(), b.ptr()));
}

Expr operator/(const Expr& a, const Expr& b) {
  if (b.is_zero()) throw DomainError("division by zero");
  if (a.is_constant() && b.is_constant()) return Expr::constant(a.node().value / b.node().value);
  if (a.is_zero()) return a;
  if (b.is_one()) return a;
  if (a.node().op == Op::Neg) return -(Expr(a.node().a) / b);
  if (b.node().op == Op::Neg) return -(a / Expr(b.node().a));
  return Expr(make(Op::Div, a.ptr(), b.ptr()));
}

Expr operator-(const Expr& a) {
  if (a.is_constant()) return Expr::constant(-a.node().value);
  if (a.node().op == Op::Neg) return Expr(a.node().a);
  return Expr(make(Op::Neg, a.ptr()));
}

Expr pow(const Expr& a, int n) {
  if (n == 0) return Expr::constant(1.0);
  if (n == 1) return a;
  if (a.is_constant()) return Expr::constant(powi(a.node().value, n));
  if (a.node().op == Op::Pow) return pow(Expr(a.node().a), a.node().index * n);
  return Expr(make(Op::Pow, a.ptr(), nullptr, n));
}

Expr apply(Op f, const Expr& a) {
  if (a.is_constant()) return Expr::constant(detail::apply_unary(f, a.node().value));
  return Expr(make(f, a.ptr()));
}

Expr Expr::derivative(int var) const {
  std::unordered_map<const ExprNode*, Expr> memo;
  std::function<Expr(const NodePtr&)> d = [&](const NodePtr& p) -> Expr {
    if (auto it = memo.find(p.get()); it != memo.end()) return it->second;
    const ExprNode& n = *p;
    Expr a = n.a ? Expr(n.a) : Expr::constant(0.0);
    Expr b = n.b ? Expr(n.b) : Expr::constant(0.0);
    Expr r;
    switch (n.op) {
      case Op::Const:
      case Op::Param: r = Expr::constant(0.0); break;
      case Op::Var: r = Expr::constant(n.index == var ? 1.0 : 0.0); break;
      case Op::Add: r = d(n.a) + d(n.b); break;
      case Op::Sub: r = d(n.a) - d(n.b); break;
      case Op::Mul: r = d(n.a) * b + a * d(n.b); break;
      case Op::Div: {
        Expr da = d(n.a), db = d(n.b);
        r = da / b - a * db / pow(b, 2);
        break;
      }
      case Op::Neg: r = -d(n.a); break;
      case Op::Pow: r = Expr::constant(n.index) * pow(a, n.index - 1) * d(n.a); break;
      case Op::Exp: r = Expr(p) * d(n.a); break;
      case Op::Log: r = d(n.a) / a; break;
      case Op::Sin: r = cos(a) * d(n.a); break;
      case Op::Cos: r = -(sin(a) * d(n.a)); break;
      case Op::Sinh: r = cosh(a) * d(n.a); break;
      case Op::Cosh: r = sinh(a) * d(n.a); break;
      case Op::Sqrt: r = d(n.a) / (2.0 * Expr(p)); break;
    }
    memo.emplace(p.get(), r);
    return r;
  };
  return d(node_);
}

Expr Expr::substitute(const std::array<Expr, 4>& xs) const {
  std::unordered_map<const ExprNode*, Expr> memo;
  std::function<Expr(const NodePtr&)> s = [&](const NodePtr& p) -> Expr {
    if (auto it = memo.find(p.get()); it != memo.end()) return it->second;
    const ExprNode& n = *p;
    Expr r;
    switch (n.op) {
      case Op::Const:
      case Op::Param: r = Expr(p); break;
      case Op::Var: r = xs[n.index]; break;
      case Op::Add: r = s(n.a) + s(n.b); break;
      case Op::Sub: r = s(n.a) - s(n.b); break;
      case Op::Mul: r = s(n.a) * s(n.b); break;
      case Op::Div: r = s(n.a) / s(n.b); break;
      case Op::Neg: r = -s(n.a); break;
      case Op::Pow: r = pow(s(n.a), n.index); break;
      default: r = apply(n.op, s(n.a)); break;
    }
    memo.emplace(p.get(), r);
    return r;
  };
  return s(node_);
}

bool Expr::depends_on(int var) const {
  std::set<const ExprNode*> seen;
  std::function<bool(const NodePtr&)> walk = [&](const NodePtr& p) {
    if (!p || !seen.insert(p.get()).second) return false;
    if (p->op == Op::Var) return p->index == var;
    return walk(p->a) || walk(p->b);
  };
  return walk(node_);
}

std::size_t Expr::size() const {
  std::set<const ExprNode*> seen;
  std::function<void(const NodePtr&)> walk = [&](const NodePtr& p) {
    if (!p || !seen.insert(p.get()).second) return;
    walk(p->a);
    walk(p->b);
  };
  walk(node_);
  return seen.size();
}

namespace {

int precedence(const ExprNode& n) {
  switch (n.op) {
    case Op::Add:
    case Op::Sub: return 1;
    case Op::Mul:
    case Op::Div: return 2;
    case Op::Neg: return 3;
    case Op::Pow: return 4;
    case Op::Const: return n.value < 0 ? 3 : 5;
    default: return 5;
  }
}

const char* func_name(Op op) {
  switch (op) {
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::Sin: return "sin";
    case Op::Cos: return "cos";
    case Op::Sinh: return "sinh";
    case Op::Cosh: return "cosh";
    case Op::Sqrt: return "sqrt";
    default: return "?";
  }
}

std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  // Prefer the shortest representation that round-trips.
  for (int p = 1; p <= 17; ++p) {
    char shorter[32];
    std::snprintf(shorter, sizeof shorter, "%.*g", p, v);
    if (std::strtod(shorter, nullptr) == v) return shorter;
  }
  return buf;
}

void print(const ExprNode& n, std::string& out);

void print_child(const ExprNode& c, int min_prec, std::string& out) {
  bool paren = precedence(c) < min_prec;
  if (paren) out += '(';
  print(c, out);
  if (paren) out += ')';
}

void print(const ExprNode& n, std::string& out) {
  switch (n.op) {
    case Op::Const: out += format_number(n.value); break;
    case Op::Var: out += "x" + std::to_string(n.index); break;
    case Op::Param: out += n.name; break;
    case Op::Add:
      print_child(*n.a, 1, out);
      out += " + ";
      print_child(*n.b, 2, out);
      break;
    case Op::Sub:
      print_child(*n.a, 1, out);
      out += " - ";
      print_child(*n.b, 2, out);
      break;
    case Op::Mul:
      print_child(*n.a, 2, out);
      out += "*";
      print_child(*n.b, 4, out);
      break;
    case Op::Div:
      print_child(*n.a, 2, out);
      out += "/";
      print_child(*n.b, 4, out);
      break;
    case Op::Neg:
      out += "-";
      print_child(*n.a, 3, out);
      break;
    case Op::Pow:
      print_child(*n.a, 5, out);
      out += "^";
      if (n.index < 0) {
        out += "(" + std::to_string(n.index) + ")";
      } else {
        out += std::to_string(n.index);
      }
      break;
    default:
      out += func_name(n.op);
      out += '(';
      print(*n.a, out);
      out += ')';
      break;
  }
}

class Parser {
 public:
  Parser(std::string_view src, const ParamMap& params, const std::vector<std::string>& symbols)
      : src_(src), params_(params), symbols_(symbols) {}

  Expr parse() {
    Expr e = expr();
    skip_ws();
    if (pos_ != src_.size()) fail("unexpected trailing input");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const { throw ParseError(msg, pos_); }

  void skip_ws() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  Expr expr() {
    Expr e = term();
    for (;;) {
      if (accept('+')) {
        e = e + term();
      } else if (accept('-')) {
        e = e - term();
      } else {
        return e;
      }
    }
  }

  Expr term() {
    Expr e = factor();
    for (;;) {
      if (accept('*')) {
        e = e * factor();
      } else if (accept('/')) {
        std::size_t at = pos_;
        Expr d = factor();
        if (d.is_zero()) throw ParseError("division by constant zero", at);
        e = e / d;
      } else {
        return e;
      }
    }
  }

  Expr factor() {
    if (accept('-')) return -factor();
    if (accept('+')) return factor();
    Expr b = base();
    if (accept('^')) {
      skip_ws();
      bool paren = accept('(');
      bool neg = accept('-');
      skip_ws();
      std::size_t start = pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      if (start == pos_) fail("expected integer exponent");
      int n = std::stoi(std::string(src_.substr(start, pos_ - start)));
      if (paren) expect(')');
      return pow(b, neg ? -n : n);
    }
    return b;
  }

  Expr base() {
    skip_ws();
    if (pos_ >= src_.size()) fail("unexpected end of input");
    char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = expr();
      expect(')');
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    fail(std::string("unexpected character '") + c + "'");
  }

  Expr number() {
    std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.'))
      ++pos_;
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t save = pos_++;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
      if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
      } else {
        pos_ = save;
      }
    }
    std::string text(src_.substr(start, pos_ - start));
    char* end = nullptr;
    double v = std::strtod(text.c_str(), &end);
    if (end != text.c_str() + text.size()) throw ParseError("malformed number", start);
    return Expr::constant(v);
  }

  Expr identifier() {
    std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
      ++pos_;
    std::string id(src_.substr(start, pos_ - start));
    static const std::map<std::string, Op> funcs = {
        {"exp", Op::Exp},   {"log", Op::Log},   {"sin", Op::Sin}, {"cos", Op::Cos},
        {"sinh", Op::Sinh}, {"cosh", Op::Cosh}, {"sqrt", Op::Sqrt}};
    if (auto f = funcs.find(id); f != funcs.end()) {
      expect('(');
      Expr arg = expr();
      expect(')');
      return apply(f->second, arg);
    }
    if (id.size() == 2 && id[0] == 'x' && id[1] >= '0' && id[1] <= '3') return Expr::variable(id[1] - '0');
    if (auto p = params_.find(id); p != params_.end()) return Expr::parameter(id, p->second);
    for (const auto& s : symbols_)
      if (s == id) return Expr::symbol(id);
    throw ParseError("unknown identifier '" + id + "'", start);
  }

  std::string_view src_;
  const ParamMap& params_;
  const std::vector<std::string>& symbols_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string Expr::str() const {
  std::string out;
  print(*node_, out);
  return out;
}

Expr parse_expr(std::string_view source, const ParamMap& params,
                const std::vector<std::string>& symbols) {
  return Parser(source, params, symbols).parse();
}

Tape::Tape(std::span<const Expr> outputs) {
  std::map<const ExprNode*, int> seen;
  std::map<std::tuple<int, int, int, int, std::uint64_t>, int> cse;
  for (const Expr& e : outputs) outputs_.push_back(emit(e.ptr(), seen, cse));
}

int Tape::emit(const NodePtr& node, std::map<const ExprNode*, int>& seen,
               std::map<std::tuple<int, int, int, int, std::uint64_t>, int>& cse) {
  if (auto it = seen.find(node.get()); it != seen.end()) return it->second;
  Instr in;
  in.op = node->op;
  switch (node->op) {
    case Op::Param:
      if (!node->bound) throw DomainError("free symbol '" + node->name + "' cannot be evaluated");
      in.op = Op::Const;
      in.value = node->value;
      break;
    case Op::Const: in.value = node->value; break;
    case Op::Var: in.n = node->index; break;
    case Op::Pow:
      in.a = emit(node->a, seen, cse);
      in.n = node->index;
      break;
    default:
      in.a = emit(node->a, seen, cse);
      if (node->b) in.b = emit(node->b, seen, cse);
      break;
  }
  auto key = std::make_tuple(static_cast<int>(in.op), in.a, in.b, in.n,
                             std::bit_cast<std::uint64_t>(in.value));
  int id;
  if (auto it = cse.find(key); it != cse.end()) {
    id = it->second;
  } else {
    id = static_cast<int>(code_.size());
    code_.push_back(in);
    cse.emplace(key, id);
  }
  seen.emplace(node.get(), id);
  return id;
}

}  // namespace chlab
