// Expression trees for force laws: parsing, evaluation, exact symbolic
// differentiation and compilation to flat evaluation tapes.
//
// Trees are immutable DAGs of shared nodes; building derivatives of
// derivatives shares structure instead of copying, which keeps the
// second- and third-order objects needed by the geometric operators small.
#ifndef SODE_EXPR_HPP
#define SODE_EXPR_HPP

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace sode {

class ParseError : public std::runtime_error {
 public:
  ParseError(std::string msg, std::size_t offset)
      : std::runtime_error(std::move(msg)), offset_(offset) {}
  // 1-based byte offset into the source string.
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class NodeKind : std::uint8_t {
  Number,
  Variable,
  Neg,
  Add,
  Sub,
  Mul,
  Div,
  Pow,
  Call,
};

enum class Func : std::uint8_t { Sin, Cos, Tan, Exp, Ln, Sqrt, Abs, Sign };

inline const char* func_name(Func f) {
  switch (f) {
    case Func::Sin: return "sin";
    case Func::Cos: return "cos";
    case Func::Tan: return "tan";
    case Func::Exp: return "exp";
    case Func::Ln: return "ln";
    case Func::Sqrt: return "sqrt";
    case Func::Abs: return "abs";
    case Func::Sign: return "sign";
  }
  return "?";
}

inline std::optional<Func> func_from_name(const std::string& s) {
  if (s == "sin") return Func::Sin;
  if (s == "cos") return Func::Cos;
  if (s == "tan") return Func::Tan;
  if (s == "exp") return Func::Exp;
  if (s == "ln") return Func::Ln;
  if (s == "sqrt") return Func::Sqrt;
  if (s == "abs") return Func::Abs;
  if (s == "sign") return Func::Sign;
  return std::nullopt;
}

struct ExprNode;
using NodePtr = std::shared_ptr<const ExprNode>;

struct ExprNode {
  NodeKind kind;
  Func fn = Func::Sin;        // Call only
  double value = 0.0;         // Number only
  std::string name;           // Variable only
  NodePtr a, b;               // operands
  int src_offset = -1;        // 1-based source offset, -1 if synthesized
};

class Expr {
 public:
  Expr() = default;
  explicit Expr(NodePtr n) : node_(std::move(n)) {}

  bool valid() const { return node_ != nullptr; }
  const ExprNode& node() const { return *node_; }
  const NodePtr& ptr() const { return node_; }

  // --- constructors with constant folding ---
  static Expr number(double v) {
    auto n = std::make_shared<ExprNode>();
    n->kind = NodeKind::Number;
    n->value = v;
    return Expr(std::move(n));
  }
  static Expr variable(std::string name, int offset = -1) {
    auto n = std::make_shared<ExprNode>();
    n->kind = NodeKind::Variable;
    n->name = std::move(name);
    n->src_offset = offset;
    return Expr(std::move(n));
  }
  static Expr neg(const Expr& x) {
    if (is_const(x)) return number(-const_of(x));
    if (x.node().kind == NodeKind::Neg) return Expr(x.node().a);
    return make(NodeKind::Neg, x.node_, nullptr);
  }
  static Expr add(const Expr& x, const Expr& y) {
    if (is_const(x) && is_const(y)) return number(const_of(x) + const_of(y));
    if (is_zero(x)) return y;
    if (is_zero(y)) return x;
    return make(NodeKind::Add, x.node_, y.node_);
  }
  static Expr sub(const Expr& x, const Expr& y) {
    if (is_const(x) && is_const(y)) return number(const_of(x) - const_of(y));
    if (is_zero(y)) return x;
    if (is_zero(x)) return neg(y);
    return make(NodeKind::Sub, x.node_, y.node_);
  }
  static Expr mul(const Expr& x, const Expr& y) {
    if (is_const(x) && is_const(y)) return number(const_of(x) * const_of(y));
    if (is_zero(x) || is_zero(y)) return number(0.0);
    if (is_one(x)) return y;
    if (is_one(y)) return x;
    if (is_const(x) && const_of(x) == -1.0) return neg(y);
    if (is_const(y) && const_of(y) == -1.0) return neg(x);
    return make(NodeKind::Mul, x.node_, y.node_);
  }
  static Expr div(const Expr& x, const Expr& y) {
    if (is_zero(x)) return number(0.0);
    if (is_one(y)) return x;
    if (is_const(x) && is_const(y) && const_of(y) != 0.0)
      return number(const_of(x) / const_of(y));
    return make(NodeKind::Div, x.node_, y.node_);
  }
  static Expr pow(const Expr& x, const Expr& y) {
    if (is_zero(y)) return number(1.0);
    if (is_one(y)) return x;
    if (is_const(x) && is_const(y)) {
      try {
        double v = eval_pow(const_of(x), const_of(y), nullptr);
        if (std::isfinite(v)) return number(v);
      } catch (const EvalError&) {
      }
    }
    return make(NodeKind::Pow, x.node_, y.node_);
  }
  static Expr call(Func fn, const Expr& x) {
    if (is_const(x)) {
      try {
        double v = eval_func(fn, const_of(x), nullptr);
        if (std::isfinite(v)) return number(v);
      } catch (const EvalError&) {
      }
    }
    auto n = std::make_shared<ExprNode>();
    n->kind = NodeKind::Call;
    n->fn = fn;
    n->a = x.node_;
    return Expr(std::move(n));
  }

  // Convenience recursive evaluation against a name->value binding.
  double eval(const std::map<std::string, double>& binding) const {
    return eval_node(*node_, binding);
  }

  // Exact partial derivative with respect to one name.
  Expr diff(const std::string& wrt) const;

  // Parenthesised round-trippable text form.
  std::string to_string() const {
    std::ostringstream os;
    print(*node_, os, 0);
    return os.str();
  }

  void collect_variables(std::unordered_set<std::string>& out) const {
    collect(*node_, out);
  }

  // --- inspection helpers ---
  static bool is_const(const Expr& e) {
    return e.node_ && e.node_->kind == NodeKind::Number;
  }
  static double const_of(const Expr& e) { return e.node_->value; }
  static bool is_zero(const Expr& e) { return is_const(e) && const_of(e) == 0.0; }
  static bool is_one(const Expr& e) { return is_const(e) && const_of(e) == 1.0; }

  // Integer-exponent powers use repeated multiplication so that e.g. x^3
  // stays defined for x < 0; everything else goes through exp(b ln a).
  static double eval_pow(double base, double expo, const ExprNode* where) {
    double r = std::round(expo);
    if (r == expo && std::abs(expo) <= 1024.0) {
      long k = static_cast<long>(r);
      if (k < 0) {
        if (base == 0.0) domain_error("division by zero in negative power", where);
        return 1.0 / ipow(base, -k);
      }
      return ipow(base, k);
    }
    if (base <= 0.0)
      domain_error("non-integer power of non-positive base", where);
    return std::exp(expo * std::log(base));
  }

  static double eval_func(Func fn, double x, const ExprNode* where) {
    switch (fn) {
      case Func::Sin: return std::sin(x);
      case Func::Cos: return std::cos(x);
      case Func::Tan: return std::tan(x);
      case Func::Exp: return std::exp(x);
      case Func::Ln:
        if (x <= 0.0) domain_error("ln of non-positive argument", where);
        return std::log(x);
      case Func::Sqrt:
        if (x < 0.0) domain_error("sqrt of negative argument", where);
        return std::sqrt(x);
      case Func::Abs: return std::abs(x);
      case Func::Sign: return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
    }
    return 0.0;
  }

  [[noreturn]] static void domain_error(const std::string& what,
                                        const ExprNode* where) {
    std::string msg = what;
    if (where && where->src_offset >= 0)
      msg += " (at offset " + std::to_string(where->src_offset) + ")";
    throw EvalError(msg);
  }

 private:
  static Expr make(NodeKind k, NodePtr a, NodePtr b) {
    auto n = std::make_shared<ExprNode>();
    n->kind = k;
    n->a = std::move(a);
    n->b = std::move(b);
    return Expr(std::move(n));
  }
  static double ipow(double b, long k) {
    double acc = 1.0, p = b;
    for (; k > 0; k >>= 1) {
      if (k & 1) acc *= p;
      p *= p;
    }
    return acc;
  }

  static double eval_node(const ExprNode& n,
                          const std::map<std::string, double>& binding) {
    switch (n.kind) {
      case NodeKind::Number: return n.value;
      case NodeKind::Variable: {
        auto it = binding.find(n.name);
        if (it == binding.end())
          throw EvalError("unbound variable '" + n.name + "'");
        return it->second;
      }
      case NodeKind::Neg: return -eval_node(*n.a, binding);
      case NodeKind::Add:
        return eval_node(*n.a, binding) + eval_node(*n.b, binding);
      case NodeKind::Sub:
        return eval_node(*n.a, binding) - eval_node(*n.b, binding);
      case NodeKind::Mul:
        return eval_node(*n.a, binding) * eval_node(*n.b, binding);
      case NodeKind::Div: {
        double d = eval_node(*n.b, binding);
        if (d == 0.0) domain_error("division by zero", &n);
        return eval_node(*n.a, binding) / d;
      }
      case NodeKind::Pow:
        return eval_pow(eval_node(*n.a, binding), eval_node(*n.b, binding), &n);
      case NodeKind::Call: return eval_func(n.fn, eval_node(*n.a, binding), &n);
    }
    return 0.0;
  }

  static void collect(const ExprNode& n, std::unordered_set<std::string>& out) {
    if (n.kind == NodeKind::Variable) out.insert(n.name);
    if (n.a) collect(*n.a, out);
    if (n.b) collect(*n.b, out);
  }

  // precedence: 0 add, 1 mul, 2 unary, 3 pow
  static void print(const ExprNode& n, std::ostringstream& os, int parent) {
    auto wrap = [&](int prec, auto body) {
      if (prec < parent) os << '(';
      body();
      if (prec < parent) os << ')';
    };
    switch (n.kind) {
      case NodeKind::Number: {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", n.value);
        if (n.value < 0.0) {
          os << '(' << buf << ')';
        } else {
          os << buf;
        }
        break;
      }
      case NodeKind::Variable: os << n.name; break;
      case NodeKind::Neg:
        wrap(2, [&] {
          os << '-';
          print(*n.a, os, 3);
        });
        break;
      case NodeKind::Add:
        wrap(0, [&] {
          print(*n.a, os, 0);
          os << " + ";
          print(*n.b, os, 1);
        });
        break;
      case NodeKind::Sub:
        wrap(0, [&] {
          print(*n.a, os, 0);
          os << " - ";
          print(*n.b, os, 1);
        });
        break;
      case NodeKind::Mul:
        wrap(1, [&] {
          print(*n.a, os, 1);
          os << "*";
          print(*n.b, os, 2);
        });
        break;
      case NodeKind::Div:
        wrap(1, [&] {
          print(*n.a, os, 1);
          os << "/";
          print(*n.b, os, 2);
        });
        break;
      case NodeKind::Pow:
        wrap(3, [&] {
          print(*n.a, os, 4);
          os << "^";
          print(*n.b, os, 3);
        });
        break;
      case NodeKind::Call:
        os << func_name(n.fn) << '(';
        print(*n.a, os, 0);
        os << ')';
        break;
    }
  }

  NodePtr node_;
};

namespace detail {

class Differentiator {
 public:
  explicit Differentiator(const std::string& wrt) : wrt_(wrt) {}

  Expr run(const Expr& e) {
    auto it = memo_.find(e.ptr().get());
    if (it != memo_.end()) return it->second;
    Expr r = dispatch(e);
    memo_.emplace(e.ptr().get(), r);
    return r;
  }

 private:
  Expr dispatch(const Expr& e) {
    const ExprNode& n = e.node();
    auto sub = [](const NodePtr& p) { return Expr(p); };
    switch (n.kind) {
      case NodeKind::Number: return Expr::number(0.0);
      case NodeKind::Variable:
        return Expr::number(n.name == wrt_ ? 1.0 : 0.0);
      case NodeKind::Neg: return Expr::neg(run(sub(n.a)));
      case NodeKind::Add: return Expr::add(run(sub(n.a)), run(sub(n.b)));
      case NodeKind::Sub: return Expr::sub(run(sub(n.a)), run(sub(n.b)));
      case NodeKind::Mul: {
        Expr a = sub(n.a), b = sub(n.b);
        return Expr::add(Expr::mul(run(a), b), Expr::mul(a, run(b)));
      }
      case NodeKind::Div: {
        Expr a = sub(n.a), b = sub(n.b);
        // (a'b - ab') / b^2
        return Expr::div(Expr::sub(Expr::mul(run(a), b), Expr::mul(a, run(b))),
                         Expr::mul(b, b));
      }
      case NodeKind::Pow: {
        Expr a = sub(n.a), b = sub(n.b);
        Expr da = run(a), db = run(b);
        if (Expr::is_const(b)) {
          double p = Expr::const_of(b);
          // p * a^(p-1) * a'
          return Expr::mul(Expr::mul(Expr::number(p),
                                     Expr::pow(a, Expr::number(p - 1.0))),
                           da);
        }
        // a^b (b' ln a + b a'/a)
        Expr t = Expr::add(Expr::mul(db, Expr::call(Func::Ln, a)),
                           Expr::div(Expr::mul(b, da), a));
        return Expr::mul(Expr::pow(a, b), t);
      }
      case NodeKind::Call: {
        Expr a = sub(n.a);
        Expr da = run(a);
        switch (n.fn) {
          case Func::Sin: return Expr::mul(Expr::call(Func::Cos, a), da);
          case Func::Cos:
            return Expr::neg(Expr::mul(Expr::call(Func::Sin, a), da));
          case Func::Tan: {
            Expr t = Expr::call(Func::Tan, a);
            return Expr::mul(
                Expr::add(Expr::number(1.0), Expr::mul(t, t)), da);
          }
          case Func::Exp: return Expr::mul(Expr::call(Func::Exp, a), da);
          case Func::Ln: return Expr::div(da, a);
          case Func::Sqrt:
            return Expr::div(
                da, Expr::mul(Expr::number(2.0), Expr::call(Func::Sqrt, a)));
          case Func::Abs:
            // d|a| = sign(a) a', with sign(0) = 0.
            return Expr::mul(Expr::call(Func::Sign, a), da);
          case Func::Sign: return Expr::number(0.0);
        }
        return Expr::number(0.0);
      }
    }
    return Expr::number(0.0);
  }

  const std::string& wrt_;
  std::unordered_map<const ExprNode*, Expr> memo_;
};

}  // namespace detail

inline Expr Expr::diff(const std::string& wrt) const {
  detail::Differentiator d(wrt);
  return d.run(*this);
}

// ---------------------------------------------------------------------------
// Parser.  Grammar:
//   expr   := term (("+"|"-") term)*
//   term   := factor (("*"|"/") factor)*
//   factor := "-" factor | base ("^" factor)?
//   base   := number | ident | ident "(" expr ")" | "(" expr ")"
// Power is right-associative and binds tighter than unary minus, so
// "-x^2" parses as -(x^2).
// ---------------------------------------------------------------------------
class Parser {
 public:
  Parser(std::string_view src, const std::vector<std::string>& declared)
      : src_(src) {
    for (const auto& d : declared) declared_.insert(d);
  }

  Expr parse() {
    Expr e = parse_expr();
    skip_ws();
    if (pos_ != src_.size()) fail("unexpected trailing input");
    return e;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(msg, pos_ + 1);
  }

  void skip_ws() {
    while (pos_ < src_.size() &&
           (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\n' ||
            src_[pos_] == '\r'))
      ++pos_;
  }

  bool eat(char c) {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  Expr parse_expr() {
    Expr e = parse_term();
    for (;;) {
      if (eat('+')) {
        e = Expr::add(e, parse_term());
      } else if (eat('-')) {
        e = Expr::sub(e, parse_term());
      } else {
        return e;
      }
    }
  }

  Expr parse_term() {
    Expr e = parse_factor();
    for (;;) {
      if (eat('*')) {
        e = Expr::mul(e, parse_factor());
      } else if (eat('/')) {
        e = Expr::div(e, parse_factor());
      } else {
        return e;
      }
    }
  }

  Expr parse_factor() {
    if (eat('-')) return Expr::neg(parse_factor());
    Expr b = parse_base();
    if (eat('^')) return Expr::pow(b, parse_factor());
    return b;
  }

  Expr parse_base() {
    skip_ws();
    if (pos_ >= src_.size()) fail("unexpected end of input");
    char c = src_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = parse_expr();
      if (!eat(')')) fail("expected ')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.')
      return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_')
      return parse_ident();
    fail(std::string("unexpected character '") + c + "'");
  }

  Expr parse_number() {
    std::size_t start = pos_;
    while (pos_ < src_.size() &&
           std::isdigit(static_cast<unsigned char>(src_[pos_])))
      ++pos_;
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      while (pos_ < src_.size() &&
             std::isdigit(static_cast<unsigned char>(src_[pos_])))
        ++pos_;
    }
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      std::size_t mark = pos_;
      ++pos_;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-'))
        ++pos_;
      if (pos_ < src_.size() &&
          std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
        while (pos_ < src_.size() &&
               std::isdigit(static_cast<unsigned char>(src_[pos_])))
          ++pos_;
      } else {
        pos_ = mark;  // not an exponent
      }
    }
    if (pos_ == start) fail("expected number");
    double v = 0.0;
    try {
      v = std::stod(std::string(src_.substr(start, pos_ - start)));
    } catch (const std::exception&) {
      pos_ = start;
      fail("malformed number");
    }
    return Expr::number(v);
  }

  Expr parse_ident() {
    std::size_t start = pos_;
    while (pos_ < src_.size() &&
           (std::isalnum(static_cast<unsigned char>(src_[pos_])) ||
            src_[pos_] == '_'))
      ++pos_;
    std::string name(src_.substr(start, pos_ - start));
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == '(') {
      auto fn = func_from_name(name);
      if (!fn) {
        pos_ = start;
        fail("unknown function '" + name + "'");
      }
      ++pos_;
      Expr arg = parse_expr();
      if (!eat(')')) fail("expected ')'");
      return Expr::call(*fn, arg);
    }
    if (!declared_.count(name)) {
      pos_ = start;
      fail("undeclared identifier '" + name + "'");
    }
    return Expr::variable(name, static_cast<int>(start + 1));
  }

  std::string_view src_;
  std::unordered_set<std::string> declared_;
  std::size_t pos_ = 0;
};

inline Expr parse(std::string_view source,
                  const std::vector<std::string>& declared_names) {
  return Parser(source, declared_names).parse();
}

// ---------------------------------------------------------------------------
// Tape compilation.  A ProgramSet compiles any number of expressions over a
// fixed slot layout into one flat tape with cross-expression subtree sharing;
// evaluation is a single linear pass.
// ---------------------------------------------------------------------------
class ProgramSet {
 public:
  explicit ProgramSet(std::vector<std::string> slot_names)
      : slot_names_(std::move(slot_names)) {
    for (std::size_t i = 0; i < slot_names_.size(); ++i)
      slot_index_[slot_names_[i]] = static_cast<int>(i);
  }
  ProgramSet() = default;

  // Returns the output index of the added expression.
  int add(const Expr& e) {
    outputs_.push_back(compile_node(e.ptr()));
    return static_cast<int>(outputs_.size() - 1);
  }

  int num_outputs() const { return static_cast<int>(outputs_.size()); }
  std::size_t num_slots() const { return slot_names_.size(); }

  // scratch is resized as needed; reuse it across calls in hot loops.
  void eval(std::span<const double> slots, std::vector<double>& scratch,
            std::span<double> out) const {
    scratch.resize(tape_.size());
    for (std::size_t i = 0; i < tape_.size(); ++i) {
      const Op& op = tape_[i];
      double a = op.i0 >= 0 ? scratch[static_cast<std::size_t>(op.i0)] : 0.0;
      double b = op.i1 >= 0 ? scratch[static_cast<std::size_t>(op.i1)] : 0.0;
      double r = 0.0;
      switch (op.kind) {
        case NodeKind::Number: r = op.value; break;
        case NodeKind::Variable: r = slots[static_cast<std::size_t>(op.slot)]; break;
        case NodeKind::Neg: r = -a; break;
        case NodeKind::Add: r = a + b; break;
        case NodeKind::Sub: r = a - b; break;
        case NodeKind::Mul: r = a * b; break;
        case NodeKind::Div:
          if (b == 0.0) Expr::domain_error("division by zero", op.node);
          r = a / b;
          break;
        case NodeKind::Pow: r = Expr::eval_pow(a, b, op.node); break;
        case NodeKind::Call: r = Expr::eval_func(op.fn, a, op.node); break;
      }
      scratch[i] = r;
    }
    for (std::size_t k = 0; k < outputs_.size(); ++k)
      out[k] = outputs_[k] >= 0 ? scratch[static_cast<std::size_t>(outputs_[k])] : 0.0;
  }

  std::vector<double> eval(std::span<const double> slots) const {
    std::vector<double> scratch, out(outputs_.size());
    eval(slots, scratch, out);
    return out;
  }

 private:
  struct Op {
    NodeKind kind;
    Func fn = Func::Sin;
    double value = 0.0;
    int slot = -1;
    int i0 = -1, i1 = -1;
    const ExprNode* node = nullptr;
  };

  int compile_node(const NodePtr& p) {
    if (!p) throw std::logic_error("compiling empty expression");
    auto it = cache_.find(p.get());
    if (it != cache_.end()) return it->second;
    Op op;
    op.kind = p->kind;
    op.node = p.get();
    switch (p->kind) {
      case NodeKind::Number: op.value = p->value; break;
      case NodeKind::Variable: {
        auto si = slot_index_.find(p->name);
        if (si == slot_index_.end())
          throw std::logic_error("expression references unknown slot '" +
                                 p->name + "'");
        op.slot = si->second;
        break;
      }
      case NodeKind::Call: op.fn = p->fn; [[fallthrough]];
      default:
        if (p->a) op.i0 = compile_node(p->a);
        if (p->b) op.i1 = compile_node(p->b);
        break;
    }
    // keep the shared_ptr alive for op.node
    retained_.push_back(p);
    tape_.push_back(op);
    int idx = static_cast<int>(tape_.size() - 1);
    cache_.emplace(p.get(), idx);
    return idx;
  }

  std::vector<std::string> slot_names_;
  std::unordered_map<std::string, int> slot_index_;
  std::unordered_map<const ExprNode*, int> cache_;
  std::vector<NodePtr> retained_;
  std::vector<Op> tape_;
  std::vector<int> outputs_;
};

}  // namespace sode

#endif  // SODE_EXPR_HPP
