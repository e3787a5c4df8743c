#include "gramsyn/expr.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <sstream>

#include "gramsyn/errors.hpp"

namespace gramsyn::expr {

namespace {

enum class Kind { Constant, Time, StateVar, Param, Unary, Binary };

bool is_function_name(std::string_view s) {
  return s == "sin" || s == "cos" || s == "tanh" || s == "exp" || s == "log" ||
         s == "sqrt" || s == "abs";
}

UnaryOp function_op(std::string_view s) {
  if (s == "sin") return UnaryOp::Sin;
  if (s == "cos") return UnaryOp::Cos;
  if (s == "tanh") return UnaryOp::Tanh;
  if (s == "exp") return UnaryOp::Exp;
  if (s == "log") return UnaryOp::Log;
  if (s == "sqrt") return UnaryOp::Sqrt;
  return UnaryOp::Abs;
}

}  // namespace

struct Expr::Node {
  Kind kind;
  double value = 0.0;       // Constant
  int index = 0;            // StateVar (1-based)
  std::string name;         // Param
  UnaryOp uop = UnaryOp::Neg;
  BinaryOp bop = BinaryOp::Add;
  NodePtr lhs, rhs;
};

namespace {

using Node = Expr::Node;

// ---------------------------------------------------------------------------
// Jet arithmetic
// ---------------------------------------------------------------------------

DualValue d_const(double v) { return {v, 0.0, 0.0}; }

DualValue d_add(DualValue a, DualValue b) {
  return {a.value + b.value, a.first + b.first, a.second + b.second};
}

DualValue d_sub(DualValue a, DualValue b) {
  return {a.value - b.value, a.first - b.first, a.second - b.second};
}

DualValue d_neg(DualValue a) { return {-a.value, -a.first, -a.second}; }

DualValue d_mul(DualValue a, DualValue b) {
  return {a.value * b.value, a.first * b.value + a.value * b.first,
          a.second * b.value + 2.0 * a.first * b.first + a.value * b.second};
}

DualValue d_div(DualValue a, DualValue b) {
  if (b.value == 0.0) fail(ErrorKind::Domain, "division by zero");
  const double q = a.value / b.value;
  const double q1 = (a.first - q * b.first) / b.value;
  const double q2 = (a.second - 2.0 * q1 * b.first - q * b.second) / b.value;
  return {q, q1, q2};
}

// f(u) with f' and f'' supplied: chain rule for order-2 jets.
DualValue d_chain(DualValue u, double f, double fp, double fpp) {
  return {f, fp * u.first, fpp * u.first * u.first + fp * u.second};
}

DualValue d_unary(UnaryOp op, DualValue u) {
  switch (op) {
    case UnaryOp::Neg:
      return d_neg(u);
    case UnaryOp::Sin:
      return d_chain(u, std::sin(u.value), std::cos(u.value), -std::sin(u.value));
    case UnaryOp::Cos:
      return d_chain(u, std::cos(u.value), -std::sin(u.value), -std::cos(u.value));
    case UnaryOp::Tanh: {
      const double th = std::tanh(u.value);
      const double sech2 = 1.0 - th * th;
      return d_chain(u, th, sech2, -2.0 * th * sech2);
    }
    case UnaryOp::Exp: {
      const double e = std::exp(u.value);
      return d_chain(u, e, e, e);
    }
    case UnaryOp::Log: {
      if (u.value <= 0.0) fail(ErrorKind::Domain, "log of nonpositive value");
      return d_chain(u, std::log(u.value), 1.0 / u.value, -1.0 / (u.value * u.value));
    }
    case UnaryOp::Sqrt: {
      if (u.value < 0.0) fail(ErrorKind::Domain, "sqrt of negative value");
      if (u.value == 0.0) {
        if (u.first != 0.0 || u.second != 0.0)
          fail(ErrorKind::Domain, "sqrt not differentiable at zero");
        return {0.0, 0.0, 0.0};
      }
      const double r = std::sqrt(u.value);
      return d_chain(u, r, 0.5 / r, -0.25 / (r * u.value));
    }
    case UnaryOp::Abs: {
      const double s = u.value > 0.0 ? 1.0 : (u.value < 0.0 ? -1.0 : 0.0);
      return {std::abs(u.value), s * u.first, s * u.second};
    }
  }
  fail(ErrorKind::Domain, "unknown unary op");
}

DualValue d_int_pow(DualValue a, long long p) {
  if (p == 0) return d_const(1.0);
  if (p < 0) {
    if (a.value == 0.0) fail(ErrorKind::Domain, "zero raised to negative power");
    return d_div(d_const(1.0), d_int_pow(a, -p));
  }
  DualValue acc = d_const(1.0);
  DualValue base = a;
  while (p > 0) {
    if (p & 1) acc = d_mul(acc, base);
    base = (p >>= 1) ? d_mul(base, base) : base;
  }
  return acc;
}

bool integral_exponent(const Node* rhs, long long& out) {
  double v = 0.0;
  if (rhs->kind == Kind::Constant) {
    v = rhs->value;
  } else if (rhs->kind == Kind::Unary && rhs->uop == UnaryOp::Neg &&
             rhs->lhs->kind == Kind::Constant) {
    v = -rhs->lhs->value;
  } else {
    return false;
  }
  if (!(std::abs(v) <= 1024.0) || v != std::floor(v)) return false;
  out = static_cast<long long>(v);
  return true;
}

DualValue d_pow(const Node* node, DualValue a, DualValue b) {
  long long p = 0;
  if (integral_exponent(node->rhs.get(), p)) return d_int_pow(a, p);
  if (a.value <= 0.0) fail(ErrorKind::Domain, "power of nonpositive base");
  return d_unary(UnaryOp::Exp, d_mul(b, d_unary(UnaryOp::Log, a)));
}

DualValue eval_node(const Node* node, double t, const Vec& x, const Vec* dx,
                    const ParamMap* params) {
  switch (node->kind) {
    case Kind::Constant:
      return d_const(node->value);
    case Kind::Time:
      return d_const(t);
    case Kind::StateVar: {
      DualValue v;
      v.value = x[static_cast<std::size_t>(node->index) - 1];
      v.first = dx ? (*dx)[static_cast<std::size_t>(node->index) - 1] : 0.0;
      return v;
    }
    case Kind::Param: {
      if (params != nullptr) {
        auto it = params->find(node->name);
        if (it != params->end()) return d_const(it->second);
      }
      fail(ErrorKind::UnknownIdentifier, "unbound parameter '" + node->name + "'");
    }
    case Kind::Unary:
      return d_unary(node->uop, eval_node(node->lhs.get(), t, x, dx, params));
    case Kind::Binary: {
      const DualValue a = eval_node(node->lhs.get(), t, x, dx, params);
      if (node->bop == BinaryOp::Pow)
        return d_pow(node, a, eval_node(node->rhs.get(), t, x, dx, params));
      const DualValue b = eval_node(node->rhs.get(), t, x, dx, params);
      switch (node->bop) {
        case BinaryOp::Add: return d_add(a, b);
        case BinaryOp::Sub: return d_sub(a, b);
        case BinaryOp::Mul: return d_mul(a, b);
        case BinaryOp::Div: return d_div(a, b);
        case BinaryOp::Pow: break;
      }
      fail(ErrorKind::Domain, "unknown binary op");
    }
  }
  fail(ErrorKind::Domain, "corrupt expression node");
}

// ---------------------------------------------------------------------------
// Parser
// ---------------------------------------------------------------------------

struct Token {
  enum class Type { Number, Ident, Op, LParen, RParen, Comma, End };
  Type type = Type::End;
  double number = 0.0;
  std::string text;
  char op = 0;
  std::size_t offset = 0;
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) { advance(); }

  const Token& peek() const { return current_; }

  Token take() {
    Token t = current_;
    advance();
    return t;
  }

 private:
  void advance() {
    while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    current_ = Token{};
    current_.offset = pos_;
    if (pos_ >= src_.size()) {
      current_.type = Token::Type::End;
      return;
    }
    const char c = src_[pos_];
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      const char* begin = src_.data() + pos_;
      const char* end = src_.data() + src_.size();
      double value = 0.0;
      auto [ptr, ec] = std::from_chars(begin, end, value);
      if (ec != std::errc{})
        fail(ErrorKind::Syntax, "malformed number at byte " + std::to_string(pos_));
      current_.type = Token::Type::Number;
      current_.number = value;
      pos_ += static_cast<std::size_t>(ptr - begin);
      return;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t end = pos_;
      while (end < src_.size() &&
             (std::isalnum(static_cast<unsigned char>(src_[end])) || src_[end] == '_'))
        ++end;
      current_.type = Token::Type::Ident;
      current_.text = std::string(src_.substr(pos_, end - pos_));
      pos_ = end;
      return;
    }
    switch (c) {
      case '+': case '-': case '*': case '/': case '^':
        current_.type = Token::Type::Op;
        current_.op = c;
        break;
      case '(': current_.type = Token::Type::LParen; break;
      case ')': current_.type = Token::Type::RParen; break;
      case ',': current_.type = Token::Type::Comma; break;
      default:
        fail(ErrorKind::Syntax,
             std::string("unexpected character '") + c + "' at byte " + std::to_string(pos_));
    }
    ++pos_;
  }

  std::string_view src_;
  std::size_t pos_ = 0;
  Token current_;
};

class Parser {
 public:
  Parser(std::string_view src, int dimension) : lexer_(src), dimension_(dimension) {}

  Expr::NodePtr parse() {
    auto node = parse_sum();
    const Token& t = lexer_.peek();
    if (t.type != Token::Type::End)
      fail(ErrorKind::Syntax, "trailing input at byte " + std::to_string(t.offset));
    return node;
  }

 private:
  using NodePtr = Expr::NodePtr;

  static NodePtr make_binary(BinaryOp op, NodePtr lhs, NodePtr rhs) {
    auto node = std::make_shared<Node>();
    node->kind = Kind::Binary;
    node->bop = op;
    node->lhs = std::move(lhs);
    node->rhs = std::move(rhs);
    return node;
  }

  NodePtr parse_sum() {
    NodePtr lhs = parse_term();
    for (;;) {
      const Token& t = lexer_.peek();
      if (t.type != Token::Type::Op || (t.op != '+' && t.op != '-')) return lhs;
      const char op = lexer_.take().op;
      lhs = make_binary(op == '+' ? BinaryOp::Add : BinaryOp::Sub, lhs, parse_term());
    }
  }

  NodePtr parse_term() {
    NodePtr lhs = parse_factor();
    for (;;) {
      const Token& t = lexer_.peek();
      if (t.type != Token::Type::Op || (t.op != '*' && t.op != '/')) return lhs;
      const char op = lexer_.take().op;
      lhs = make_binary(op == '*' ? BinaryOp::Mul : BinaryOp::Div, lhs, parse_factor());
    }
  }

  // Unary minus binds below ^, so -x^2 parses as -(x^2).
  NodePtr parse_factor() {
    const Token& t = lexer_.peek();
    if (t.type == Token::Type::Op && t.op == '-') {
      lexer_.take();
      auto node = std::make_shared<Node>();
      node->kind = Kind::Unary;
      node->uop = UnaryOp::Neg;
      node->lhs = parse_factor();
      return node;
    }
    if (t.type == Token::Type::Op && t.op == '+') {
      lexer_.take();
      return parse_factor();
    }
    return parse_power();
  }

  NodePtr parse_power() {
    NodePtr base = parse_atom();
    const Token& t = lexer_.peek();
    if (t.type == Token::Type::Op && t.op == '^') {
      lexer_.take();
      return make_binary(BinaryOp::Pow, base, parse_factor());  // right-assoc
    }
    return base;
  }

  NodePtr parse_atom() {
    Token t = lexer_.take();
    switch (t.type) {
      case Token::Type::Number: {
        auto node = std::make_shared<Node>();
        node->kind = Kind::Constant;
        node->value = t.number;
        return node;
      }
      case Token::Type::LParen: {
        NodePtr inner = parse_sum();
        Token close = lexer_.take();
        if (close.type != Token::Type::RParen)
          fail(ErrorKind::Syntax, "expected ')' at byte " + std::to_string(close.offset));
        return inner;
      }
      case Token::Type::Ident:
        return parse_ident(std::move(t));
      default:
        fail(ErrorKind::Syntax, "unexpected token at byte " + std::to_string(t.offset));
    }
  }

  NodePtr parse_ident(Token ident) {
    const std::string& name = ident.text;
    if (is_function_name(name)) {
      Token open = lexer_.take();
      if (open.type != Token::Type::LParen)
        fail(ErrorKind::Arity,
             "function '" + name + "' needs one argument at byte " + std::to_string(ident.offset));
      NodePtr arg = parse_sum();
      Token next = lexer_.take();
      if (next.type == Token::Type::Comma)
        fail(ErrorKind::Arity,
             "function '" + name + "' takes one argument at byte " + std::to_string(next.offset));
      if (next.type != Token::Type::RParen)
        fail(ErrorKind::Syntax, "expected ')' at byte " + std::to_string(next.offset));
      auto node = std::make_shared<Node>();
      node->kind = Kind::Unary;
      node->uop = function_op(name);
      node->lhs = std::move(arg);
      return node;
    }
    if (name == "t") {
      auto node = std::make_shared<Node>();
      node->kind = Kind::Time;
      return node;
    }
    if (name.size() >= 2 && name[0] == 'x' &&
        name.find_first_not_of("0123456789", 1) == std::string::npos) {
      int index = 0;
      std::from_chars(name.data() + 1, name.data() + name.size(), index);
      if (index < 1 || index > dimension_)
        fail(ErrorKind::UnknownIdentifier,
             "state variable '" + name + "' outside dimension " + std::to_string(dimension_) +
                 " at byte " + std::to_string(ident.offset));
      auto node = std::make_shared<Node>();
      node->kind = Kind::StateVar;
      node->index = index;
      return node;
    }
    auto node = std::make_shared<Node>();
    node->kind = Kind::Param;
    node->name = name;
    return node;
  }

  Lexer lexer_;
  int dimension_;
};

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

int precedence(const Node* n) {
  if (n->kind == Kind::Binary) {
    switch (n->bop) {
      case BinaryOp::Add: case BinaryOp::Sub: return 1;
      case BinaryOp::Mul: case BinaryOp::Div: return 2;
      case BinaryOp::Pow: return 4;
    }
  }
  if (n->kind == Kind::Unary && n->uop == UnaryOp::Neg) return 3;
  return 5;
}

void print_node(std::ostream& os, const Node* n);

void print_child(std::ostream& os, const Node* child, int parent_prec, bool needs_paren_on_tie) {
  const int child_prec = precedence(child);
  const bool paren = child_prec < parent_prec || (child_prec == parent_prec && needs_paren_on_tie);
  if (paren) os << '(';
  print_node(os, child);
  if (paren) os << ')';
}

const char* unary_name(UnaryOp op) {
  switch (op) {
    case UnaryOp::Neg: return "-";
    case UnaryOp::Sin: return "sin";
    case UnaryOp::Cos: return "cos";
    case UnaryOp::Tanh: return "tanh";
    case UnaryOp::Exp: return "exp";
    case UnaryOp::Log: return "log";
    case UnaryOp::Sqrt: return "sqrt";
    case UnaryOp::Abs: return "abs";
  }
  return "?";
}

void print_node(std::ostream& os, const Node* n) {
  switch (n->kind) {
    case Kind::Constant: {
      char buf[40];
      std::snprintf(buf, sizeof(buf), "%.17g", n->value);
      os << buf;
      return;
    }
    case Kind::Time: os << 't'; return;
    case Kind::StateVar: os << 'x' << n->index; return;
    case Kind::Param: os << n->name; return;
    case Kind::Unary:
      if (n->uop == UnaryOp::Neg) {
        os << '-';
        print_child(os, n->lhs.get(), 3, false);
      } else {
        os << unary_name(n->uop) << '(';
        print_node(os, n->lhs.get());
        os << ')';
      }
      return;
    case Kind::Binary: {
      const int prec = precedence(n);
      const char op = n->bop == BinaryOp::Add ? '+'
                      : n->bop == BinaryOp::Sub ? '-'
                      : n->bop == BinaryOp::Mul ? '*'
                      : n->bop == BinaryOp::Div ? '/' : '^';
      if (n->bop == BinaryOp::Pow) {
        // Right-associative: parenthesize left operand on ties.
        print_child(os, n->lhs.get(), prec, true);
        os << op;
        print_child(os, n->rhs.get(), prec, false);
      } else {
        print_child(os, n->lhs.get(), prec, false);
        os << op;
        print_child(os, n->rhs.get(), prec, true);
      }
      return;
    }
  }
}

bool nodes_equal(const Node* a, const Node* b) {
  if (a == b) return true;
  if (a->kind != b->kind) return false;
  switch (a->kind) {
    case Kind::Constant: return a->value == b->value;
    case Kind::Time: return true;
    case Kind::StateVar: return a->index == b->index;
    case Kind::Param: return a->name == b->name;
    case Kind::Unary: return a->uop == b->uop && nodes_equal(a->lhs.get(), b->lhs.get());
    case Kind::Binary:
      return a->bop == b->bop && nodes_equal(a->lhs.get(), b->lhs.get()) &&
             nodes_equal(a->rhs.get(), b->rhs.get());
  }
  return false;
}

Expr::NodePtr resolve_node(const Expr::NodePtr& n, const ParamMap& params) {
  switch (n->kind) {
    case Kind::Param: {
      auto it = params.find(n->name);
      if (it == params.end()) return n;
      auto c = std::make_shared<Node>();
      c->kind = Kind::Constant;
      c->value = it->second;
      return c;
    }
    case Kind::Unary: {
      auto c = std::make_shared<Node>(*n);
      c->lhs = resolve_node(n->lhs, params);
      return c;
    }
    case Kind::Binary: {
      auto c = std::make_shared<Node>(*n);
      c->lhs = resolve_node(n->lhs, params);
      c->rhs = resolve_node(n->rhs, params);
      return c;
    }
    default:
      return n;
  }
}

void collect_params(const Node* n, std::vector<std::string>& out) {
  switch (n->kind) {
    case Kind::Param:
      out.push_back(n->name);
      return;
    case Kind::Unary:
      collect_params(n->lhs.get(), out);
      return;
    case Kind::Binary:
      collect_params(n->lhs.get(), out);
      collect_params(n->rhs.get(), out);
      return;
    default:
      return;
  }
}

bool node_uses_state(const Node* n) {
  switch (n->kind) {
    case Kind::StateVar:
      return true;
    case Kind::Unary:
      return node_uses_state(n->lhs.get());
    case Kind::Binary:
      return node_uses_state(n->lhs.get()) || node_uses_state(n->rhs.get());
    default:
      return false;
  }
}

}  // namespace

Expr Expr::parse(std::string_view text, int dimension) {
  if (text.empty()) fail(ErrorKind::Syntax, "empty expression");
  Parser parser(text, dimension);
  return Expr(parser.parse(), dimension);
}

Expr Expr::constant(double value) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Constant;
  n->value = value;
  return Expr(n, 0);
}

Expr Expr::state_var(int index, int dimension) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::StateVar;
  n->index = index;
  return Expr(n, dimension);
}

Expr Expr::time_var() {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Time;
  return Expr(n, 0);
}

Expr Expr::unary(UnaryOp op, Expr operand) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Unary;
  n->uop = op;
  n->lhs = operand.node_;
  return Expr(n, operand.dimension_);
}

Expr Expr::binary(BinaryOp op, Expr lhs, Expr rhs) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Binary;
  n->bop = op;
  n->lhs = lhs.node_;
  n->rhs = rhs.node_;
  return Expr(n, std::max(lhs.dimension_, rhs.dimension_));
}

double Expr::eval(double t, const Vec& x, const ParamMap* params) const {
  return eval_node(node_.get(), t, x, nullptr, params).value;
}

DualValue Expr::eval_dual(double t, const Vec& x, const Vec& dx, const ParamMap* params) const {
  return eval_node(node_.get(), t, x, &dx, params);
}

Expr Expr::resolve(const ParamMap& params) const {
  return Expr(resolve_node(node_, params), dimension_);
}

std::vector<std::string> Expr::parameter_names() const {
  std::vector<std::string> names;
  collect_params(node_.get(), names);
  return names;
}

bool Expr::uses_state() const { return node_uses_state(node_.get()); }

std::string Expr::to_string() const {
  std::ostringstream os;
  print_node(os, node_.get());
  return os.str();
}

bool Expr::structurally_equal(const Expr& other) const {
  return nodes_equal(node_.get(), other.node_.get());
}

Vec eval_field(const std::vector<Expr>& field, double t, const Vec& x, const ParamMap* params) {
  Vec out(field.size(), 0.0);
  for (std::size_t i = 0; i < field.size(); ++i) {
    out[i] = field[i].eval(t, x, params);
    if (!std::isfinite(out[i]))
      fail(ErrorKind::NonFinite, "non-finite field component " + std::to_string(i));
  }
  return out;
}

Mat jacobian(const std::vector<Expr>& field, double t, const Vec& x, const ParamMap* params) {
  const int d = static_cast<int>(x.size());
  const int n = static_cast<int>(field.size());
  Mat j(n, d);
  Vec seed(x.size(), 0.0);
  for (int col = 0; col < d; ++col) {
    seed[col] = 1.0;
    for (int row = 0; row < n; ++row) j(row, col) = field[row].eval_dual(t, x, seed, params).first;
    seed[col] = 0.0;
  }
  return j;
}

Vec second_directional(const std::vector<Expr>& field, double t, const Vec& x, const Vec& h,
                       const Vec& w, const ParamMap* params) {
  // D^2 f [h, w] = (D^2 f [h+w, h+w] - D^2 f [h-w, h-w]) / 4.
  Vec plus(x.size()), minus(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    plus[i] = h[i] + w[i];
    minus[i] = h[i] - w[i];
  }
  Vec out(field.size(), 0.0);
  for (std::size_t i = 0; i < field.size(); ++i) {
    const double a = field[i].eval_dual(t, x, plus, params).second;
    const double b = field[i].eval_dual(t, x, minus, params).second;
    out[i] = 0.25 * (a - b);
  }
  return out;
}

}  // namespace gramsyn::expr
