#include "nlobc/expression.hpp"

#include "nlobc/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <vector>

namespace nlobc {

struct Expression::Node {
  enum class Kind { Number, Coord, Neg, Add, Sub, Mul, Div, Pow, Call };
  Kind kind = Kind::Number;
  double value = 0.0;
  int slot = 0;
  std::string fn;
  std::vector<std::shared_ptr<const Node>> args;

  double eval(const Point& x) const {
    switch (kind) {
      case Kind::Number: return value;
      case Kind::Coord:
        if (slot >= x.size()) {
          throw Error(ErrorCode::InvalidArgument,
                      "expression references coordinate " + std::to_string(slot + 1) +
                          " of a " + std::to_string(x.size()) + "-D point");
        }
        return x(slot);
      case Kind::Neg: return -args[0]->eval(x);
      case Kind::Add: return args[0]->eval(x) + args[1]->eval(x);
      case Kind::Sub: return args[0]->eval(x) - args[1]->eval(x);
      case Kind::Mul: return args[0]->eval(x) * args[1]->eval(x);
      case Kind::Div: return args[0]->eval(x) / args[1]->eval(x);
      case Kind::Pow: return std::pow(args[0]->eval(x), args[1]->eval(x));
      case Kind::Call: return call(x);
    }
    return 0.0;
  }

  double call(const Point& x) const {
    if (fn == "min" || fn == "max") {
      double r = args[0]->eval(x);
      for (std::size_t i = 1; i < args.size(); ++i) {
        const double v = args[i]->eval(x);
        r = fn == "min" ? std::min(r, v) : std::max(r, v);
      }
      return r;
    }
    const double a = args[0]->eval(x);
    if (fn == "exp") return std::exp(a);
    if (fn == "log") return std::log(a);
    if (fn == "sqrt") return std::sqrt(a);
    if (fn == "abs") return std::abs(a);
    if (fn == "sin") return std::sin(a);
    if (fn == "cos") return std::cos(a);
    if (fn == "tanh") return std::tanh(a);
    return 0.0;
  }

  int max_slot() const {
    int m = kind == Kind::Coord ? slot + 1 : 0;
    for (const auto& a : args) m = std::max(m, a->max_slot());
    return m;
  }
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Kind = Expression::Node::Kind;

NodePtr make_binary(Kind kind, NodePtr lhs, NodePtr rhs) {
  auto n = std::make_shared<Expression::Node>();
  n->kind = kind;
  n->args = {std::move(lhs), std::move(rhs)};
  return n;
}

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  NodePtr parse() {
    NodePtr n = expr();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return n;
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    throw Error(ErrorCode::ConfigError, "cannot parse expression '" + std::string(text_) +
                                            "' at offset " + std::to_string(pos_) + ": " + why);
  }

  void skip_ws() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(char c) {
    skip_ws();
    if (pos_ < text_.size() && text_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  NodePtr expr() {
    NodePtr lhs = term();
    for (;;) {
      if (accept('+')) lhs = make_binary(Kind::Add, lhs, term());
      else if (accept('-')) lhs = make_binary(Kind::Sub, lhs, term());
      else return lhs;
    }
  }

  NodePtr term() {
    NodePtr lhs = unary();
    for (;;) {
      if (accept('*')) lhs = make_binary(Kind::Mul, lhs, unary());
      else if (accept('/')) lhs = make_binary(Kind::Div, lhs, unary());
      else return lhs;
    }
  }

  NodePtr unary() {
    if (accept('-')) {
      auto n = std::make_shared<Expression::Node>();
      n->kind = Kind::Neg;
      n->args = {unary()};
      return n;
    }
    if (accept('+')) return unary();
    return power();
  }

  NodePtr power() {
    NodePtr base = primary();
    if (accept('^')) return make_binary(Kind::Pow, base, unary());
    return base;
  }

  NodePtr primary() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end");
    const char c = text_[pos_];
    if (accept('(')) {
      NodePtr n = expr();
      if (!accept(')')) fail("expected ')'");
      return n;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c))) return identifier();
    fail("unexpected '" + std::string(1, c) + "'");
  }

  NodePtr number() {
    const char* begin = text_.data() + pos_;
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin) fail("bad number");
    pos_ += static_cast<std::size_t>(end - begin);
    auto n = std::make_shared<Expression::Node>();
    n->value = v;
    return n;
  }

  NodePtr identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
      ++pos_;
    }
    const std::string name(text_.substr(start, pos_ - start));
    auto n = std::make_shared<Expression::Node>();
    if (name == "pi") {
      n->value = std::numbers::pi;
      return n;
    }
    if (name == "e") {
      n->value = std::numbers::e;
      return n;
    }
    if (name.size() == 2 && (name[0] == 'x' || name[0] == 'z') && name[1] >= '1' &&
        name[1] <= '0' + kMaxDim) {
      n->kind = Kind::Coord;
      n->slot = name[1] - '1';
      return n;
    }
    static const std::vector<std::string> unary_fns = {"exp", "log", "sqrt", "abs",
                                                       "sin", "cos", "tanh"};
    const bool is_unary = std::find(unary_fns.begin(), unary_fns.end(), name) != unary_fns.end();
    const bool is_variadic = name == "min" || name == "max";
    if (!is_unary && !is_variadic) fail("unknown identifier '" + name + "'");
    if (!accept('(')) fail("expected '(' after " + name);
    n->kind = Kind::Call;
    n->fn = name;
    n->args.push_back(expr());
    while (accept(',')) n->args.push_back(expr());
    if (!accept(')')) fail("expected ')' closing " + name);
    if (is_unary && n->args.size() != 1) fail(name + " takes one argument");
    if (is_variadic && n->args.size() < 2) fail(name + " takes at least two arguments");
    return n;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression Expression::parse(std::string_view text) {
  Expression e;
  e.root_ = Parser(text).parse();
  e.text_ = std::string(text);
  return e;
}

double Expression::operator()(const Point& x) const { return root_->eval(x); }

bool Expression::is_constant() const { return root_->max_slot() == 0; }

int Expression::max_coordinate() const { return root_->max_slot(); }

ScalarField Expression::as_field() const {
  auto root = root_;
  return [root](const Point& x) { return root->eval(x); };
}

}  // namespace nlobc
