#include "pfc/expression.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <numbers>

#include "pfc/types.hpp"

namespace pfc {

struct Expression::Node {
  enum class Kind { number, variable, negate, binary, call1, call2 } kind;
  double value = 0.0;
  std::size_t slot = 0;
  char op = 0;
  double (*f1)(double) = nullptr;
  double (*f2)(double, double) = nullptr;
  std::shared_ptr<const Node> a, b;

  double eval(const std::vector<double>& v) const {
    switch (kind) {
      case Kind::number: return value;
      case Kind::variable: return v[slot];
      case Kind::negate: return -a->eval(v);
      case Kind::call1: return f1(a->eval(v));
      case Kind::call2: return f2(a->eval(v), b->eval(v));
      case Kind::binary: {
        const double x = a->eval(v), y = b->eval(v);
        switch (op) {
          case '+': return x + y;
          case '-': return x - y;
          case '*': return x * y;
          case '/': return x / y;
          default: return std::pow(x, y);
        }
      }
    }
    return 0.0;
  }
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Kind = Expression::Node::Kind;

double fabs_(double x) { return std::fabs(x); }
double fmin_(double x, double y) { return std::fmin(x, y); }
double fmax_(double x, double y) { return std::fmax(x, y); }

struct Unary {
  const char* name;
  double (*f)(double);
};
struct BinaryFn {
  const char* name;
  double (*f)(double, double);
};

const Unary kUnary[] = {
    {"sin", [](double x) { return std::sin(x); }},   {"cos", [](double x) { return std::cos(x); }},
    {"tan", [](double x) { return std::tan(x); }},   {"asin", [](double x) { return std::asin(x); }},
    {"acos", [](double x) { return std::acos(x); }}, {"atan", [](double x) { return std::atan(x); }},
    {"exp", [](double x) { return std::exp(x); }},   {"log", [](double x) { return std::log(x); }},
    {"sqrt", [](double x) { return std::sqrt(x); }}, {"abs", fabs_},
    {"tanh", [](double x) { return std::tanh(x); }}, {"cosh", [](double x) { return std::cosh(x); }},
    {"sinh", [](double x) { return std::sinh(x); }}, {"floor", [](double x) { return std::floor(x); }},
};
const BinaryFn kBinary[] = {
    {"atan2", [](double y, double x) { return std::atan2(y, x); }},
    {"hypot", [](double x, double y) { return std::hypot(x, y); }},
    {"min", fmin_},
    {"max", fmax_},
    {"pow", [](double x, double y) { return std::pow(x, y); }},
};

class Parser {
 public:
  Parser(std::string_view s, const std::vector<std::string>& vars) : s_(s), vars_(vars) {}

  NodePtr parse() {
    NodePtr n = sum();
    skip();
    if (pos_ != s_.size()) fail("unexpected '" + std::string(1, s_[pos_]) + "'");
    return n;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError("expression '" + std::string(s_) + "': " + what + " at column " + std::to_string(pos_ + 1));
  }
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool accept(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!accept(c)) fail(std::string("expected '") + c + "'");
  }

  static NodePtr binary(char op, NodePtr a, NodePtr b) {
    auto n = std::make_shared<Expression::Node>();
    n->kind = Kind::binary;
    n->op = op;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
  }

  NodePtr sum() {
    NodePtr n = product();
    for (;;) {
      if (accept('+')) n = binary('+', n, product());
      else if (accept('-')) n = binary('-', n, product());
      else return n;
    }
  }
  NodePtr product() {
    NodePtr n = unary();
    for (;;) {
      if (accept('*')) n = binary('*', n, unary());
      else if (accept('/')) n = binary('/', n, unary());
      else return n;
    }
  }
  // Unary minus binds looser than ^ so that -x^2 = -(x^2).
  NodePtr unary() {
    if (accept('-')) {
      auto n = std::make_shared<Expression::Node>();
      n->kind = Kind::negate;
      n->a = unary();
      return n;
    }
    if (accept('+')) return unary();
    NodePtr base = primary();
    if (accept('^')) return binary('^', base, unary());
    return base;
  }
  NodePtr primary() {
    skip();
    if (pos_ >= s_.size()) fail("unexpected end");
    const char c = s_[pos_];
    if (accept('(')) {
      NodePtr n = sum();
      expect(')');
      return n;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    fail("unexpected '" + std::string(1, c) + "'");
  }
  NodePtr number() {
    const std::string rest(s_.substr(pos_));
    char* end = nullptr;
    const double v = std::strtod(rest.c_str(), &end);
    if (end == rest.c_str()) fail("bad number");
    pos_ += static_cast<std::size_t>(end - rest.c_str());
    auto n = std::make_shared<Expression::Node>();
    n->kind = Kind::number;
    n->value = v;
    return n;
  }
  NodePtr identifier() {
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
    const std::string name(s_.substr(start, pos_ - start));
    skip();
    if (pos_ < s_.size() && s_[pos_] == '(') {
      ++pos_;
      for (const auto& u : kUnary)
        if (name == u.name) {
          auto n = std::make_shared<Expression::Node>();
          n->kind = Kind::call1;
          n->f1 = u.f;
          n->a = sum();
          expect(')');
          return n;
        }
      for (const auto& b : kBinary)
        if (name == b.name) {
          auto n = std::make_shared<Expression::Node>();
          n->kind = Kind::call2;
          n->f2 = b.f;
          n->a = sum();
          expect(',');
          n->b = sum();
          expect(')');
          return n;
        }
      fail("unknown function '" + name + "'");
    }
    for (std::size_t k = 0; k < vars_.size(); ++k)
      if (vars_[k] == name) {
        auto n = std::make_shared<Expression::Node>();
        n->kind = Kind::variable;
        n->slot = k;
        return n;
      }
    if (name == "pi") {
      auto n = std::make_shared<Expression::Node>();
      n->kind = Kind::number;
      n->value = std::numbers::pi;
      return n;
    }
    fail("unknown identifier '" + name + "'");
  }

  std::string_view s_;
  const std::vector<std::string>& vars_;
  std::size_t pos_ = 0;
};

}  // namespace

Expression::Expression(std::string_view text, const std::vector<std::string>& variables)
    : text_(text), arity_(variables.size()) {
  root_ = Parser(text_, variables).parse();
}

double Expression::operator()(const std::vector<double>& values) const {
  if (values.size() != arity_) throw ConfigError("expression '" + text_ + "': wrong number of values");
  return root_->eval(values);
}

double evaluate(std::string_view text, const std::map<std::string, double>& values) {
  std::vector<std::string> names;
  std::vector<double> v;
  for (const auto& [k, x] : values) {
    names.push_back(k);
    v.push_back(x);
  }
  return Expression(text, names)(v);
}

}  // namespace pfc
