#pragma once

#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace pfc {

/// Arithmetic expression over named variables, compiled once and evaluated many
/// times. Grammar: + - * / ^ (right associative), unary minus, parentheses,
/// numbers, identifiers and calls of
///   sin cos tan asin acos atan exp log sqrt abs tanh cosh sinh floor   (one argument)
///   atan2 hypot min max pow                                           (two arguments)
/// The constant `pi` is always defined.
class Expression {
 public:
  /// Throws ConfigError on a syntax error or on an identifier outside `variables`.
  Expression(std::string_view text, const std::vector<std::string>& variables = {});

  const std::string& text() const { return text_; }
  /// Values in the order of the constructor's variable list.
  double operator()(const std::vector<double>& values) const;
  double operator()() const { return (*this)({}); }

  struct Node;

 private:
  std::string text_;
  std::size_t arity_ = 0;
  std::shared_ptr<const Node> root_;
};

/// Evaluates a constant expression with the given named values.
double evaluate(std::string_view text, const std::map<std::string, double>& values = {});

}  // namespace pfc
