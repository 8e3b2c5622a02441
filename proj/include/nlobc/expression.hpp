#pragma once

#include "nlobc/types.hpp"

#include <memory>
#include <string>
#include <string_view>

namespace nlobc {

/// Compiled arithmetic expression over point coordinates.
///
/// Grammar: numbers, identifiers `x1..x3` (also `z1..z3`, same slots), the
/// constants `pi` and `e`, binary `+ - * / ^` (`^` right associative),
/// unary minus, parentheses, and the functions exp, log, sqrt, abs, sin, cos,
/// tanh (one argument) and min, max (two or more arguments).
class Expression {
 public:
  struct Node;

  static Expression parse(std::string_view text);

  double operator()(const Point& x) const;

  /// True when the expression contains no coordinate references.
  bool is_constant() const;

  /// Highest coordinate slot referenced (0 when constant).
  int max_coordinate() const;

  const std::string& text() const { return text_; }

  ScalarField as_field() const;

 private:
  std::shared_ptr<const Node> root_;
  std::string text_;
};

}  // namespace nlobc
