#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dagtune {

/// Scalar arithmetic expression over named variables.
///
/// Grammar, loosest binding first:
///   expr    := term (('+' | '-') term)*
///   term    := unary (('*' | '/') unary)*
///   unary   := '-' unary | power
///   power   := primary ('^' unary)?        right-associative
///   primary := number | identifier | '(' expr ')'
/// Identifiers match [A-Za-z_][A-Za-z0-9_.]*, so dotted metric keys work.
/// Division by zero follows IEEE semantics (inf or nan).
class Expr {
 public:
  /// Throws ValidationError("... at position N ...") on a syntax error.
  static Expr parse(std::string_view text);

  const std::string& text() const { return text_; }
  /// Distinct identifiers in order of first appearance.
  const std::vector<std::string>& identifiers() const { return identifiers_; }

  /// values[i] is the value of identifiers()[i].
  double evaluate(std::span<const double> values) const;
  /// Throws ValidationError if an identifier is unbound.
  double evaluate(const std::map<std::string, double>& values) const;

 private:
  enum class Op { Number, Var, Neg, Add, Sub, Mul, Div, Pow };
  struct Node {
    Op op;
    double value = 0.0;
    int a = -1;
    int b = -1;
  };
  class Parser;

  double eval(int node, std::span<const double> values) const;

  std::string text_;
  std::vector<Node> nodes_;
  int root_ = -1;
  std::vector<std::string> identifiers_;
};

}  // namespace dagtune
