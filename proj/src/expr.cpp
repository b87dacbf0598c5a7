#include "dagtune/expr.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>

#include "dagtune/errors.hpp"

namespace dagtune {

class Expr::Parser {
 public:
  Parser(std::string_view text, Expr& out) : text_(text), out_(out) {}

  int parse() {
    const int root = expr();
    skip_ws();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ValidationError("expression syntax error at position " + std::to_string(pos_) + ": " +
                          what + " in '" + std::string(text_) + "'");
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

  int push(Op op, int a = -1, int b = -1, double v = 0.0) {
    out_.nodes_.push_back({op, v, a, b});
    return static_cast<int>(out_.nodes_.size()) - 1;
  }

  int expr() {
    int lhs = term();
    while (true) {
      if (accept('+')) {
        lhs = push(Op::Add, lhs, term());
      } else if (accept('-')) {
        lhs = push(Op::Sub, lhs, term());
      } else {
        return lhs;
      }
    }
  }

  int term() {
    int lhs = unary();
    while (true) {
      if (accept('*')) {
        lhs = push(Op::Mul, lhs, unary());
      } else if (accept('/')) {
        lhs = push(Op::Div, lhs, unary());
      } else {
        return lhs;
      }
    }
  }

  int unary() {
    if (accept('-')) return push(Op::Neg, unary());
    return power();
  }

  int power() {
    const int base = primary();
    if (accept('^')) return push(Op::Pow, base, unary());
    return base;
  }

  int primary() {
    skip_ws();
    if (pos_ >= text_.size()) fail("unexpected end of input");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      const int inner = expr();
      if (!accept(')')) fail("expected ')'");
      return inner;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
    fail("unexpected '" + std::string(1, c) + "'");
  }

  int number() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.')) {
      ++pos_;
    }
    if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
      std::size_t p = pos_ + 1;
      if (p < text_.size() && (text_[p] == '+' || text_[p] == '-')) ++p;
      if (p < text_.size() && std::isdigit(static_cast<unsigned char>(text_[p]))) {
        pos_ = p;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
      }
    }
    double v = 0.0;
    const auto res = std::from_chars(text_.data() + start, text_.data() + pos_, v);
    if (res.ec != std::errc() || res.ptr != text_.data() + pos_) {
      pos_ = start;
      fail("malformed number");
    }
    return push(Op::Number, -1, -1, v);
  }

  int identifier() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) ||
                                   text_[pos_] == '_' || text_[pos_] == '.')) {
      ++pos_;
    }
    const std::string name(text_.substr(start, pos_ - start));
    if (name.back() == '.') {
      pos_ = start;
      fail("identifier '" + name + "' ends with '.'");
    }
    auto& ids = out_.identifiers_;
    auto it = std::find(ids.begin(), ids.end(), name);
    if (it == ids.end()) {
      ids.push_back(name);
      it = ids.end() - 1;
    }
    return push(Op::Var, -1, -1, static_cast<double>(it - ids.begin()));
  }

  std::string_view text_;
  Expr& out_;
  std::size_t pos_ = 0;
};

Expr Expr::parse(std::string_view text) {
  Expr e;
  e.text_ = std::string(text);
  if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    throw ValidationError("expression syntax error at position 0: empty expression");
  }
  Parser p(e.text_, e);
  e.root_ = p.parse();
  return e;
}

double Expr::eval(int node, std::span<const double> values) const {
  const Node& n = nodes_[static_cast<std::size_t>(node)];
  switch (n.op) {
    case Op::Number:
      return n.value;
    case Op::Var:
      return values[static_cast<std::size_t>(n.value)];
    case Op::Neg:
      return -eval(n.a, values);
    case Op::Add:
      return eval(n.a, values) + eval(n.b, values);
    case Op::Sub:
      return eval(n.a, values) - eval(n.b, values);
    case Op::Mul:
      return eval(n.a, values) * eval(n.b, values);
    case Op::Div:
      return eval(n.a, values) / eval(n.b, values);
    case Op::Pow:
      return std::pow(eval(n.a, values), eval(n.b, values));
  }
  return 0.0;
}

double Expr::evaluate(std::span<const double> values) const {
  if (values.size() != identifiers_.size()) {
    throw ValidationError("expression '" + text_ + "': expected " +
                          std::to_string(identifiers_.size()) + " values");
  }
  return eval(root_, values);
}

double Expr::evaluate(const std::map<std::string, double>& values) const {
  std::vector<double> v;
  v.reserve(identifiers_.size());
  for (const auto& id : identifiers_) {
    const auto it = values.find(id);
    if (it == values.end()) {
      throw ValidationError("expression '" + text_ + "': unknown identifier '" + id + "'");
    }
    v.push_back(it->second);
  }
  return eval(root_, v);
}

}  // namespace dagtune
