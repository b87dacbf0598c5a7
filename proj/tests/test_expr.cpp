#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>
#include <sstream>

#include "dagtune/errors.hpp"
#include "dagtune/expr.hpp"

using namespace dagtune;

namespace {

// Random expression tree that renders itself with minimal parentheses and
// evaluates itself directly; parsing the rendering must give the same value.
struct Tree {
  enum Kind { Num, Var, Neg, Add, Sub, Mul, Div, Pow } kind;
  double value = 0.0;
  int var = 0;
  std::unique_ptr<Tree> a, b;

  int prec() const {
    switch (kind) {
      case Add:
      case Sub:
        return 1;
      case Mul:
      case Div:
        return 2;
      case Neg:
        return 3;
      case Pow:
        return 4;
      default:
        return 5;
    }
  }

  double eval(const std::vector<double>& vars) const {
    switch (kind) {
      case Num:
        return value;
      case Var:
        return vars[var];
      case Neg:
        return -a->eval(vars);
      case Add:
        return a->eval(vars) + b->eval(vars);
      case Sub:
        return a->eval(vars) - b->eval(vars);
      case Mul:
        return a->eval(vars) * b->eval(vars);
      case Div:
        return a->eval(vars) / b->eval(vars);
      case Pow:
        return std::pow(a->eval(vars), b->eval(vars));
    }
    return 0.0;
  }

  std::string render() const {
    const auto wrap = [](const Tree& t, bool paren) {
      return paren ? "(" + t.render() + ")" : t.render();
    };
    std::ostringstream os;
    switch (kind) {
      case Num:
        os << value;
        break;
      case Var:
        os << "v.x" << var;
        break;
      case Neg:
        os << "-" << wrap(*a, a->prec() < 3);
        break;
      case Add:
      case Sub:
        os << wrap(*a, a->prec() < 1) << (kind == Add ? " + " : " - ") << wrap(*b, b->prec() <= 1);
        break;
      case Mul:
      case Div:
        os << wrap(*a, a->prec() < 2) << (kind == Mul ? "*" : " / ") << wrap(*b, b->prec() <= 2);
        break;
      case Pow:
        os << wrap(*a, a->prec() < 5) << "^" << wrap(*b, b->prec() < 3);
        break;
    }
    return os.str();
  }
};

std::unique_ptr<Tree> grow(std::mt19937_64& rng, int depth) {
  auto t = std::make_unique<Tree>();
  std::uniform_int_distribution<int> pick(0, depth <= 0 ? 1 : 7);
  t->kind = static_cast<Tree::Kind>(pick(rng));
  if (t->kind == Tree::Num) {
    t->value = std::uniform_int_distribution<int>(1, 40)(rng) / 8.0;
  } else if (t->kind == Tree::Var) {
    t->var = std::uniform_int_distribution<int>(0, 2)(rng);
  } else {
    t->a = grow(rng, depth - 1);
    if (t->kind != Tree::Neg) t->b = grow(rng, depth - 1);
  }
  return t;
}

bool same(double x, double y) {
  if (std::isnan(x) || std::isnan(y)) return std::isnan(x) && std::isnan(y);
  if (std::isinf(x) || std::isinf(y)) return x == y;
  return std::abs(x - y) <= 1e-9 * std::max(1.0, std::abs(y));
}

double eval_text(const std::string& text, const std::map<std::string, double>& vars = {}) {
  return Expr::parse(text).evaluate(vars);
}

std::string error_of(const std::string& text) {
  try {
    (void)Expr::parse(text);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("precedence and associativity") {
  CHECK(eval_text("2*3^2") == 18.0);
  CHECK(eval_text("2 + 2") == 4.0);
  CHECK(eval_text("-2^2") == -4.0);
  CHECK(eval_text("(-2)^2") == 4.0);
  CHECK(eval_text("2^3^2") == 512.0);
  CHECK(eval_text("2^-1") == 0.5);
  CHECK(eval_text("8/4/2") == 1.0);
  CHECK(eval_text("10-4-3") == 3.0);
  CHECK(eval_text("--3") == 3.0);
  CHECK(eval_text("1.5e2 + .5") == 150.5);
  CHECK(std::isinf(eval_text("1/0")));
}

TEST_CASE("identifiers may be dotted metric keys") {
  const auto e = Expr::parse("sys.pow.energy * (1/sim_seconds)^2 + sys.pow.energy");
  CHECK(e.identifiers() == std::vector<std::string>{"sys.pow.energy", "sim_seconds"});
  CHECK(e.evaluate(std::vector<double>{3.0, 0.5}) == doctest::Approx(15.0));
  CHECK(e.evaluate(std::map<std::string, double>{{"sys.pow.energy", 1.0}, {"sim_seconds", 1.0}}) ==
        2.0);
  CHECK_THROWS_AS(e.evaluate(std::map<std::string, double>{{"sim_seconds", 1.0}}), ValidationError);
  CHECK_THROWS_AS(e.evaluate(std::vector<double>{1.0}), ValidationError);
}

TEST_CASE("syntax errors report a position") {
  CHECK(error_of("2+").find("position 2") != std::string::npos);
  CHECK(error_of("(1").find("position 2") != std::string::npos);
  CHECK(error_of("1 $ 2").find("position 2") != std::string::npos);
  CHECK(error_of("a.").find("position 0") != std::string::npos);
  CHECK(error_of("").find("position 0") != std::string::npos);
  CHECK(error_of("3 4").find("position") != std::string::npos);
  CHECK(error_of("1..2").find("position") != std::string::npos);
}

TEST_CASE("random expressions evaluate like their trees") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0.25, 3.0);
  for (int t = 0; t < 100; ++t) {
    const auto tree = grow(rng, 2 + t % 4);
    const std::string text = tree->render();
    const auto e = Expr::parse(text);
    const std::vector<double> vars{u(rng), u(rng), u(rng)};
    std::map<std::string, double> named;
    for (int k = 0; k < 3; ++k) named["v.x" + std::to_string(k)] = vars[k];
    const double want = tree->eval(vars);
    const double got = e.evaluate(named);
    INFO(text);
    CHECK(same(got, want));
  }
}
