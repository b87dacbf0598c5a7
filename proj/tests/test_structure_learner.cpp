#include <doctest.h>

#include <cmath>
#include <random>

#include "dagtune/bounded_lbfgs.hpp"
#include "dagtune/errors.hpp"
#include "dagtune/structure_learner.hpp"

using namespace dagtune;

namespace {

// tr(exp(A)) - d summed as a power series; an independent route to h.
double h_series(const Eigen::MatrixXd& w) {
  const Eigen::MatrixXd a = w.cwiseProduct(w);
  Eigen::MatrixXd term = Eigen::MatrixXd::Identity(w.rows(), w.cols());
  double total = 0.0;
  for (int k = 1; k < 60; ++k) {
    term = term * a / static_cast<double>(k);
    total += term.trace();
  }
  return total;
}

Eigen::MatrixXd random_matrix(std::mt19937_64& rng, int d, double scale) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Eigen::MatrixXd w(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) w(i, j) = u(rng);
  }
  return w;
}

std::vector<DagNode> roles(std::initializer_list<std::pair<const char*, NodeRole>> list) {
  std::vector<DagNode> out;
  for (const auto& [n, r] : list) out.push_back({n, r});
  return out;
}

}  // namespace

TEST_CASE("acyclicity penalty values") {
  CHECK(acyclicity(Eigen::MatrixXd::Zero(4, 4)) == 0.0);
  Eigen::MatrixXd two(2, 2);
  two << 0, 1, 1, 0;
  CHECK(std::abs(acyclicity(two) - (2.0 * std::cosh(1.0) - 2.0)) < 1e-9);
  std::mt19937_64 rng(5);
  for (int t = 0; t < 20; ++t) {
    Eigen::MatrixXd w = random_matrix(rng, 6, 3.0);
    Eigen::MatrixXd upper = w.triangularView<Eigen::StrictlyUpper>();
    CHECK(acyclicity(upper) <= 1e-8);
  }
}

TEST_CASE("acyclicity matches its power series") {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 20; ++t) {
    const auto w = random_matrix(rng, 2 + t % 5, 0.8);
    CHECK(acyclicity(w) == doctest::Approx(h_series(w)).epsilon(1e-10));
  }
}

TEST_CASE("acyclicity gradient matches central differences") {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 10; ++t) {
    const auto w = random_matrix(rng, 4, 0.7);
    const auto g = acyclicity_gradient(w);
    const double eps = 1e-6;
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        Eigen::MatrixXd wp = w, wm = w;
        wp(i, j) += eps;
        wm(i, j) -= eps;
        const double fd = (acyclicity(wp) - acyclicity(wm)) / (2.0 * eps);
        CHECK(g(i, j) == doctest::Approx(fd).epsilon(1e-6).scale(1.0));
      }
    }
  }
}

TEST_CASE("projected L-BFGS solves a bounded Rosenbrock") {
  const Objective rosen = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g.resize(2);
    g(0) = -2.0 * (1.0 - x(0)) - 400.0 * x(0) * (x(1) - x(0) * x(0));
    g(1) = 200.0 * (x(1) - x(0) * x(0));
    return (1.0 - x(0)) * (1.0 - x(0)) + 100.0 * std::pow(x(1) - x(0) * x(0), 2);
  };
  const Eigen::Vector2d inf(INFINITY, INFINITY);
  auto r = minimize_box(rosen, Eigen::Vector2d(-1.2, 1.0), -inf, inf);
  CHECK(r.x(0) == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(r.x(1) == doctest::Approx(1.0).epsilon(1e-3));
  // With x0 <= 0.5 the constrained optimum sits on the bound.
  r = minimize_box(rosen, Eigen::Vector2d(0.0, 0.0), Eigen::Vector2d(-2, -2), Eigen::Vector2d(0.5, 2));
  CHECK(r.x(0) == doctest::Approx(0.5).epsilon(1e-6));
  CHECK(r.x(1) == doctest::Approx(0.25).epsilon(1e-3));
}

TEST_CASE("edge masks follow node roles and tabu pairs") {
  const auto nodes = roles({{"p", NodeRole::Param}, {"m", NodeRole::MetricGroup},
                            {"y", NodeRole::Objective}, {"q", NodeRole::Param}});
  const auto mask = make_edge_mask(nodes, resolve_tabu(nodes, {{"q", "y"}, {"ghost", "y"}}));
  CHECK(mask.allowed(0, 1));
  CHECK(mask.allowed(0, 2));
  CHECK(mask.allowed(1, 2));
  CHECK_FALSE(mask.allowed(1, 0));
  CHECK_FALSE(mask.allowed(2, 1));
  CHECK_FALSE(mask.allowed(0, 3));
  CHECK_FALSE(mask.allowed(3, 2));
  CHECK_FALSE(mask.allowed(1, 1));
}

TEST_CASE("learning recovers a three node chain and respects the mask") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n01;
  const int n = 500;
  Eigen::MatrixXd x(n, 3);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = n01(rng);
    x(i, 1) = 1.5 * x(i, 0) + n01(rng);
    x(i, 2) = -1.2 * x(i, 1) + n01(rng);
  }
  const auto nodes = roles({{"a", NodeRole::Param}, {"b", NodeRole::MetricGroup},
                            {"c", NodeRole::Objective}});
  const auto r = learn_structure(x, make_edge_mask(nodes));
  CHECK(r.h <= 1e-8);
  CHECK(r.weights(0, 1) == doctest::Approx(1.5).epsilon(0.15));
  CHECK(r.weights(1, 2) == doctest::Approx(-1.2).epsilon(0.15));
  CHECK(r.weights(0, 2) == 0.0);
  CHECK((r.weights.col(0).array() == 0.0).all());
  CHECK((r.weights.row(2).array() == 0.0).all());

  EdgeMask no_ab = make_edge_mask(nodes);
  no_ab.set(0, 1, false);
  const auto masked = learn_structure(x, no_ab);
  CHECK(masked.raw_weights(0, 1) == 0.0);
  CHECK_THROWS_AS(learn_structure(x, EdgeMask(2)), ValidationError);
}

TEST_CASE("merging keeps expert edges and breaks learned cycles at the weakest edge") {
  const auto nodes = roles({{"p", NodeRole::Param}, {"a", NodeRole::MetricGroup},
                            {"b", NodeRole::MetricGroup}, {"y", NodeRole::Objective}});
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(4, 4);
  w(0, 1) = 0.9;
  w(1, 2) = 0.8;
  w(2, 1) = -0.4;
  w(2, 3) = 0.7;
  w(3, 0) = 5.0;
  auto m = merge_expert(nodes, w, {{"p", "y"}, {"later", "y"}});
  const auto& g = m.structure;
  CHECK(g.is_acyclic());
  CHECK(g.has_edge(1, 2));
  CHECK_FALSE(g.has_edge(2, 1));
  CHECK_FALSE(g.has_edge(3, 0));
  REQUIRE(g.find_edge(0, 3));
  CHECK(g.find_edge(0, 3)->provenance == Provenance::Expert);
  CHECK(m.pending.size() == 1);

  m = merge_expert(nodes, w, {{"b", "a"}});
  CHECK(m.structure.find_edge(2, 1)->provenance == Provenance::Expert);
  CHECK_FALSE(m.structure.has_edge(1, 2));

  m = merge_expert(nodes, w, {}, {{"a", "b"}});
  CHECK_FALSE(m.structure.has_edge(1, 2));
  CHECK(m.structure.has_edge(2, 1));

  CHECK_THROWS_AS(merge_expert(nodes, w, {{"a", "b"}, {"b", "a"}}), ValidationError);
  CHECK_THROWS_AS(merge_expert(nodes, w, {{"a", "p"}}), ValidationError);
  CHECK_THROWS_AS(merge_expert(nodes, w, {{"y", "a"}}), ValidationError);
  CHECK_THROWS_AS(merge_expert(nodes, w, {{"a", "a"}}), ValidationError);
}
