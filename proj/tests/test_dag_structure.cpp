#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "dagtune/dag_structure.hpp"
#include "dagtune/errors.hpp"

using namespace dagtune;

namespace {

DagStructure random_graph(std::mt19937_64& rng, std::size_t d, double density) {
  std::vector<DagNode> nodes;
  for (std::size_t i = 0; i < d; ++i) nodes.push_back({"n" + std::to_string(i), NodeRole::MetricGroup});
  DagStructure g(nodes);
  std::bernoulli_distribution coin(density);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      if (i != j && coin(rng)) g.add_edge({i, j, 1.0});
    }
  }
  return g;
}

// Reachability by repeated relaxation over the edge list.
std::vector<std::vector<bool>> closure(const DagStructure& g) {
  const auto d = g.size();
  std::vector<std::vector<bool>> r(d, std::vector<bool>(d, false));
  for (const auto& e : g.edges()) r[e.src][e.dst] = true;
  for (std::size_t k = 0; k < d; ++k) {
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) {
        if (r[i][k] && r[k][j]) r[i][j] = true;
      }
    }
  }
  return r;
}

bool acyclic_by_permutation(const DagStructure& g) {
  std::vector<std::size_t> perm(g.size());
  std::iota(perm.begin(), perm.end(), 0);
  do {
    std::vector<std::size_t> pos(g.size());
    for (std::size_t k = 0; k < perm.size(); ++k) pos[perm[k]] = k;
    if (std::all_of(g.edges().begin(), g.edges().end(),
                    [&](const DagEdge& e) { return pos[e.src] < pos[e.dst]; })) {
      return true;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return false;
}

}  // namespace

TEST_CASE("graph queries agree with brute force on small graphs") {
  std::mt19937_64 rng(123);
  for (int t = 0; t < 300; ++t) {
    const std::size_t d = 2 + static_cast<std::size_t>(t % 5);
    const auto g = random_graph(rng, d, t % 3 == 0 ? 0.5 : 0.2);
    const bool acyclic = acyclic_by_permutation(g);
    CHECK(g.is_acyclic() == acyclic);
    CHECK(g.find_cycle().empty() == acyclic);
    const auto r = closure(g);
    if (!acyclic) {
      const auto cyc = g.find_cycle();
      for (const auto& [s, e] : cyc) CHECK(g.has_edge(s, e));
      CHECK(cyc.front().first == cyc.back().second);
      continue;
    }
    const auto order = *g.topological_order();
    std::vector<std::size_t> pos(d);
    for (std::size_t k = 0; k < d; ++k) pos[order[k]] = k;
    for (const auto& e : g.edges()) CHECK(pos[e.src] < pos[e.dst]);
    std::size_t md = 0;
    for (std::size_t j = 0; j < d; ++j) {
      std::vector<std::size_t> want;
      for (std::size_t i = 0; i < d; ++i) {
        if (r[i][j]) want.push_back(i);
      }
      CHECK(g.ancestors(j) == want);
      std::size_t indeg = 0;
      for (std::size_t i = 0; i < d; ++i) indeg += g.has_edge(i, j) ? 1 : 0;
      CHECK(g.in_degree(j) == indeg);
      md = std::max(md, indeg);
    }
    CHECK(max_dimension(g) == md);
  }
}

TEST_CASE("edges are unique, sorted and validated") {
  DagStructure g({{"a", NodeRole::Param}, {"b", NodeRole::MetricGroup}, {"c", NodeRole::Objective}});
  g.add_edge({1, 2, 0.5});
  g.add_edge({0, 1, 0.1});
  g.add_edge({0, 1, 0.7});
  REQUIRE(g.edges().size() == 2);
  CHECK(g.edges()[0].src == 0);
  CHECK(g.edges()[0].weight == 0.7);
  CHECK(g.parents(2) == std::vector<std::size_t>{1});
  CHECK(g.children(0) == std::vector<std::size_t>{1});
  CHECK_THROWS_AS(g.add_edge({1, 1}), ValidationError);
  CHECK_THROWS_AS(g.add_edge({0, 9}), ValidationError);
  CHECK_THROWS_AS(g.require("zz"), ValidationError);
  g.remove_edge(0, 1);
  CHECK_FALSE(g.has_edge(0, 1));
}

TEST_CASE("json round trip and dot export") {
  DagStructure g({{"p \"1\"", NodeRole::Param}, {"sys.lat", NodeRole::MetricGroup},
                  {"edp", NodeRole::Objective}});
  g.add_edge({0, 1, -0.4321});
  g.add_edge({1, 2, 0.0, Provenance::Expert});
  CHECK(structure_from_json(structure_to_json(g)) == g);
  const auto dot = export_dot(g);
  CHECK(dot.rfind("digraph", 0) == 0);
  CHECK(dot.find("\"p \\\"1\\\"\" -> \"sys.lat\"") != std::string::npos);
  CHECK(dot.find("-0.432") != std::string::npos);
  CHECK(dot.find("style=dashed") != std::string::npos);
  CHECK_THROWS_AS(structure_from_json("{}"), ValidationError);
  CHECK_THROWS_AS(structure_from_json(R"({"schema_version":2,"nodes":[],"edges":[]})"),
                  ValidationError);
}

TEST_CASE("role names round trip") {
  for (auto r : {NodeRole::Param, NodeRole::MetricGroup, NodeRole::Objective}) {
    CHECK(node_role_from_string(to_string(r)) == r);
  }
  CHECK_THROWS_AS(node_role_from_string("widget"), ValidationError);
}
