#include "dagtune/dag_structure.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <queue>
#include <sstream>

#include <json.hpp>

#include "dagtune/errors.hpp"

namespace dagtune {

std::string to_string(NodeRole role) {
  switch (role) {
    case NodeRole::Param:
      return "param";
    case NodeRole::MetricGroup:
      return "metric_group";
    case NodeRole::Objective:
      return "objective";
  }
  return "?";
}

NodeRole node_role_from_string(const std::string& s) {
  if (s == "param") return NodeRole::Param;
  if (s == "metric_group") return NodeRole::MetricGroup;
  if (s == "objective") return NodeRole::Objective;
  throw ValidationError("unknown node role '" + s + "'");
}

std::string to_string(Provenance p) { return p == Provenance::Learned ? "learned" : "expert"; }

EdgeMask make_edge_mask(const std::vector<DagNode>& nodes,
                        const std::vector<std::pair<std::size_t, std::size_t>>& tabu) {
  EdgeMask mask(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (std::size_t j = 0; j < nodes.size(); ++j) {
      if (nodes[j].role == NodeRole::Param) mask.set(i, j, false);
      if (nodes[i].role == NodeRole::Objective) mask.set(i, j, false);
    }
  }
  for (const auto& [s, t] : tabu) mask.set(s, t, false);
  return mask;
}

std::optional<std::size_t> DagStructure::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t DagStructure::require(const std::string& name) const {
  if (auto i = index_of(name)) return *i;
  throw ValidationError("unknown node '" + name + "'");
}

void DagStructure::add_edge(DagEdge e) {
  if (e.src >= nodes_.size() || e.dst >= nodes_.size()) {
    throw ValidationError("edge endpoint out of range");
  }
  if (e.src == e.dst) throw ValidationError("self-edge on '" + nodes_[e.src].name + "'");
  remove_edge(e.src, e.dst);
  edges_.push_back(e);
  std::sort(edges_.begin(), edges_.end(), [](const DagEdge& a, const DagEdge& b) {
    return std::tie(a.src, a.dst) < std::tie(b.src, b.dst);
  });
}

void DagStructure::remove_edge(std::size_t src, std::size_t dst) {
  std::erase_if(edges_, [&](const DagEdge& e) { return e.src == src && e.dst == dst; });
}

bool DagStructure::has_edge(std::size_t src, std::size_t dst) const {
  return find_edge(src, dst) != nullptr;
}

const DagEdge* DagStructure::find_edge(std::size_t src, std::size_t dst) const {
  for (const auto& e : edges_) {
    if (e.src == src && e.dst == dst) return &e;
  }
  return nullptr;
}

std::vector<std::size_t> DagStructure::parents(std::size_t node) const {
  std::vector<std::size_t> out;
  for (const auto& e : edges_) {
    if (e.dst == node) out.push_back(e.src);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::size_t> DagStructure::children(std::size_t node) const {
  std::vector<std::size_t> out;
  for (const auto& e : edges_) {
    if (e.src == node) out.push_back(e.dst);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t DagStructure::in_degree(std::size_t node) const {
  return static_cast<std::size_t>(
      std::count_if(edges_.begin(), edges_.end(), [&](const DagEdge& e) { return e.dst == node; }));
}

std::optional<std::vector<std::size_t>> DagStructure::topological_order() const {
  const auto d = nodes_.size();
  std::vector<std::size_t> indeg(d, 0);
  for (const auto& e : edges_) ++indeg[e.dst];
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t i = 0; i < d; ++i) {
    if (indeg[i] == 0) ready.push(i);
  }
  std::vector<std::size_t> order;
  order.reserve(d);
  while (!ready.empty()) {
    const auto n = ready.top();
    ready.pop();
    order.push_back(n);
    for (const auto c : children(n)) {
      if (--indeg[c] == 0) ready.push(c);
    }
  }
  if (order.size() != d) return std::nullopt;
  return order;
}

std::vector<std::pair<std::size_t, std::size_t>> DagStructure::find_cycle() const {
  const auto d = nodes_.size();
  enum Color { White, Grey, Black };
  std::vector<Color> color(d, White);
  std::vector<std::size_t> stack;
  std::vector<std::pair<std::size_t, std::size_t>> cycle;

  std::function<bool(std::size_t)> dfs = [&](std::size_t u) -> bool {
    color[u] = Grey;
    stack.push_back(u);
    for (const auto v : children(u)) {
      if (color[v] == Grey) {
        const auto it = std::find(stack.begin(), stack.end(), v);
        for (auto p = it; p != stack.end(); ++p) {
          const auto next = (p + 1 == stack.end()) ? v : *(p + 1);
          cycle.emplace_back(*p, next);
        }
        return true;
      }
      if (color[v] == White && dfs(v)) return true;
    }
    stack.pop_back();
    color[u] = Black;
    return false;
  };
  for (std::size_t i = 0; i < d; ++i) {
    if (color[i] == White && dfs(i)) return cycle;
  }
  return {};
}

std::vector<std::size_t> DagStructure::ancestors(std::size_t node) const {
  std::vector<bool> seen(nodes_.size(), false);
  std::vector<std::size_t> todo = parents(node);
  while (!todo.empty()) {
    const auto n = todo.back();
    todo.pop_back();
    if (seen[n]) continue;
    seen[n] = true;
    for (const auto p : parents(n)) todo.push_back(p);
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < seen.size(); ++i) {
    if (seen[i]) out.push_back(i);
  }
  return out;
}

std::size_t max_dimension(const DagStructure& g) {
  std::size_t md = 0;
  for (std::size_t i = 0; i < g.size(); ++i) md = std::max(md, g.in_degree(i));
  return md;
}

namespace {

std::string quoted(const std::string& s) {
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::string export_dot(const DagStructure& g) {
  std::ostringstream os;
  os << "digraph dag {\n";
  os << "  rankdir=LR;\n";
  for (const auto& n : g.nodes()) {
    os << "  " << quoted(n.name);
    switch (n.role) {
      case NodeRole::Param:
        os << " [shape=box, style=filled, fillcolor=\"#dbe9f6\"];\n";
        break;
      case NodeRole::MetricGroup:
        os << " [shape=ellipse, style=filled, fillcolor=\"#fde0c5\"];\n";
        break;
      case NodeRole::Objective:
        os << " [shape=doublecircle, style=filled, fillcolor=\"#d5f5d5\"];\n";
        break;
    }
  }
  for (const auto& e : g.edges()) {
    os << "  " << quoted(g.nodes()[e.src].name) << " -> " << quoted(g.nodes()[e.dst].name);
    if (e.provenance == Provenance::Expert) {
      os << " [style=dashed, color=\"#c0392b\"];\n";
    } else {
      char w[32];
      std::snprintf(w, sizeof(w), "%.3f", e.weight);
      os << " [style=solid, label=\"" << w << "\"];\n";
    }
  }
  os << "}\n";
  return os.str();
}

std::string structure_to_json(const DagStructure& g) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["nodes"] = nlohmann::ordered_json::array();
  for (const auto& n : g.nodes()) {
    j["nodes"].push_back({{"name", n.name}, {"role", to_string(n.role)}});
  }
  j["edges"] = nlohmann::ordered_json::array();
  for (const auto& e : g.edges()) {
    j["edges"].push_back({{"src", g.nodes()[e.src].name},
                          {"dst", g.nodes()[e.dst].name},
                          {"weight", e.weight},
                          {"provenance", to_string(e.provenance)}});
  }
  return j.dump(2) + "\n";
}

DagStructure structure_from_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("schema_version").get<int>() != 1) {
      throw ValidationError("structure document: unsupported schema_version");
    }
    std::vector<DagNode> nodes;
    for (const auto& n : j.at("nodes")) {
      nodes.push_back({n.at("name").get<std::string>(),
                       node_role_from_string(n.at("role").get<std::string>())});
    }
    DagStructure g(std::move(nodes));
    for (const auto& e : j.at("edges")) {
      const auto prov = e.at("provenance").get<std::string>();
      if (prov != "learned" && prov != "expert") {
        throw ValidationError("structure document: bad provenance '" + prov + "'");
      }
      g.add_edge({g.require(e.at("src").get<std::string>()),
                  g.require(e.at("dst").get<std::string>()), e.at("weight").get<double>(),
                  prov == "expert" ? Provenance::Expert : Provenance::Learned});
    }
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("structure document: ") + e.what());
  }
}

}  // namespace dagtune
