#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dagtune {

enum class NodeRole { Param, MetricGroup, Objective };
enum class Provenance { Learned, Expert };

std::string to_string(NodeRole role);
NodeRole node_role_from_string(const std::string& s);
std::string to_string(Provenance p);

struct DagNode {
  std::string name;
  NodeRole role;
  bool operator==(const DagNode&) const = default;
};

struct DagEdge {
  std::size_t src;
  std::size_t dst;
  double weight = 0.0;
  Provenance provenance = Provenance::Learned;
  bool operator==(const DagEdge&) const = default;
};

/// Which directed edges a structure may contain. Built from node roles
/// (no parents for parameters, no children for objectives) plus tabu pairs.
class EdgeMask {
 public:
  EdgeMask() = default;
  explicit EdgeMask(std::size_t d) : d_(d), allowed_(d * d, true) {
    for (std::size_t i = 0; i < d; ++i) set(i, i, false);
  }

  std::size_t size() const { return d_; }
  bool allowed(std::size_t src, std::size_t dst) const { return allowed_[src * d_ + dst]; }
  void set(std::size_t src, std::size_t dst, bool v) { allowed_[src * d_ + dst] = v; }

 private:
  std::size_t d_ = 0;
  std::vector<bool> allowed_;
};

EdgeMask make_edge_mask(const std::vector<DagNode>& nodes,
                        const std::vector<std::pair<std::size_t, std::size_t>>& tabu = {});

class DagStructure {
 public:
  DagStructure() = default;
  explicit DagStructure(std::vector<DagNode> nodes) : nodes_(std::move(nodes)) {}

  const std::vector<DagNode>& nodes() const { return nodes_; }
  const std::vector<DagEdge>& edges() const { return edges_; }
  std::size_t size() const { return nodes_.size(); }

  std::optional<std::size_t> index_of(const std::string& name) const;
  std::size_t require(const std::string& name) const;

  /// Adds or replaces the edge src -> dst.
  void add_edge(DagEdge e);
  void remove_edge(std::size_t src, std::size_t dst);
  bool has_edge(std::size_t src, std::size_t dst) const;
  const DagEdge* find_edge(std::size_t src, std::size_t dst) const;

  /// Ascending node index order.
  std::vector<std::size_t> parents(std::size_t node) const;
  std::vector<std::size_t> children(std::size_t node) const;
  std::size_t in_degree(std::size_t node) const;

  /// Kahn's algorithm, lowest index first; nullopt if a cycle exists.
  std::optional<std::vector<std::size_t>> topological_order() const;
  bool is_acyclic() const { return topological_order().has_value(); }
  /// Edges of one directed cycle, or empty if acyclic.
  std::vector<std::pair<std::size_t, std::size_t>> find_cycle() const;
  /// Ancestors of node (excluding itself), ascending.
  std::vector<std::size_t> ancestors(std::size_t node) const;

  bool operator==(const DagStructure&) const = default;

 private:
  std::vector<DagNode> nodes_;
  std::vector<DagEdge> edges_;
};

/// Largest in-degree over all nodes: the widest input any node model sees.
std::size_t max_dimension(const DagStructure& g);

std::string export_dot(const DagStructure& g);

/// Versioned JSON document (schema_version 1) with nodes, edges, provenance.
std::string structure_to_json(const DagStructure& g);
DagStructure structure_from_json(const std::string& text);

}  // namespace dagtune
