#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dagtune/dag_structure.hpp"
#include "dagtune/summarizer.hpp"

namespace dagtune {

/// h(W) = tr(exp(W o W)) - d; zero exactly when the support of W is acyclic.
double acyclicity(const Eigen::MatrixXd& w);
/// dh/dW = exp(W o W)^T o 2W.
Eigen::MatrixXd acyclicity_gradient(const Eigen::MatrixXd& w);

struct NotearsOptions {
  double l1 = 0.1;
  double w_threshold = 0.3;
  int max_outer = 100;
  double h_tol = 1e-8;
  double rho_max = 1e16;
  int inner_max_iterations = 1000;
};

struct LearnResult {
  // weights(i, j) != 0 means an edge i -> j.
  Eigen::MatrixXd weights;
  Eigen::MatrixXd raw_weights;
  double threshold = 0.0;
  double h = 0.0;
  int outer_iterations = 0;
};

/// Linear structure learning: minimizes (1/2n)|X - XW|^2 + l1 |W|_1 subject to
/// h(W) = 0 with an augmented Lagrangian. Masked entries stay exactly zero.
/// Columns are centered internally; callers pass comparable scales.
LearnResult learn_structure(const Eigen::MatrixXd& x, const EdgeMask& mask,
                            const NotearsOptions& opts = {});

/// Learns over a summary table. Parameter columns are z-scored for learning
/// only (the table keeps unit-cube encodings).
LearnResult learn_structure(const SummaryTable& table, const EdgeMask& mask,
                            const NotearsOptions& opts = {});

using NamedEdge = std::pair<std::string, std::string>;

struct MergeResult {
  DagStructure structure;
  // Expert edges naming nodes that do not exist (yet).
  std::vector<NamedEdge> pending;
};

/// Union of learned and expert edges. Expert edges win conflicts; a learned
/// cycle is broken by dropping its weakest learned edge; an all-expert cycle
/// throws ValidationError.
MergeResult merge_expert(const std::vector<DagNode>& nodes, const Eigen::MatrixXd& learned,
                         const std::vector<NamedEdge>& expert_edges,
                         const std::vector<NamedEdge>& tabu_edges = {});

/// Resolves tabu edges against node names; unknown names are skipped.
std::vector<std::pair<std::size_t, std::size_t>> resolve_tabu(
    const std::vector<DagNode>& nodes, const std::vector<NamedEdge>& tabu_edges);

}  // namespace dagtune
