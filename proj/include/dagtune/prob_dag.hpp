#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dagtune/dag_structure.hpp"
#include "dagtune/expr.hpp"
#include "dagtune/gp.hpp"
#include "dagtune/rng.hpp"
#include "dagtune/summarizer.hpp"

namespace dagtune {

/// p parent sample matrices, each s x q.
using ParentSamples = std::vector<Eigen::MatrixXd>;

class NodeModel {
 public:
  virtual ~NodeModel() = default;

  virtual bool needs_fit() const = 0;
  /// inputs: n x p parent columns (in parent order); targets: n.
  virtual void fit(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets) = 0;
  /// Returns an s x q matrix of draws, one per parent sample.
  virtual Eigen::MatrixXd sample(const ParentSamples& parents, Eigen::Index s, Eigen::Index q,
                                 Rng& rng) const = 0;
  virtual std::unique_ptr<NodeModel> clone() const = 0;
};

/// GP node. With no parents it degrades to the marginal N(mean, var) of its
/// column. Draws come from the latent predictive marginal of each parent
/// sample independently.
class GpNode : public NodeModel {
 public:
  explicit GpNode(GpFitOptions opts = {}) : opts_(opts) {}

  bool needs_fit() const override { return true; }
  void fit(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets) override;
  Eigen::MatrixXd sample(const ParentSamples& parents, Eigen::Index s, Eigen::Index q,
                         Rng& rng) const override;
  std::unique_ptr<NodeModel> clone() const override { return std::make_unique<GpNode>(*this); }

  bool fitted() const { return fitted_; }
  const GaussianProcess& gp() const { return gp_; }
  const GpFitOptions& options() const { return opts_; }
  /// Hyperparameters, or [mean, variance] in marginal mode.
  Eigen::VectorXd hyperparameters() const;

 private:
  GpFitOptions opts_;
  GaussianProcess gp_;
  bool marginal_ = false;
  double marginal_mean_ = 0.0;
  double marginal_var_ = 0.0;
  bool fitted_ = false;
};

/// Deterministic node computing an expression of its parents.
class ExprNode : public NodeModel {
 public:
  /// Throws ValidationError if the expression names a non-parent.
  ExprNode(Expr expr, const std::vector<std::string>& parent_names);

  bool needs_fit() const override { return false; }
  void fit(const Eigen::MatrixXd&, const Eigen::VectorXd&) override {}
  Eigen::MatrixXd sample(const ParentSamples& parents, Eigen::Index s, Eigen::Index q,
                         Rng& rng) const override;
  std::unique_ptr<NodeModel> clone() const override { return std::make_unique<ExprNode>(*this); }

  const Expr& expr() const { return expr_; }
  /// Evaluates on one row of parent values.
  double evaluate(std::span<const double> parent_values) const;

 private:
  Expr expr_;
  // Parent position for each expression identifier.
  std::vector<std::size_t> slots_;
};

struct ModelSpec {
  enum class Kind { Gp, Expr };
  Kind kind = Kind::Gp;
  KernelKind kernel = KernelKind::Matern52;
  std::string expression;
  bool operator==(const ModelSpec&) const = default;
};

/// Per-call instrumentation: how often each node's cache was filled.
struct SampleCounters {
  std::vector<std::size_t> invocations;
};

class ProbDag {
 public:
  ProbDag() = default;
  ProbDag(const ProbDag& other);
  ProbDag& operator=(const ProbDag& other);
  ProbDag(ProbDag&&) = default;
  ProbDag& operator=(ProbDag&&) = default;

  /// Unbound non-parameter nodes get a GP with gp_defaults; the GP seed of
  /// each node is derived from gp_defaults.seed and the node name.
  static ProbDag build(DagStructure structure, const std::map<std::string, ModelSpec>& bindings,
                       const GpFitOptions& gp_defaults = {});

  /// Fits every model on (parent columns -> node column) of the table.
  void fit_all(const SummaryTable& table);

  const DagStructure& structure() const { return structure_; }
  const NodeModel* model(std::size_t node) const { return models_[node].get(); }
  bool trained(std::size_t node) const { return trained_[node]; }
  /// Parameter node indices in node order; sample_objective's input order.
  std::vector<std::size_t> param_nodes() const;

  /// Smallest value of the objective node's model output over the table's
  /// observed rows: the objective column for a GP node, or the expression
  /// evaluated on observed parent columns for an expression node.
  double best_observed(const std::string& objective, const SummaryTable& table) const;

 private:
  DagStructure structure_;
  std::vector<std::unique_ptr<NodeModel>> models_;
  std::vector<bool> trained_;
};

/// Samples the objective by walking its ancestors in topological order. Each
/// node's draws are computed once into a cache that every child reads.
/// param_samples holds one s x q matrix per parameter node, in param_nodes()
/// order.
Eigen::MatrixXd sample_objective(const ProbDag& dag, const std::string& objective,
                                 const ParentSamples& param_samples, Rng& rng,
                                 SampleCounters* counters = nullptr);

/// Broadcasts q candidate rows (q x D, param_nodes() order) over s draws.
Eigen::MatrixXd sample_objective(const ProbDag& dag, const std::string& objective,
                                 const Eigen::MatrixXd& candidates, Eigen::Index s, Rng& rng,
                                 SampleCounters* counters = nullptr);

}  // namespace dagtune
