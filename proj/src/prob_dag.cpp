#include "dagtune/prob_dag.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include "dagtune/errors.hpp"

namespace dagtune {

void GpNode::fit(const Eigen::MatrixXd& inputs, const Eigen::VectorXd& targets) {
  if (inputs.cols() == 0) {
    if (targets.size() < 1) throw ValidationError("gp node: no training rows");
    marginal_ = true;
    marginal_mean_ = targets.mean();
    marginal_var_ = (targets.array() - marginal_mean_).square().mean();
  } else {
    marginal_ = false;
    gp_ = GaussianProcess::fit(inputs, targets, opts_);
  }
  fitted_ = true;
}

Eigen::VectorXd GpNode::hyperparameters() const {
  if (marginal_) return Eigen::Vector2d(marginal_mean_, marginal_var_);
  return gp_.theta();
}

Eigen::MatrixXd GpNode::sample(const ParentSamples& parents, Eigen::Index s, Eigen::Index q,
                               Rng& rng) const {
  if (!fitted_) throw Error("gp node: sample before fit");
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd out(s, q);
  if (marginal_) {
    const double sd = std::sqrt(marginal_var_);
    for (Eigen::Index j = 0; j < q; ++j) {
      for (Eigen::Index i = 0; i < s; ++i) out(i, j) = marginal_mean_ + sd * normal(rng);
    }
    return out;
  }
  const auto p = static_cast<Eigen::Index>(parents.size());
  if (p != gp_.input_dim()) throw ValidationError("gp node: wrong number of parent samples");
  for (const auto& m : parents) {
    if (m.rows() != s || m.cols() != q) throw ValidationError("gp node: parent sample shape mismatch");
  }

  // Columns whose s parent samples coincide need one prediction, not s.
  std::vector<bool> constant(static_cast<std::size_t>(q));
  std::vector<Eigen::Index> offset(static_cast<std::size_t>(q));
  Eigen::Index rows = 0;
  for (Eigen::Index j = 0; j < q; ++j) {
    bool c = true;
    for (const auto& m : parents) {
      if ((m.col(j).array() != m(0, j)).any()) {
        c = false;
        break;
      }
    }
    constant[static_cast<std::size_t>(j)] = c;
    offset[static_cast<std::size_t>(j)] = rows;
    rows += c ? 1 : s;
  }
  Eigen::MatrixXd xs(rows, p);
  for (Eigen::Index j = 0; j < q; ++j) {
    const Eigen::Index o = offset[static_cast<std::size_t>(j)];
    const Eigen::Index len = constant[static_cast<std::size_t>(j)] ? 1 : s;
    for (Eigen::Index d = 0; d < p; ++d) {
      xs.col(d).segment(o, len) = parents[static_cast<std::size_t>(d)].col(j).head(len);
    }
  }
  Eigen::VectorXd mean, var;
  gp_.predict(xs, mean, var);
  const Eigen::VectorXd sd = var.cwiseSqrt();
  for (Eigen::Index j = 0; j < q; ++j) {
    const Eigen::Index o = offset[static_cast<std::size_t>(j)];
    const bool c = constant[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 0; i < s; ++i) {
      const Eigen::Index r = c ? o : o + i;
      out(i, j) = mean(r) + sd(r) * normal(rng);
    }
  }
  return out;
}

ExprNode::ExprNode(Expr expr, const std::vector<std::string>& parent_names)
    : expr_(std::move(expr)) {
  for (const auto& id : expr_.identifiers()) {
    const auto it = std::find(parent_names.begin(), parent_names.end(), id);
    if (it == parent_names.end()) {
      throw ValidationError("expression '" + expr_.text() + "' uses '" + id +
                            "', which is not a parent of the node");
    }
    slots_.push_back(static_cast<std::size_t>(it - parent_names.begin()));
  }
}

double ExprNode::evaluate(std::span<const double> parent_values) const {
  std::vector<double> v(slots_.size());
  for (std::size_t k = 0; k < slots_.size(); ++k) v[k] = parent_values[slots_[k]];
  return expr_.evaluate(v);
}

Eigen::MatrixXd ExprNode::sample(const ParentSamples& parents, Eigen::Index s, Eigen::Index q,
                                 Rng&) const {
  for (const auto slot : slots_) {
    if (slot >= parents.size()) throw ValidationError("expr node: missing parent samples");
    const auto& m = parents[slot];
    if (m.rows() != s || m.cols() != q) throw ValidationError("expr node: parent sample shape mismatch");
  }
  Eigen::MatrixXd out(s, q);
  std::vector<double> v(slots_.size());
  for (Eigen::Index j = 0; j < q; ++j) {
    for (Eigen::Index i = 0; i < s; ++i) {
      for (std::size_t k = 0; k < slots_.size(); ++k) v[k] = parents[slots_[k]](i, j);
      out(i, j) = expr_.evaluate(v);
    }
  }
  return out;
}

ProbDag::ProbDag(const ProbDag& other) : structure_(other.structure_), trained_(other.trained_) {
  for (const auto& m : other.models_) models_.push_back(m ? m->clone() : nullptr);
}

ProbDag& ProbDag::operator=(const ProbDag& other) {
  if (this != &other) {
    ProbDag tmp(other);
    *this = std::move(tmp);
  }
  return *this;
}

ProbDag ProbDag::build(DagStructure structure, const std::map<std::string, ModelSpec>& bindings,
                       const GpFitOptions& gp_defaults) {
  if (!structure.is_acyclic()) throw ValidationError("prob dag: structure has a cycle");
  for (const auto& [name, spec] : bindings) {
    const auto idx = structure.index_of(name);
    if (!idx) throw ValidationError("model binding for unknown node '" + name + "'");
    if (structure.nodes()[*idx].role == NodeRole::Param) {
      throw ValidationError("model binding on parameter node '" + name + "'");
    }
  }
  ProbDag dag;
  const auto d = structure.size();
  dag.models_.resize(d);
  dag.trained_.assign(d, false);
  for (std::size_t i = 0; i < d; ++i) {
    const auto& node = structure.nodes()[i];
    if (node.role == NodeRole::Param) continue;
    GpFitOptions opts = gp_defaults;
    opts.seed = derive_seed(gp_defaults.seed, stable_hash(node.name));
    const auto it = bindings.find(node.name);
    if (it == bindings.end()) {
      dag.models_[i] = std::make_unique<GpNode>(opts);
      continue;
    }
    const auto& spec = it->second;
    if (spec.kind == ModelSpec::Kind::Expr) {
      std::vector<std::string> parent_names;
      for (const auto p : structure.parents(i)) parent_names.push_back(structure.nodes()[p].name);
      dag.models_[i] = std::make_unique<ExprNode>(Expr::parse(spec.expression), parent_names);
      dag.trained_[i] = true;
    } else {
      opts.kernel = spec.kernel;
      dag.models_[i] = std::make_unique<GpNode>(opts);
    }
  }
  dag.structure_ = std::move(structure);
  return dag;
}

void ProbDag::fit_all(const SummaryTable& table) {
  const auto& nodes = structure_.nodes();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!models_[i] || !models_[i]->needs_fit()) continue;
    if (!table.has_column(nodes[i].name)) {
      throw ValidationError("prob dag: no column for node '" + nodes[i].name + "' in the summary");
    }
    const auto parents = structure_.parents(i);
    Eigen::MatrixXd inputs(table.rows(), static_cast<Eigen::Index>(parents.size()));
    for (std::size_t k = 0; k < parents.size(); ++k) {
      const auto& pname = nodes[parents[k]].name;
      if (!table.has_column(pname)) {
        throw ValidationError("prob dag: no column for node '" + pname + "' in the summary");
      }
      inputs.col(static_cast<Eigen::Index>(k)) = table.column(pname);
    }
    models_[i]->fit(inputs, table.column(nodes[i].name));
    trained_[i] = true;
  }
}

std::vector<std::size_t> ProbDag::param_nodes() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < structure_.size(); ++i) {
    if (structure_.nodes()[i].role == NodeRole::Param) out.push_back(i);
  }
  return out;
}

double ProbDag::best_observed(const std::string& objective, const SummaryTable& table) const {
  const auto idx = structure_.require(objective);
  const auto* expr = dynamic_cast<const ExprNode*>(models_[idx].get());
  double best = std::numeric_limits<double>::infinity();
  if (!expr) {
    if (!table.has_column(objective)) {
      throw ValidationError("prob dag: no column for objective '" + objective + "'");
    }
    const Eigen::VectorXd col = table.column(objective);
    for (const double v : col) {
      if (std::isfinite(v)) best = std::min(best, v);
    }
  } else {
    const auto parents = structure_.parents(idx);
    Eigen::MatrixXd inputs(table.rows(), static_cast<Eigen::Index>(parents.size()));
    for (std::size_t k = 0; k < parents.size(); ++k) {
      inputs.col(static_cast<Eigen::Index>(k)) = table.column(structure_.nodes()[parents[k]].name);
    }
    std::vector<double> row(parents.size());
    for (Eigen::Index r = 0; r < inputs.rows(); ++r) {
      for (std::size_t k = 0; k < parents.size(); ++k) row[k] = inputs(r, static_cast<Eigen::Index>(k));
      const double v = expr->evaluate(row);
      if (std::isfinite(v)) best = std::min(best, v);
    }
  }
  if (!std::isfinite(best)) throw NumericalError("prob dag: no finite observed objective value");
  return best;
}

Eigen::MatrixXd sample_objective(const ProbDag& dag, const std::string& objective,
                                 const ParentSamples& param_samples, Rng& rng,
                                 SampleCounters* counters) {
  const auto& g = dag.structure();
  const auto target = g.require(objective);
  const auto params = dag.param_nodes();
  if (param_samples.size() != params.size()) {
    throw ValidationError("sample_objective: expected " + std::to_string(params.size()) +
                          " parameter sample matrices, got " + std::to_string(param_samples.size()));
  }
  if (params.empty()) throw ValidationError("sample_objective: no parameter nodes");
  const Eigen::Index s = param_samples.front().rows();
  const Eigen::Index q = param_samples.front().cols();

  std::vector<bool> wanted(g.size(), false);
  for (const auto a : g.ancestors(target)) wanted[a] = true;
  wanted[target] = true;
  if (counters) counters->invocations.assign(g.size(), 0);

  std::vector<std::optional<Eigen::MatrixXd>> cache(g.size());
  const auto order = g.topological_order();
  if (!order) throw ValidationError("sample_objective: structure has a cycle");
  for (const auto node : *order) {
    if (!wanted[node]) continue;
    if (counters) ++counters->invocations[node];
    if (g.nodes()[node].role == NodeRole::Param) {
      const auto k = static_cast<std::size_t>(std::find(params.begin(), params.end(), node) - params.begin());
      const auto& m = param_samples[k];
      if (m.rows() != s || m.cols() != q) {
        throw ValidationError("sample_objective: parameter sample shape mismatch");
      }
      cache[node] = m;
      continue;
    }
    if (!dag.trained(node)) {
      throw Error("sample_objective: node '" + g.nodes()[node].name + "' is not trained");
    }
    ParentSamples inputs;
    for (const auto p : g.parents(node)) inputs.push_back(*cache[p]);
    cache[node] = dag.model(node)->sample(inputs, s, q, rng);
  }
  return std::move(*cache[target]);
}

Eigen::MatrixXd sample_objective(const ProbDag& dag, const std::string& objective,
                                 const Eigen::MatrixXd& candidates, Eigen::Index s, Rng& rng,
                                 SampleCounters* counters) {
  ParentSamples ps;
  ps.reserve(static_cast<std::size_t>(candidates.cols()));
  for (Eigen::Index d = 0; d < candidates.cols(); ++d) {
    ps.push_back(candidates.col(d).transpose().replicate(s, 1));
  }
  return sample_objective(dag, objective, ps, rng, counters);
}

}  // namespace dagtune
