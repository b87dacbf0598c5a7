#pragma once

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dagtune/dag_structure.hpp"
#include "dagtune/factor_analysis.hpp"
#include "dagtune/param_space.hpp"
#include "dagtune/trace_store.hpp"

namespace dagtune {

struct GroupingSpec {
  // Leading key-path segments forming the group key.
  int depth = 1;
  // Prune threshold on raw population variance.
  double min_variance = 1e-12;
  bool operator==(const GroupingSpec&) const = default;
};

struct ColumnScaler {
  double mean = 0.0;
  double std = 1.0;
};

struct GroupLoading {
  std::string group;
  std::vector<std::string> columns;
  Eigen::VectorXd loadings;
  bool pca_fallback = false;
};

/// The compressed view of a trace that structure learning and node models
/// consume: unit-cube parameters, one factor column per metric group, and
/// standardized objective columns (negated first when maximizing).
struct SummaryTable {
  std::vector<std::string> param_names;
  Eigen::MatrixXd params;
  std::vector<std::string> group_names;
  Eigen::MatrixXd groups;
  std::vector<std::string> objective_names;
  Eigen::MatrixXd objectives;

  // Keyed by raw metric key or objective name.
  std::map<std::string, ColumnScaler> scalers;
  std::vector<GroupLoading> loadings;

  Eigen::Index rows() const { return params.rows(); }
  /// Params, then groups, then objectives.
  std::vector<DagNode> nodes() const;
  /// All columns in nodes() order.
  Eigen::MatrixXd matrix() const;
  bool has_column(const std::string& name) const;
  Eigen::VectorXd column(const std::string& name) const;
};

struct SummaryOptions {
  GroupingSpec grouping;
  bool maximize = false;
  // Vanilla BO ignores logs entirely.
  bool include_metrics = true;
  FactorFitOptions factor;
};

/// Drops columns whose population variance is <= min_variance.
std::pair<Eigen::MatrixXd, std::vector<std::string>> prune_low_variance(
    const Eigen::MatrixXd& m, const std::vector<std::string>& names, double min_variance);

std::pair<Eigen::MatrixXd, std::vector<ColumnScaler>> standardize(const Eigen::MatrixXd& m);

/// Group key -> column indices; the key is the first min(depth, len) segments.
std::map<std::string, std::vector<std::size_t>> group_keys(
    const std::vector<MetricKeyPath>& names, int depth);

/// Failed records (no objectives) are skipped.
SummaryTable summarize(std::span<const TraceRecord> records, const ParamSpace& space,
                       const SummaryOptions& opts = {});

inline SummaryTable summarize(const TraceStore& store, const ParamSpace& space,
                              const SummaryOptions& opts = {}) {
  return summarize(std::span<const TraceRecord>(store.records()), space, opts);
}

}  // namespace dagtune
