#include "dagtune/summarizer.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "dagtune/errors.hpp"

namespace dagtune {

namespace {

double population_variance(const Eigen::VectorXd& v) {
  const double mean = v.mean();
  return (v.array() - mean).square().sum() / static_cast<double>(v.size());
}

Eigen::MatrixXd select_columns(const Eigen::MatrixXd& m, const std::vector<std::size_t>& idx) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    out.col(static_cast<Eigen::Index>(k)) = m.col(static_cast<Eigen::Index>(idx[k]));
  }
  return out;
}

}  // namespace

std::vector<DagNode> SummaryTable::nodes() const {
  std::vector<DagNode> out;
  for (const auto& n : param_names) out.push_back({n, NodeRole::Param});
  for (const auto& n : group_names) out.push_back({n, NodeRole::MetricGroup});
  for (const auto& n : objective_names) out.push_back({n, NodeRole::Objective});
  return out;
}

Eigen::MatrixXd SummaryTable::matrix() const {
  Eigen::MatrixXd out(rows(), params.cols() + groups.cols() + objectives.cols());
  out << params, groups, objectives;
  return out;
}

bool SummaryTable::has_column(const std::string& name) const {
  const auto in = [&](const std::vector<std::string>& v) {
    return std::find(v.begin(), v.end(), name) != v.end();
  };
  return in(param_names) || in(group_names) || in(objective_names);
}

Eigen::VectorXd SummaryTable::column(const std::string& name) const {
  const auto find_in = [&](const std::vector<std::string>& v, const Eigen::MatrixXd& m,
                           Eigen::VectorXd& out) {
    const auto it = std::find(v.begin(), v.end(), name);
    if (it == v.end()) return false;
    out = m.col(it - v.begin());
    return true;
  };
  Eigen::VectorXd out;
  if (find_in(param_names, params, out) || find_in(group_names, groups, out) ||
      find_in(objective_names, objectives, out)) {
    return out;
  }
  throw ValidationError("summary table has no column '" + name + "'");
}

std::pair<Eigen::MatrixXd, std::vector<std::string>> prune_low_variance(
    const Eigen::MatrixXd& m, const std::vector<std::string>& names, double min_variance) {
  if (m.rows() < 2) throw ValidationError("prune_low_variance: needs at least 2 rows");
  if (static_cast<std::size_t>(m.cols()) != names.size()) {
    throw ValidationError("prune_low_variance: column/name count mismatch");
  }
  std::vector<std::size_t> keep;
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    if (population_variance(m.col(j)) > min_variance) keep.push_back(static_cast<std::size_t>(j));
  }
  if (keep.empty()) {
    throw ValidationError(
        "no informative metrics: every metric has variance <= min_variance; lower the threshold");
  }
  std::vector<std::string> kept_names;
  for (const auto k : keep) kept_names.push_back(names[k]);
  return {select_columns(m, keep), std::move(kept_names)};
}

std::pair<Eigen::MatrixXd, std::vector<ColumnScaler>> standardize(const Eigen::MatrixXd& m) {
  Eigen::MatrixXd out(m.rows(), m.cols());
  std::vector<ColumnScaler> scalers;
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    const double mean = m.col(j).mean();
    const double sd = std::sqrt(population_variance(m.col(j)));
    if (!(sd > 0.0) || !std::isfinite(sd)) {
      throw ValidationError("standardize: column " + std::to_string(j) +
                            " has zero variance; prune it first");
    }
    out.col(j) = (m.col(j).array() - mean) / sd;
    scalers.push_back({mean, sd});
  }
  return {std::move(out), std::move(scalers)};
}

std::map<std::string, std::vector<std::size_t>> group_keys(
    const std::vector<MetricKeyPath>& names, int depth) {
  if (depth < 1) throw ValidationError("grouping depth must be >= 1");
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const auto& segs = names[i].segments;
    const auto take = std::min(static_cast<std::size_t>(depth), segs.size());
    MetricKeyPath prefix{{segs.begin(), segs.begin() + static_cast<std::ptrdiff_t>(take)}};
    groups[prefix.str()].push_back(i);
  }
  return groups;
}

SummaryTable summarize(std::span<const TraceRecord> records, const ParamSpace& space,
                       const SummaryOptions& opts) {
  if (opts.grouping.depth < 1) throw ValidationError("grouping depth must be >= 1");
  if (opts.grouping.min_variance < 0.0) throw ValidationError("min_variance must be >= 0");

  std::set<std::string> objective_names;
  for (const auto& r : records) {
    for (const auto& [k, _] : r.objectives) objective_names.insert(k);
  }
  std::vector<TraceRecord> usable;
  for (const auto& r : records) {
    if (r.failed()) continue;
    if (r.objectives.size() != objective_names.size()) continue;
    usable.push_back(r);
  }
  if (usable.size() < 2) {
    throw ValidationError("summarize: needs at least 2 successful records, have " +
                          std::to_string(usable.size()));
  }

  const TraceMatrix tm = to_matrix(std::span<const TraceRecord>(usable), space);
  const auto n = tm.rows.rows();
  const auto np = static_cast<Eigen::Index>(tm.n_params);
  const auto nm = static_cast<Eigen::Index>(tm.n_metrics);
  const auto no = static_cast<Eigen::Index>(tm.n_objectives);

  SummaryTable out;
  out.param_names = space.names();
  out.params = tm.rows.leftCols(np);

  out.groups = Eigen::MatrixXd(n, 0);
  if (opts.include_metrics) {
    // Impute missing cells with the column mean; drop columns never observed.
    std::vector<std::string> names;
    std::vector<Eigen::VectorXd> cols;
    for (Eigen::Index j = 0; j < nm; ++j) {
      Eigen::VectorXd c = tm.rows.col(np + j);
      double sum = 0.0;
      int present = 0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!std::isnan(c(i))) {
          sum += c(i);
          ++present;
        }
      }
      if (present == 0) continue;
      const double mean = sum / present;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (std::isnan(c(i))) c(i) = mean;
      }
      names.push_back(tm.columns[static_cast<std::size_t>(np + j)]);
      cols.push_back(std::move(c));
    }
    if (cols.empty()) throw ValidationError("no informative metrics: trace has no metrics");
    Eigen::MatrixXd raw(n, static_cast<Eigen::Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) raw.col(static_cast<Eigen::Index>(k)) = cols[k];

    auto [pruned, kept] = prune_low_variance(raw, names, opts.grouping.min_variance);
    auto [z, scalers] = standardize(pruned);
    std::vector<MetricKeyPath> paths;
    for (std::size_t k = 0; k < kept.size(); ++k) {
      out.scalers[kept[k]] = scalers[k];
      paths.push_back(MetricKeyPath::parse(kept[k]));
    }

    const auto groups = group_keys(paths, opts.grouping.depth);
    out.groups = Eigen::MatrixXd(n, static_cast<Eigen::Index>(groups.size()));
    Eigen::Index g = 0;
    for (const auto& [key, idx] : groups) {
      const auto fit = factor_compress(select_columns(z, idx), opts.factor);
      out.groups.col(g++) = fit.scores;
      GroupLoading gl;
      gl.group = key;
      for (const auto k : idx) gl.columns.push_back(kept[k]);
      gl.loadings = fit.loadings;
      gl.pca_fallback = fit.pca_fallback;
      out.loadings.push_back(std::move(gl));
      out.group_names.push_back(key);
    }
  }

  out.objective_names.assign(objective_names.begin(), objective_names.end());
  out.objectives = Eigen::MatrixXd(n, no);
  for (Eigen::Index j = 0; j < no; ++j) {
    Eigen::VectorXd c = tm.rows.col(np + nm + j);
    if (opts.maximize) c = -c;
    const double mean = c.mean();
    double sd = std::sqrt(population_variance(c));
    // A flat objective keeps its offset removed but is not rescaled.
    if (!(sd > 0.0)) sd = 1.0;
    out.objectives.col(j) = (c.array() - mean) / sd;
    out.scalers[out.objective_names[static_cast<std::size_t>(j)]] = {mean, sd};
  }

  std::set<std::string> all;
  for (const auto& node : out.nodes()) {
    if (!all.insert(node.name).second) {
      throw ValidationError("summarize: column name '" + node.name +
                            "' is used by more than one role; rename the parameter or change grouping depth");
    }
  }
  return out;
}

}  // namespace dagtune
