#include "dagtune/structure_learner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <spdlog/spdlog.h>
#include <unsupported/Eigen/MatrixFunctions>

#include "dagtune/bounded_lbfgs.hpp"
#include "dagtune/errors.hpp"

namespace dagtune {

double acyclicity(const Eigen::MatrixXd& w) {
  const Eigen::MatrixXd e = w.cwiseProduct(w).exp();
  return e.trace() - static_cast<double>(w.rows());
}

Eigen::MatrixXd acyclicity_gradient(const Eigen::MatrixXd& w) {
  const Eigen::MatrixXd e = w.cwiseProduct(w).exp();
  return e.transpose().cwiseProduct(2.0 * w);
}

namespace {

bool support_acyclic(const Eigen::MatrixXd& w) {
  const auto d = static_cast<std::size_t>(w.rows());
  std::vector<std::size_t> indeg(d, 0);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      if (w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) != 0.0) ++indeg[j];
    }
  }
  std::vector<std::size_t> ready;
  for (std::size_t i = 0; i < d; ++i) {
    if (indeg[i] == 0) ready.push_back(i);
  }
  std::size_t seen = 0;
  while (!ready.empty()) {
    const auto i = ready.back();
    ready.pop_back();
    ++seen;
    for (std::size_t j = 0; j < d; ++j) {
      if (w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) != 0.0 && --indeg[j] == 0) {
        ready.push_back(j);
      }
    }
  }
  return seen == d;
}

Eigen::MatrixXd apply_threshold(const Eigen::MatrixXd& w, double thr) {
  return (w.array().abs() < thr).select(0.0, w);
}

}  // namespace

LearnResult learn_structure(const Eigen::MatrixXd& x_in, const EdgeMask& mask,
                            const NotearsOptions& opts) {
  const Eigen::Index n = x_in.rows();
  const Eigen::Index d = x_in.cols();
  if (static_cast<std::size_t>(d) != mask.size()) {
    throw ValidationError("learn_structure: mask size does not match column count");
  }
  if (n < 2) throw ValidationError("learn_structure: needs at least 2 rows");
  if (n < d) {
    spdlog::warn("learn_structure: {} rows for {} columns; the learned graph may be unreliable", n, d);
  }

  const Eigen::RowVectorXd mean = x_in.colwise().mean();
  const Eigen::MatrixXd x = x_in.rowwise() - mean;
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(n);
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(d, d);
  const Eigen::Index dd = d * d;

  Eigen::VectorXd lower = Eigen::VectorXd::Zero(2 * dd);
  Eigen::VectorXd upper =
      Eigen::VectorXd::Constant(2 * dd, std::numeric_limits<double>::infinity());
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < d; ++i) {
      if (!mask.allowed(static_cast<std::size_t>(i), static_cast<std::size_t>(j))) {
        upper(j * d + i) = 0.0;
        upper(dd + j * d + i) = 0.0;
      }
    }
  }

  const auto unpack = [&](const Eigen::VectorXd& w) {
    return Eigen::Map<const Eigen::MatrixXd>(w.data(), d, d) -
           Eigen::Map<const Eigen::MatrixXd>(w.data() + dd, d, d);
  };

  double rho = 1.0;
  double alpha = 0.0;
  double h = std::numeric_limits<double>::infinity();
  Eigen::VectorXd w_est = Eigen::VectorXd::Zero(2 * dd);

  LbfgsOptions lopts;
  lopts.max_iterations = opts.inner_max_iterations;

  LearnResult result;
  for (int outer = 0; outer < opts.max_outer; ++outer) {
    result.outer_iterations = outer + 1;
    Eigen::VectorXd w_new;
    double h_new = 0.0;
    while (rho < opts.rho_max) {
      const Objective objective = [&](const Eigen::VectorXd& w, Eigen::VectorXd& grad) {
        const Eigen::MatrixXd wm = unpack(w);
        const Eigen::MatrixXd resid = eye - wm;
        const double loss = 0.5 * (resid.transpose() * cov * resid).trace();
        const Eigen::MatrixXd g_loss = -cov * resid;
        const Eigen::MatrixXd e = wm.cwiseProduct(wm).exp();
        const double hv = e.trace() - static_cast<double>(d);
        const Eigen::MatrixXd g_h = e.transpose().cwiseProduct(2.0 * wm);
        const double obj = loss + 0.5 * rho * hv * hv + alpha * hv + opts.l1 * w.sum();
        const Eigen::MatrixXd g_smooth = g_loss + (rho * hv + alpha) * g_h;
        grad.resize(2 * dd);
        Eigen::Map<Eigen::MatrixXd>(grad.data(), d, d) = g_smooth.array() + opts.l1;
        Eigen::Map<Eigen::MatrixXd>(grad.data() + dd, d, d) = -g_smooth.array() + opts.l1;
        return obj;
      };
      const auto sol = minimize_box(objective, w_est, lower, upper, lopts);
      if (!std::isfinite(sol.f)) {
        throw NumericalError("learn_structure: inner solve diverged (rho=" + std::to_string(rho) +
                             ", alpha=" + std::to_string(alpha) + ")");
      }
      w_new = sol.x;
      h_new = acyclicity(unpack(w_new));
      if (!std::isfinite(h_new)) {
        throw NumericalError("learn_structure: acyclicity penalty is not finite (rho=" +
                             std::to_string(rho) + ")");
      }
      if (h_new > 0.25 * h) {
        rho *= 10.0;
      } else {
        break;
      }
    }
    w_est = w_new;
    h = h_new;
    alpha += rho * h;
    if (h <= opts.h_tol || rho >= opts.rho_max) break;
  }

  result.raw_weights = unpack(w_est);
  result.h = h;
  double thr = opts.w_threshold;
  Eigen::MatrixXd w = apply_threshold(result.raw_weights, thr);
  while (!support_acyclic(w)) {
    thr += 0.05;
    w = apply_threshold(result.raw_weights, thr);
  }
  result.weights = std::move(w);
  result.threshold = thr;
  return result;
}

LearnResult learn_structure(const SummaryTable& table, const EdgeMask& mask,
                            const NotearsOptions& opts) {
  Eigen::MatrixXd x = table.matrix();
  for (Eigen::Index j = 0; j < table.params.cols(); ++j) {
    const double mean = x.col(j).mean();
    const double sd = std::sqrt((x.col(j).array() - mean).square().mean());
    x.col(j) = (x.col(j).array() - mean) / (sd > 0.0 ? sd : 1.0);
  }
  return learn_structure(x, mask, opts);
}

std::vector<std::pair<std::size_t, std::size_t>> resolve_tabu(
    const std::vector<DagNode>& nodes, const std::vector<NamedEdge>& tabu_edges) {
  const auto find = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i].name == name) return i;
    }
    return std::nullopt;
  };
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& [s, t] : tabu_edges) {
    const auto a = find(s);
    const auto b = find(t);
    if (a && b) out.emplace_back(*a, *b);
  }
  return out;
}

MergeResult merge_expert(const std::vector<DagNode>& nodes, const Eigen::MatrixXd& learned,
                         const std::vector<NamedEdge>& expert_edges,
                         const std::vector<NamedEdge>& tabu_edges) {
  const auto d = nodes.size();
  if (static_cast<std::size_t>(learned.rows()) != d || static_cast<std::size_t>(learned.cols()) != d) {
    throw ValidationError("merge_expert: weight matrix does not match node count");
  }
  MergeResult out;
  out.structure = DagStructure(nodes);
  auto& g = out.structure;
  const auto mask = make_edge_mask(nodes, resolve_tabu(nodes, tabu_edges));

  for (const auto& [src, dst] : expert_edges) {
    const auto s = g.index_of(src);
    const auto t = g.index_of(dst);
    if (!s || !t) {
      out.pending.emplace_back(src, dst);
      continue;
    }
    if (*s == *t) throw ValidationError("expert edge '" + src + "' -> itself");
    if (nodes[*t].role == NodeRole::Param) {
      throw ValidationError("expert edge " + src + " -> " + dst + ": parameters cannot have parents");
    }
    if (nodes[*s].role == NodeRole::Objective) {
      throw ValidationError("expert edge " + src + " -> " + dst + ": objectives cannot have children");
    }
    g.add_edge({*s, *t, 0.0, Provenance::Expert});
  }
  if (!g.is_acyclic()) throw ValidationError("expert edges form a cycle");

  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double w = learned(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (w == 0.0 || i == j || !mask.allowed(i, j)) continue;
      if (const auto* e = g.find_edge(i, j); e && e->provenance == Provenance::Expert) continue;
      if (const auto* e = g.find_edge(j, i); e && e->provenance == Provenance::Expert) continue;
      g.add_edge({i, j, w, Provenance::Learned});
    }
  }

  while (true) {
    const auto cycle = g.find_cycle();
    if (cycle.empty()) break;
    const DagEdge* weakest = nullptr;
    for (const auto& [s, t] : cycle) {
      const auto* e = g.find_edge(s, t);
      if (e->provenance != Provenance::Learned) continue;
      if (!weakest || std::abs(e->weight) < std::abs(weakest->weight)) weakest = e;
    }
    if (!weakest) throw ValidationError("merge_expert: cycle made only of expert edges");
    g.remove_edge(weakest->src, weakest->dst);
  }
  for (const auto& [s, t] : out.pending) {
    spdlog::debug("expert edge {} -> {} pending: node not present yet", s, t);
  }
  return out;
}

}  // namespace dagtune
