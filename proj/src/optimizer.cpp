#include "dagtune/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include <spdlog/spdlog.h>

#include "dagtune/acquisition.hpp"
#include "dagtune/errors.hpp"

namespace dagtune {

namespace {

constexpr std::uint64_t kWarmupStream = 0x5741524dULL;

SummaryTable summarize_for(std::span<const TraceRecord> records, const ParamSpace& space,
                           const LoopOptions& opts) {
  SummaryOptions so;
  so.grouping = opts.grouping;
  so.maximize = opts.maximize;
  so.include_metrics = opts.tuner == TunerKind::Structured;
  if (!so.include_metrics) return summarize(records, space, so);
  try {
    return summarize(records, space, so);
  } catch (const ValidationError& e) {
    spdlog::warn("summarize: {}; continuing without metrics", e.what());
    so.include_metrics = false;
    return summarize(records, space, so);
  }
}

std::size_t usable_rows(std::span<const TraceRecord> records, const std::string& objective) {
  return static_cast<std::size_t>(std::count_if(records.begin(), records.end(), [&](const auto& r) {
    return !r.failed() && r.objectives.count(objective);
  }));
}

bool covers(const SummaryTable& table, const DagStructure& g) {
  return std::all_of(g.nodes().begin(), g.nodes().end(),
                     [&](const DagNode& n) { return table.has_column(n.name); });
}

}  // namespace

Schedule Schedule::defaults(int budget, std::size_t dimension) {
  Schedule s;
  s.budget = budget;
  s.warmup = std::max(5, static_cast<int>(dimension / 2));
  s.relearn_every = std::max(1, budget / 4);
  return s;
}

void Schedule::validate() const {
  if (budget < 1) throw ValidationError("schedule.budget must be >= 1");
  if (warmup < 2) throw ValidationError("schedule.warmup must be >= 2");
  if (relearn_every < 1) throw ValidationError("schedule.relearn_every must be >= 1");
}

bool Schedule::is_relearn_step(std::int64_t step) const {
  return step >= warmup && (step == warmup || step % relearn_every == 0);
}

std::int64_t Schedule::relearn_point(std::int64_t step) const {
  if (step < warmup) throw ValidationError("relearn_point: step is inside the warmup");
  const std::int64_t m = (step / relearn_every) * relearn_every;
  return std::max<std::int64_t>(m, warmup);
}

std::string to_string(TunerKind k) {
  switch (k) {
    case TunerKind::Structured:
      return "structured";
    case TunerKind::Vanilla:
      return "vanilla";
    case TunerKind::Random:
      return "random";
  }
  return "structured";
}

TunerKind tuner_from_string(const std::string& s) {
  if (s == "structured") return TunerKind::Structured;
  if (s == "vanilla") return TunerKind::Vanilla;
  if (s == "random") return TunerKind::Random;
  throw ValidationError("unknown tuner '" + s + "' (expected structured, vanilla or random)");
}

std::uint64_t step_seed(std::uint64_t run_seed, std::int64_t step) {
  return derive_seed(run_seed, static_cast<std::uint64_t>(step));
}

std::vector<double> warmup_point(std::uint64_t run_seed, std::size_t dimension, std::int64_t step) {
  SobolSampler s(dimension, derive_seed(run_seed, kWarmupStream));
  s.skip(static_cast<std::uint64_t>(step));
  const Eigen::MatrixXd p = s.next(1);
  return {p.data(), p.data() + p.size()};
}

Proposal propose(const ProbDag& dag, const std::string& objective, const ParamSpace& space,
                 SobolSampler& sampler, double f_best, const AcquisitionOptions& acq, Rng& rng) {
  if (acq.n_candidates < 1 || acq.mc_draws < 1) {
    throw ValidationError("acquisition: n_candidates and mc_draws must be >= 1");
  }
  if (sampler.dimension() != space.dimension()) {
    throw ValidationError("propose: sampler dimension does not match the space");
  }
  const Eigen::MatrixXd cand = sampler.next(static_cast<std::size_t>(acq.n_candidates));
  const auto params = dag.param_nodes();
  const auto names = space.names();
  Eigen::MatrixXd ordered(cand.rows(), static_cast<Eigen::Index>(params.size()));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& pname = dag.structure().nodes()[params[k]].name;
    const auto it = std::find(names.begin(), names.end(), pname);
    if (it == names.end()) throw ValidationError("propose: node '" + pname + "' is not a parameter");
    ordered.col(static_cast<Eigen::Index>(k)) = cand.col(it - names.begin());
  }
  const Eigen::MatrixXd draws = sample_objective(dag, objective, ordered, acq.mc_draws, rng);
  const Eigen::VectorXd scores = qei_per_column(draws, f_best);

  Eigen::Index best = -1;
  for (Eigen::Index j = 0; j < scores.size(); ++j) {
    if (!std::isfinite(scores(j))) continue;
    if (best < 0 || scores(j) > scores(best)) best = j;
  }
  if (best < 0) {
    throw NumericalError("propose: every candidate produced non-finite objective draws; "
                         "inspect the node models");
  }
  Proposal p;
  p.x.assign(cand.cols(), 0.0);
  for (Eigen::Index d = 0; d < cand.cols(); ++d) p.x[static_cast<std::size_t>(d)] = cand(best, d);
  p.config = space.decode(p.x);
  p.acq_value = scores(best);
  p.provenance = ProposalSource::Model;
  return p;
}

StructureRound build_structure(const SummaryTable& table, const LoopOptions& opts,
                               std::int64_t step) {
  const auto nodes = table.nodes();
  StructureRound round;
  round.step = step;
  DagStructure g(nodes);
  const auto target = g.index_of(opts.objective);
  if (!target) throw ValidationError("objective '" + opts.objective + "' is not in the summary");

  if (opts.tuner == TunerKind::Structured) {
    const auto mask = make_edge_mask(nodes, resolve_tabu(nodes, opts.prior.tabu_edges));
    const auto learned = learn_structure(table, mask, opts.notears);
    auto merged = merge_expert(nodes, learned.weights, opts.prior.edges, opts.prior.tabu_edges);
    g = std::move(merged.structure);
    round.threshold = learned.threshold;
  }
  const auto anc = g.ancestors(*target);
  const bool has_param = std::any_of(anc.begin(), anc.end(), [&](std::size_t a) {
    return nodes[a].role == NodeRole::Param;
  });
  if (!has_param) {
    if (opts.tuner == TunerKind::Structured) {
      spdlog::warn("step {}: no parameter reaches '{}' in the learned graph; using all parameters "
                   "as its parents",
                   step, opts.objective);
    }
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i].role == NodeRole::Param) g.add_edge({i, *target, 0.0, Provenance::Learned});
    }
  }
  round.structure = std::move(g);
  return round;
}

std::optional<std::size_t> best_record(const std::vector<TraceRecord>& records,
                                       const std::string& objective, bool maximize) {
  std::optional<std::size_t> best;
  double best_v = 0.0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto it = records[i].objectives.find(objective);
    if (it == records[i].objectives.end() || !std::isfinite(it->second)) continue;
    const double v = maximize ? -it->second : it->second;
    if (!best || v < best_v) {
      best = i;
      best_v = v;
    }
  }
  return best;
}

LoopResult run_loop(Environment& env, const ParamSpace& space, const LoopOptions& opts,
                    TraceStore& store) {
  opts.schedule.validate();
  if (opts.objective.empty()) throw ValidationError("objective name is empty");
  const std::size_t dim = space.dimension();
  if (dim == 0) throw ValidationError("parameter space is empty");

  int failures = 0;
  for (auto it = store.records().rbegin(); it != store.records().rend() && it->failed(); ++it) {
    ++failures;
  }

  LoopResult result;
  std::optional<StructureRound> round;
  for (auto step = static_cast<std::int64_t>(store.size()); step < opts.schedule.budget; ++step) {
    if (opts.stop_after && static_cast<std::int64_t>(store.size()) >= *opts.stop_after) break;
    const auto t0 = std::chrono::steady_clock::now();
    const std::uint64_t seed = step_seed(opts.seed, step);
    const std::span<const TraceRecord> records(store.records());

    Proposal prop;
    if (opts.tuner == TunerKind::Random) {
      Rng rng(seed);
      std::uniform_real_distribution<double> u(0.0, 1.0);
      prop.x.resize(dim);
      for (auto& v : prop.x) v = u(rng);
      prop.provenance = ProposalSource::Random;
    } else if (step < opts.schedule.warmup || usable_rows(records, opts.objective) < 2) {
      prop.x = warmup_point(opts.seed, dim, step);
      prop.provenance = ProposalSource::Warmup;
    } else {
      const SummaryTable table = summarize_for(records, space, opts);
      const std::int64_t rp = opts.schedule.relearn_point(step);
      if (!round || round->step != rp) {
        const auto prefix = records.first(static_cast<std::size_t>(rp));
        round = build_structure(summarize_for(prefix, space, opts), opts, rp);
        if (rp == step && opts.on_structure) opts.on_structure(*round);
      }
      DagStructure structure = round->structure;
      if (!covers(table, structure)) {
        spdlog::warn("step {}: structure nodes missing from the summary; relearning for this step",
                     step);
        structure = build_structure(table, opts, step).structure;
      }
      std::map<std::string, ModelSpec> bindings;
      for (const auto& [name, spec] : opts.prior.models) {
        if (structure.index_of(name)) {
          bindings.emplace(name, spec);
        } else {
          spdlog::debug("model binding for '{}' pending: node not present", name);
        }
      }
      GpFitOptions gp;
      gp.kernel = opts.kernel;
      gp.seed = derive_seed(seed, 3);
      ProbDag dag = ProbDag::build(std::move(structure), bindings, gp);
      dag.fit_all(table);
      const double f_best = dag.best_observed(opts.objective, table);
      SobolSampler sampler(dim, derive_seed(seed, 1));
      Rng rng(derive_seed(seed, 2));
      prop = propose(dag, opts.objective, space, sampler, f_best, opts.acquisition, rng);
    }
    if (prop.provenance != ProposalSource::Model) prop.config = space.decode(prop.x);

    EvalResult ev;
    try {
      ev = env.evaluate(prop.config);
    } catch (const std::exception& e) {
      ev.ok = false;
      ev.error = e.what();
    }
    if (ev.ok && !ev.objectives.count(opts.objective)) {
      ev.ok = false;
      ev.error = "objective '" + opts.objective + "' missing from the evaluation";
    }
    TraceRecord rec;
    rec.step = step;
    rec.config = prop.config;
    rec.seed = seed;
    if (ev.ok) {
      rec.metrics = std::move(ev.metrics);
      rec.objectives = std::move(ev.objectives);
      failures = 0;
    } else {
      spdlog::warn("step {}: evaluation failed: {}", step, ev.error);
      ++failures;
    }
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    store.append(rec);
    ++result.evaluations;
    if (opts.on_record) opts.on_record(rec);
    if (failures >= opts.max_consecutive_failures) {
      throw EnvAbortError("aborting after " + std::to_string(failures) +
                          " consecutive failed evaluations (last: " + ev.error + ")");
    }
  }

  if (const auto b = best_record(store.records(), opts.objective, opts.maximize)) {
    result.best_step = store.records()[*b].step;
    result.best_value = store.records()[*b].objectives.at(opts.objective);
  }
  result.last_structure = round;
  return result;
}

}  // namespace dagtune
