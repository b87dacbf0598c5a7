#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dagtune/envs.hpp"
#include "dagtune/param_space.hpp"
#include "dagtune/prob_dag.hpp"
#include "dagtune/rng.hpp"
#include "dagtune/sobol.hpp"
#include "dagtune/structure_learner.hpp"
#include "dagtune/summarizer.hpp"
#include "dagtune/trace_store.hpp"

namespace dagtune {

struct Schedule {
  int budget = 0;
  int warmup = 0;
  int relearn_every = 1;

  /// warmup = max(5, D/2), relearn_every = max(1, budget/4).
  static Schedule defaults(int budget, std::size_t dimension);
  void validate() const;
  /// Model steps at which the structure is learned afresh: the first model
  /// step and every multiple of relearn_every after it.
  bool is_relearn_step(std::int64_t step) const;
  /// The relearn step whose structure is in force at this model step.
  std::int64_t relearn_point(std::int64_t step) const;
  bool operator==(const Schedule&) const = default;
};

struct AcquisitionOptions {
  int n_candidates = 512;
  int mc_draws = 128;
  bool operator==(const AcquisitionOptions&) const = default;
};

enum class ProposalSource { Warmup, Model, Random };

struct Proposal {
  Configuration config;
  std::vector<double> x;
  double acq_value = 0.0;
  ProposalSource provenance = ProposalSource::Model;
};

/// Scores n_candidates Sobol points by qEI over objective draws from the
/// DAG (q = 1 per candidate) and returns the best; ties go to the earliest
/// candidate.
Proposal propose(const ProbDag& dag, const std::string& objective, const ParamSpace& space,
                 SobolSampler& sampler, double f_best, const AcquisitionOptions& acq, Rng& rng);

struct ExpertPrior {
  std::vector<NamedEdge> edges;
  std::vector<NamedEdge> tabu_edges;
  std::map<std::string, ModelSpec> models;
  bool operator==(const ExpertPrior&) const = default;
};

enum class TunerKind { Structured, Vanilla, Random };

std::string to_string(TunerKind k);
TunerKind tuner_from_string(const std::string& s);

struct StructureRound {
  std::int64_t step = 0;
  DagStructure structure;
  double threshold = 0.0;
};

struct LoopOptions {
  TunerKind tuner = TunerKind::Structured;
  std::string objective;
  bool maximize = false;
  Schedule schedule;
  AcquisitionOptions acquisition;
  GroupingSpec grouping;
  NotearsOptions notears;
  ExpertPrior prior;
  KernelKind kernel = KernelKind::Matern52;
  std::uint64_t seed = 0;
  int max_consecutive_failures = 3;
  // Stop once the trace holds this many records (budget still caps it).
  std::optional<std::int64_t> stop_after;
  std::function<void(const StructureRound&)> on_structure;
  std::function<void(const TraceRecord&)> on_record;
};

struct LoopResult {
  std::size_t evaluations = 0;
  std::optional<std::int64_t> best_step;
  // Raw objective value in the declared direction.
  std::optional<double> best_value;
  std::optional<StructureRound> last_structure;
};

/// Seed recorded with, and driving, the given step.
std::uint64_t step_seed(std::uint64_t run_seed, std::int64_t step);

/// The Sobol warmup point for a step; identical across tuners for a seed.
std::vector<double> warmup_point(std::uint64_t run_seed, std::size_t dimension, std::int64_t step);

/// Learns the structure on a summary (structured tuner) or returns the fully
/// connected params -> objective graph (vanilla tuner).
StructureRound build_structure(const SummaryTable& table, const LoopOptions& opts,
                               std::int64_t step);

/// Continues the run from store.size() up to the budget, appending one
/// record per step. Resuming a killed run reproduces the remaining steps of
/// the uninterrupted run.
LoopResult run_loop(Environment& env, const ParamSpace& space, const LoopOptions& opts,
                    TraceStore& store);

/// Best record (failed records skipped) in the declared direction.
std::optional<std::size_t> best_record(const std::vector<TraceRecord>& records,
                                       const std::string& objective, bool maximize);

}  // namespace dagtune
