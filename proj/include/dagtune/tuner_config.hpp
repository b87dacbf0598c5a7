#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "dagtune/gp.hpp"
#include "dagtune/optimizer.hpp"
#include "dagtune/param_space.hpp"
#include "dagtune/summarizer.hpp"

namespace dagtune {

inline constexpr int kConfigSchemaVersion = 1;

struct ObjectiveSpec {
  std::string name;
  bool maximize = false;
  std::string expr;
  bool operator==(const ObjectiveSpec&) const = default;
};

struct EnvSpec {
  enum class Kind { Builtin, Process };
  Kind kind = Kind::Builtin;
  std::string builtin_name;
  std::string command;
  bool operator==(const EnvSpec&) const = default;
};

struct ScheduleOverrides {
  std::optional<int> budget;
  std::optional<int> warmup;
  std::optional<int> relearn_every;
  bool operator==(const ScheduleOverrides&) const = default;
};

/// Everything a run needs. Stored as a JSON document; see README for the
/// schema.
struct TunerConfig {
  ParamSpace space;
  ObjectiveSpec objective;
  std::string annotation = R"(^\s*([A-Za-z_][A-Za-z0-9_.]*)(?:\s*[=:]\s*|\s+)(\S+)\s*$)";
  GroupingSpec grouping;
  ScheduleOverrides schedule;
  AcquisitionOptions acquisition;
  TunerKind tuner = TunerKind::Structured;
  KernelKind kernel = KernelKind::Matern52;
  std::uint64_t seed = 0;
  EnvSpec env;
  std::string output_dir;
  std::optional<Configuration> default_config;
  // Expert prior document path, relative to the config file.
  std::string prior;

  bool operator==(const TunerConfig&) const = default;

  /// Resolves overrides against the budget and dimension.
  Schedule resolved_schedule() const;
};

/// Throws ValidationError naming the offending field.
TunerConfig parse_tuner_config(const std::string& text);
std::string serialize_tuner_config(const TunerConfig& cfg);
TunerConfig load_tuner_config(const std::filesystem::path& path);

/// Ready-to-run configuration for a builtin environment.
TunerConfig builtin_config(const std::string& name);

ExpertPrior parse_expert_prior(const std::string& text);
std::string serialize_expert_prior(const ExpertPrior& prior);
ExpertPrior load_expert_prior(const std::filesystem::path& path);

/// Builds the environment described by the config.
std::unique_ptr<Environment> make_environment(const TunerConfig& cfg);

/// Loop options from a config plus its (possibly empty) prior.
LoopOptions loop_options(const TunerConfig& cfg, const ExpertPrior& prior);

}  // namespace dagtune
