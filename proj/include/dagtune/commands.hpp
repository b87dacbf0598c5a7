#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace dagtune {

// Process exit codes shared by the subcommands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitInput = 2;
inline constexpr int kExitEnvAbort = 3;

struct RunArgs {
  std::filesystem::path config;
  std::optional<int> budget;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::optional<std::string> tuner;
  std::optional<std::filesystem::path> prior;
  bool fresh = false;
  std::optional<std::int64_t> stop_after;
};

/// Runs (or resumes) a tuning session. Writes trace.jsonl, config.json,
/// structure/round_NNNN.json and structure.dot into the output directory and
/// prints a one-line summary.
int cmd_run(const RunArgs& args, std::ostream& out, std::ostream& err);

struct StructureArgs {
  std::filesystem::path trace;
  std::optional<std::filesystem::path> out;
  // Defaults to config.json next to the trace.
  std::optional<std::filesystem::path> config;
};

/// Relearns the structure from a stored trace, writes DOT and prints
/// "max_dimension N".
int cmd_structure(const StructureArgs& args, std::ostream& out, std::ostream& err);

struct ReportArgs {
  std::vector<std::filesystem::path> traces;
  std::vector<std::filesystem::path> baseline_traces;
  std::optional<std::string> direction;
  std::optional<double> default_objective;
  std::optional<std::filesystem::path> config;
  std::optional<std::filesystem::path> out;
};

/// Best-so-far curves as CSV: trace,step,best_so_far,improvement_over_default_x.
int cmd_report(const ReportArgs& args, std::ostream& out, std::ostream& err);

}  // namespace dagtune
