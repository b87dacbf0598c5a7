#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "dagtune/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"dagtune: structured Bayesian optimization for system configuration"};
  app.require_subcommand(1);
  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));

  dagtune::RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "run or resume a tuning session");
  run_cmd->add_option("config", run.config, "tuner config (JSON)")->required();
  run_cmd->add_option("--budget", run.budget, "total evaluations");
  run_cmd->add_option("--seed", run.seed, "run seed");
  run_cmd->add_option("--out", run.out, "output directory");
  run_cmd->add_option("--tuner", run.tuner, "structured, vanilla or random")
      ->check(CLI::IsMember({"structured", "vanilla", "random"}));
  run_cmd->add_option("--prior", run.prior, "expert prior (JSON)");
  run_cmd->add_flag("--fresh", run.fresh, "discard an existing trace instead of resuming");
  run_cmd->add_option("--stop-after", run.stop_after, "stop once the trace holds this many records");

  dagtune::StructureArgs st;
  auto* st_cmd = app.add_subcommand("structure", "relearn and export the structure of a trace");
  st_cmd->add_option("--trace", st.trace, "trace.jsonl")->required();
  st_cmd->add_option("--out", st.out, "DOT output (stdout if omitted)");
  st_cmd->add_option("--config", st.config, "tuner config (default: config.json next to the trace)");

  dagtune::ReportArgs rep;
  auto* rep_cmd = app.add_subcommand("report", "best-so-far curves as CSV");
  rep_cmd->add_option("--trace", rep.traces, "trace to report (repeatable)");
  rep_cmd->add_option("--baseline-trace", rep.baseline_traces, "baseline trace (repeatable)");
  rep_cmd->add_option("--direction", rep.direction, "min or max")->check(CLI::IsMember({"min", "max"}));
  rep_cmd->add_option("--default-objective", rep.default_objective,
                      "objective of the default configuration");
  rep_cmd->add_option("--config", rep.config, "tuner config");
  rep_cmd->add_option("--out", rep.out, "CSV output (stdout if omitted)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : dagtune::kExitInput;
  }
  spdlog::set_default_logger(spdlog::stderr_color_st("dagtune"));
  spdlog::set_level(spdlog::level::from_str(log_level));

  if (*run_cmd) return dagtune::cmd_run(run, std::cout, std::cerr);
  if (*st_cmd) return dagtune::cmd_structure(st, std::cout, std::cerr);
  return dagtune::cmd_report(rep, std::cout, std::cerr);
}
