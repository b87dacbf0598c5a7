#include "dagtune/commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "dagtune/errors.hpp"
#include "dagtune/optimizer.hpp"
#include "dagtune/tuner_config.hpp"

namespace dagtune {

namespace fs = std::filesystem;

namespace {

void write_file(const fs::path& path, const std::string& text) {
  const auto tmp = fs::path(path.string() + ".tmp");
  {
    std::ofstream f(tmp, std::ios::binary);
    f << text;
    if (!f) throw Error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::string round_file_name(std::int64_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "round_%04lld.json", static_cast<long long>(step));
  return buf;
}

fs::path resolve_against(const fs::path& p, const fs::path& base) {
  return p.is_absolute() ? p : base / p;
}

std::string pick_objective(const std::vector<TraceRecord>& records, const std::optional<TunerConfig>& cfg) {
  if (cfg) return cfg->objective.name;
  std::set<std::string> names;
  for (const auto& r : records) {
    for (const auto& [k, v] : r.objectives) names.insert(k);
  }
  if (names.size() != 1) {
    throw ValidationError("cannot tell which objective to report; pass --config");
  }
  return *names.begin();
}

}  // namespace

int cmd_run(const RunArgs& args, std::ostream& out, std::ostream& err) {
  const auto t0 = std::chrono::steady_clock::now();
  TunerConfig cfg;
  ExpertPrior prior;
  fs::path dir;
  try {
    cfg = load_tuner_config(args.config);
    if (args.budget) cfg.schedule.budget = *args.budget;
    if (args.seed) cfg.seed = *args.seed;
    if (args.tuner) cfg.tuner = tuner_from_string(*args.tuner);
    if (args.prior) cfg.prior = fs::absolute(*args.prior).string();
    if (!cfg.prior.empty()) {
      const auto p = resolve_against(cfg.prior, fs::absolute(args.config).parent_path());
      prior = load_expert_prior(p);
      cfg.prior = p.string();
    }
    if (!cfg.schedule.budget) throw ValidationError("config field 'schedule.budget': is required");
    cfg.resolved_schedule().validate();
    if (args.out) {
      dir = *args.out;
    } else if (!cfg.output_dir.empty()) {
      dir = resolve_against(cfg.output_dir, fs::absolute(args.config).parent_path());
    } else {
      dir = fs::path("runs") / (cfg.env.kind == EnvSpec::Kind::Builtin ? cfg.env.builtin_name : "run");
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }

  try {
    fs::create_directories(dir);
    const auto trace_path = dir / "trace.jsonl";
    const auto cfg_path = dir / "config.json";
    if (args.fresh) {
      fs::remove(trace_path);
      fs::remove_all(dir / "structure");
      fs::remove(dir / "structure.dot");
    }
    const std::string cfg_text = serialize_tuner_config(cfg);
    if (fs::exists(trace_path) && fs::exists(cfg_path) && read_text(cfg_path) != cfg_text) {
      err << "error: " << dir.string()
          << " holds a run with a different configuration; use --fresh or another --out\n";
      return kExitInput;
    }
    write_file(cfg_path, cfg_text);
    fs::create_directories(dir / "structure");

    TraceStore store = TraceStore::load(trace_path);
    if (!store.empty()) out << "resuming at step " << store.size() << "\n";
    auto env = make_environment(cfg);
    LoopOptions opts = loop_options(cfg, prior);
    opts.stop_after = args.stop_after;
    opts.on_structure = [&](const StructureRound& r) {
      write_file(dir / "structure" / round_file_name(r.step), structure_to_json(r.structure));
      write_file(dir / "structure.dot", export_dot(r.structure));
    };
    LoopResult res;
    try {
      res = run_loop(*env, cfg.space, opts, store);
    } catch (const EnvAbortError& e) {
      err << "error: " << e.what() << "\n";
      return kExitEnvAbort;
    }
    if (res.last_structure) write_file(dir / "structure.dot", export_dot(res.last_structure->structure));

    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto best = best_record(store.records(), cfg.objective.name, cfg.objective.maximize);
    out << "summary: ";
    if (best) {
      const auto& r = store.records()[*best];
      out << "best " << cfg.objective.name << "=" << format_double(r.objectives.at(cfg.objective.name))
          << " at step " << r.step;
    } else {
      out << "no successful evaluation";
    }
    out << "; " << store.size() << " records; wall " << format_double(wall) << " s\n";
    return kExitOk;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const CorruptionError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

int cmd_structure(const StructureArgs& args, std::ostream& out, std::ostream& err) {
  try {
    const auto cfg_path = args.config ? *args.config : args.trace.parent_path() / "config.json";
    if (!fs::exists(cfg_path)) {
      throw ValidationError("no config at " + cfg_path.string() + "; pass --config");
    }
    const auto cfg = load_tuner_config(cfg_path);
    ExpertPrior prior;
    if (!cfg.prior.empty()) {
      prior = load_expert_prior(resolve_against(cfg.prior, fs::absolute(cfg_path).parent_path()));
    }
    if (!fs::exists(args.trace)) throw ValidationError("no trace at " + args.trace.string());
    const auto store = TraceStore::load(args.trace);
    const auto usable = std::count_if(store.records().begin(), store.records().end(),
                                      [](const TraceRecord& r) { return !r.failed(); });
    if (usable < 2) throw ValidationError("trace has fewer than 2 successful records");

    TunerConfig structured = cfg;
    structured.tuner = TunerKind::Structured;
    if (!structured.schedule.budget) structured.schedule.budget = static_cast<int>(store.size());
    LoopOptions opts = loop_options(structured, prior);
    SummaryOptions so;
    so.grouping = cfg.grouping;
    so.maximize = cfg.objective.maximize;
    const auto table = summarize(store, cfg.space, so);
    const auto round = build_structure(table, opts, static_cast<std::int64_t>(store.size()));
    const auto dot = export_dot(round.structure);
    if (args.out) {
      write_file(*args.out, dot);
    } else {
      out << dot;
    }
    out << "max_dimension " << max_dimension(round.structure) << "\n";
    return kExitOk;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const CorruptionError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

int cmd_report(const ReportArgs& args, std::ostream& out, std::ostream& err) {
  try {
    if (args.traces.empty() && args.baseline_traces.empty()) {
      throw ValidationError("report needs at least one --trace");
    }
    std::optional<TunerConfig> cfg;
    if (args.config) cfg = load_tuner_config(*args.config);
    bool maximize = cfg ? cfg->objective.maximize : false;
    if (args.direction) {
      if (*args.direction != "min" && *args.direction != "max") {
        throw ValidationError("--direction must be min or max");
      }
      maximize = *args.direction == "max";
    }
    std::optional<double> default_obj = args.default_objective;
    if (!default_obj && cfg && cfg->default_config && cfg->env.kind == EnvSpec::Kind::Builtin) {
      auto env = make_environment(*cfg);
      const auto ev = env->evaluate(*cfg->default_config);
      if (ev.ok && ev.objectives.count(cfg->objective.name)) {
        default_obj = ev.objectives.at(cfg->objective.name);
      }
    }

    std::ostringstream csv;
    csv << "trace,step,best_so_far,improvement_over_default_x\n";
    const auto emit = [&](const fs::path& path, const std::string& label) {
      if (!fs::exists(path)) throw ValidationError("no trace at " + path.string());
      const auto store = TraceStore::load(path);
      const auto objective = pick_objective(store.records(), cfg);
      std::optional<double> best;
      for (const auto& r : store.records()) {
        const auto it = r.objectives.find(objective);
        if (it != r.objectives.end() && std::isfinite(it->second)) {
          if (!best || (maximize ? it->second > *best : it->second < *best)) best = it->second;
        }
        csv << label << "," << r.step << ",";
        if (best) csv << format_double(*best);
        csv << ",";
        if (best && default_obj && *best != 0.0) {
          csv << format_double(maximize ? *best / *default_obj : *default_obj / *best);
        }
        csv << "\n";
      }
    };
    for (const auto& t : args.traces) emit(t, t.string());
    for (const auto& t : args.baseline_traces) emit(t, "baseline:" + t.string());
    if (args.out) {
      write_file(*args.out, csv.str());
    } else {
      out << csv.str();
    }
    return kExitOk;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const CorruptionError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace dagtune
