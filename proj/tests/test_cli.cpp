#include <doctest.h>

#include <sstream>

#include <sys/wait.h>

#include "dagtune/commands.hpp"
#include "dagtune/trace_store.hpp"
#include "dagtune/tuner_config.hpp"
#include "support.hpp"

using namespace dagtune;
namespace fs = std::filesystem;

namespace {

// Small synthetic-edp config: cheap acquisition so each step is fast.
fs::path write_small_config(const testing::ScratchDir& dir, int budget = 8) {
  auto cfg = builtin_config("synthetic-edp");
  cfg.schedule.budget = budget;
  cfg.acquisition = {64, 16};
  cfg.seed = 3;
  const auto path = dir / "cfg.json";
  testing::spit(path, serialize_tuner_config(cfg));
  return path;
}

int run_binary(const std::string& args, std::string* out = nullptr) {
  testing::ScratchDir capture;
  const auto log = capture / "out.txt";
  const std::string cmd = std::string(DAGTUNE_BINARY) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  if (out) *out = testing::slurp(log);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream is(text);
  for (std::string l; std::getline(is, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("run writes the trace, config and structure files") {
  testing::ScratchDir dir;
  RunArgs args;
  args.config = write_small_config(dir);
  args.out = dir / "run";
  std::ostringstream out, err;
  REQUIRE(cmd_run(args, out, err) == kExitOk);
  CHECK(out.str().find("summary: best edp=") != std::string::npos);
  CHECK(out.str().find("8 records") != std::string::npos);
  CHECK(TraceStore::load(dir / "run" / "trace.jsonl").size() == 8);
  CHECK(fs::exists(dir / "run" / "config.json"));
  CHECK(fs::exists(dir / "run" / "structure.dot"));
  CHECK(fs::exists(dir / "run" / "structure" / "round_0005.json"));

  std::ostringstream again;
  CHECK(cmd_run(args, again, err) == kExitOk);
  CHECK(again.str().find("resuming at step 8") != std::string::npos);

  RunArgs other = args;
  other.seed = 99;
  std::ostringstream e2;
  CHECK(cmd_run(other, again, e2) == kExitInput);
  CHECK(e2.str().find("different configuration") != std::string::npos);
  other.fresh = true;
  CHECK(cmd_run(other, again, e2) == kExitOk);
}

TEST_CASE("run stops early and resumes to the same trace") {
  testing::ScratchDir dir;
  const auto cfg = write_small_config(dir, 9);
  RunArgs full;
  full.config = cfg;
  full.out = dir / "full";
  RunArgs part = full;
  part.out = dir / "part";
  part.stop_after = 6;
  std::ostringstream out, err;
  REQUIRE(cmd_run(full, out, err) == kExitOk);
  REQUIRE(cmd_run(part, out, err) == kExitOk);
  CHECK(TraceStore::load(dir / "part" / "trace.jsonl").size() == 6);
  part.stop_after.reset();
  REQUIRE(cmd_run(part, out, err) == kExitOk);
  const auto a = TraceStore::load(dir / "full" / "trace.jsonl");
  const auto b = TraceStore::load(dir / "part" / "trace.jsonl");
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.records()[i].config == b.records()[i].config);
}

TEST_CASE("structure relearns from a stored trace") {
  testing::ScratchDir dir;
  RunArgs args;
  args.config = write_small_config(dir);
  args.out = dir / "run";
  std::ostringstream out, err;
  REQUIRE(cmd_run(args, out, err) == kExitOk);

  StructureArgs st;
  st.trace = dir / "run" / "trace.jsonl";
  std::ostringstream dot;
  REQUIRE(cmd_structure(st, dot, err) == kExitOk);
  CHECK(dot.str().rfind("digraph", 0) == 0);
  CHECK(dot.str().find("max_dimension ") != std::string::npos);

  testing::spit(dir / "run" / "empty.jsonl", "");
  st.trace = dir / "run" / "empty.jsonl";
  std::ostringstream e2;
  CHECK(cmd_structure(st, dot, e2) == kExitInput);
  st.trace = dir / "run" / "absent.jsonl";
  CHECK(cmd_structure(st, dot, e2) == kExitInput);
}

TEST_CASE("report prints best-so-far curves") {
  testing::ScratchDir dir;
  const ParamSpace space({{"x", Continuous{0, 1}}});
  TraceStore t(dir / "a.jsonl"), b(dir / "b.jsonl");
  const double values[] = {4.0, 5.0, 2.0};
  for (int i = 0; i < 3; ++i) {
    TraceRecord r;
    r.step = i;
    r.config = space.decode(std::vector<double>{0.5});
    if (i != 1) r.objectives["edp"] = values[i];
    t.append(r);
    if (i < 2) b.append(r);
  }
  ReportArgs rep;
  rep.traces = {dir / "a.jsonl"};
  rep.baseline_traces = {dir / "b.jsonl"};
  rep.default_objective = 8.0;
  std::ostringstream out, err;
  REQUIRE(cmd_report(rep, out, err) == kExitOk);
  const auto lines = lines_of(out.str());
  REQUIRE(lines.size() == 6);
  CHECK(lines[0] == "trace,step,best_so_far,improvement_over_default_x");
  const std::string a = (dir / "a.jsonl").string();
  const std::string bl = "baseline:" + (dir / "b.jsonl").string();
  CHECK(lines[1] == a + ",0,4,2");
  CHECK(lines[2] == a + ",1,4,2");
  CHECK(lines[3] == a + ",2,2,4");
  CHECK(lines[4] == bl + ",0,4,2");
  CHECK(lines[5] == bl + ",1,4,2");

  rep.direction = "max";
  std::ostringstream mx;
  REQUIRE(cmd_report(rep, mx, err) == kExitOk);
  CHECK(lines_of(mx.str())[3] == a + ",2,4,0.5");

  ReportArgs none;
  CHECK(cmd_report(none, out, err) == kExitInput);
}

TEST_CASE("report takes the default objective from a builtin config") {
  testing::ScratchDir dir;
  const auto cfg = write_small_config(dir);
  const ParamSpace space = builtin_config("synthetic-edp").space;
  TraceStore t(dir / "t.jsonl");
  TraceRecord r;
  r.config = space.decode(std::vector<double>(10, 0.5));
  r.objectives["edp"] = 1.0;
  t.append(r);
  ReportArgs rep;
  rep.traces = {dir / "t.jsonl"};
  rep.config = cfg;
  std::ostringstream out, err;
  REQUIRE(cmd_report(rep, out, err) == kExitOk);
  const auto row = lines_of(out.str())[1];
  const double lat = 1.0 + 0.09 + 0.04 + 0.1225 + 0.0625 + 0.16;
  const double pow = 1.0 + 0.09 + 0.04 + 0.1225 + 0.0625 + 0.16;
  const double default_edp = pow * lat * lat;
  const double shown = std::stod(row.substr(row.rfind(',') + 1));
  CHECK(shown == doctest::Approx(default_edp).epsilon(1e-8));
}

TEST_CASE("binary exit codes") {
  testing::ScratchDir dir;
  std::string out;
  CHECK(run_binary("run " + (dir / "missing.json").string(), &out) == kExitInput);
  CHECK(run_binary("frobnicate", &out) == kExitInput);
  CHECK(run_binary("", &out) == kExitInput);

  auto text = serialize_tuner_config(builtin_config("synthetic-edp"));
  const auto pos = text.find("\"annotation\": ");
  REQUIRE(pos != std::string::npos);
  const auto end = text.find('\n', pos);
  text.replace(pos, end - pos, "\"annotation\": \"(unclosed\",");
  testing::spit(dir / "bad.json", text);
  CHECK(run_binary("run " + (dir / "bad.json").string(), &out) == kExitInput);
  CHECK(out.find("annotation") != std::string::npos);

  auto proc = builtin_config("synthetic-edp");
  proc.env.kind = EnvSpec::Kind::Process;
  proc.env.builtin_name.clear();
  proc.env.command = "false {config}";
  proc.default_config.reset();
  testing::spit(dir / "proc.json", serialize_tuner_config(proc));
  CHECK(run_binary("run " + (dir / "proc.json").string() + " --out " + (dir / "p").string(), &out) ==
        kExitEnvAbort);
  CHECK(TraceStore::load(dir / "p" / "trace.jsonl").size() == 3);

  CHECK(run_binary("structure --trace " + (dir / "nothing.jsonl").string(), &out) == kExitInput);
  CHECK(run_binary("--log-level info report --trace " + (dir / "p" / "trace.jsonl").string() +
                       " --config " + (dir / "proc.json").string(),
                   &out) == kExitOk);
  CHECK(out.rfind("trace,step,best_so_far,improvement_over_default_x", 0) == 0);
}
