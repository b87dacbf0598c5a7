#include "dagtune/envs.hpp"

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "dagtune/errors.hpp"
#include "dagtune/rng.hpp"

namespace dagtune {

namespace {

double get_double(const Configuration& cfg, const std::string& name) {
  const auto it = cfg.values.find(name);
  if (it == cfg.values.end()) throw ValidationError("missing parameter '" + name + "'");
  if (const auto* d = std::get_if<double>(&it->second)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&it->second)) return static_cast<double>(*i);
  throw ValidationError("parameter '" + name + "' is not numeric");
}

std::string param_name(int i) { return "p" + std::to_string(i); }

class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "dagtune-XXXXXX").string();
    if (!::mkdtemp(tmpl.data())) throw Error("cannot create a temporary directory");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

std::string shell_quote(const std::string& s) {
  std::string out = "'";
  for (const char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  return out + "'";
}

void replace_all(std::string& s, const std::string& from, const std::string& to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

}  // namespace

double SyntheticEdpEnv::latency(const Configuration& cfg) const {
  double v = 1.0;
  for (int i = 0; i < 5; ++i) {
    const double d = get_double(cfg, param_name(i + 1)) - a_[static_cast<std::size_t>(i)];
    v += d * d;
  }
  return v;
}

double SyntheticEdpEnv::power(const Configuration& cfg) const {
  double v = 1.0;
  for (int i = 0; i < 5; ++i) {
    const double d = get_double(cfg, param_name(i + 6)) - b_[static_cast<std::size_t>(i)];
    v += d * d;
  }
  return v;
}

EvalResult SyntheticEdpEnv::evaluate(const Configuration& cfg) {
  const double lat = latency(cfg);
  const double pow = power(cfg);
  std::string key;
  for (const auto& [name, value] : cfg.values) key += name + "=" + to_string(value) + ";";
  Rng rng(derive_seed(seed_, stable_hash(key)));
  std::normal_distribution<double> noise(0.0, kNoiseStd);

  EvalResult r;
  char buf[32];
  for (int k = 0; k < kMetricsPerGroup; ++k) {
    std::snprintf(buf, sizeof buf, "m%02d", k);
    const double slope = 0.5 + 0.05 * k;
    const double offset = 0.1 * k;
    r.metrics["sys.lat." + std::string(buf)] = offset + slope * lat + noise(rng);
    r.metrics["sys.pow." + std::string(buf)] = offset + slope * pow + noise(rng);
  }
  r.objectives["edp"] = pow * lat * lat;
  return r;
}

BuiltinInfo SyntheticEdpEnv::info() {
  BuiltinInfo b;
  b.name = "synthetic-edp";
  std::vector<ParamDef> defs;
  for (int i = 1; i <= 10; ++i) defs.push_back({param_name(i), Continuous{0.0, 1.0}});
  b.space = ParamSpace(defs);
  b.objective = "edp";
  b.grouping_depth = 2;
  Configuration opt;
  for (int i = 1; i <= 10; ++i) {
    b.default_config.values[param_name(i)] = 0.5;
    opt.values[param_name(i)] = i <= 5 ? kA[static_cast<std::size_t>(i - 1)]
                                       : kB[static_cast<std::size_t>(i - 6)];
  }
  b.optimum = opt;
  b.optimum_value = 1.0;
  return b;
}

std::vector<std::string> builtin_names() { return {"synthetic-edp"}; }

BuiltinInfo builtin_info(const std::string& name) {
  if (name == "synthetic-edp") return SyntheticEdpEnv::info();
  throw ValidationError("unknown builtin environment '" + name + "'");
}

std::unique_ptr<Environment> make_builtin(const std::string& name, std::uint64_t seed) {
  if (name == "synthetic-edp") return std::make_unique<SyntheticEdpEnv>(seed);
  throw ValidationError("unknown builtin environment '" + name + "'");
}

std::string write_config_text(const Configuration& cfg, const ParamSpace& space) {
  space.validate(cfg);
  std::string out;
  for (const auto& p : space.params()) out += p.name + " = " + to_string(cfg.values.at(p.name)) + "\n";
  return out;
}

ProcessEnv::ProcessEnv(ParamSpace space, LogAnnotation annotation, ProcessEnvOptions opts)
    : space_(std::move(space)), annotation_(std::move(annotation)), opts_(std::move(opts)) {
  if (opts_.command.find("{config}") == std::string::npos) {
    throw ValidationError("env.command must contain the {config} placeholder");
  }
  if (!opts_.objective_expr.empty()) expr_ = Expr::parse(opts_.objective_expr);
}

EvalResult ProcessEnv::evaluate(const Configuration& cfg) {
  EvalResult r;
  TempDir dir;
  const auto cfg_path = dir.path() / "config.txt";
  const auto metrics_path = dir.path() / "metrics.log";
  {
    std::ofstream f(cfg_path);
    f << write_config_text(cfg, space_);
    if (!f) throw Error("cannot write " + cfg_path.string());
  }
  std::string cmd = opts_.command;
  replace_all(cmd, "{config}", shell_quote(cfg_path.string()));
  replace_all(cmd, "{metrics}", shell_quote(metrics_path.string()));

  std::string output;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) {
    r.ok = false;
    r.error = "cannot start command";
    return r;
  }
  char buf[4096];
  std::size_t n = 0;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) output.append(buf, n);
  const int status = ::pclose(pipe);
  if (status == -1 || !WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    r.ok = false;
    r.error = "command failed with status " +
              std::to_string(status != -1 && WIFEXITED(status) ? WEXITSTATUS(status) : -1);
    return r;
  }
  if (std::ifstream mf(metrics_path); mf) {
    std::ostringstream ss;
    ss << mf.rdbuf();
    output += "\n" + ss.str();
  }
  r.metrics = parse_log(output, annotation_);

  double obj = 0.0;
  if (expr_) {
    try {
      obj = expr_->evaluate(r.metrics);
    } catch (const ValidationError& e) {
      r.ok = false;
      r.error = e.what();
      return r;
    }
  } else {
    const auto it = r.metrics.find(opts_.objective);
    if (it == r.metrics.end()) {
      r.ok = false;
      r.error = "objective metric '" + opts_.objective + "' missing from output";
      return r;
    }
    obj = it->second;
  }
  r.metrics.erase(opts_.objective);
  if (!std::isfinite(obj)) {
    r.ok = false;
    r.error = "objective is not finite";
    return r;
  }
  r.objectives[opts_.objective] = obj;
  return r;
}

}  // namespace dagtune
