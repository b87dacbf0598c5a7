#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dagtune/expr.hpp"
#include "dagtune/param_space.hpp"
#include "dagtune/trace_store.hpp"

namespace dagtune {

struct EvalResult {
  bool ok = true;
  RawMetrics metrics;
  std::map<std::string, double> objectives;
  std::string error;
};

/// The system under tuning: one configuration in, metrics and objectives out.
class Environment {
 public:
  virtual ~Environment() = default;
  virtual EvalResult evaluate(const Configuration& cfg) = 0;
};

/// Wraps a callable; used for tests and small experiments.
class FunctionEnv : public Environment {
 public:
  using Fn = std::function<EvalResult(const Configuration&)>;
  explicit FunctionEnv(Fn fn) : fn_(std::move(fn)) {}
  EvalResult evaluate(const Configuration& cfg) override { return fn_(cfg); }

 private:
  Fn fn_;
};

struct BuiltinInfo {
  std::string name;
  ParamSpace space;
  std::string objective;
  bool maximize = false;
  // Summarizer depth that recovers the metric groups.
  int grouping_depth = 1;
  Configuration default_config;
  std::optional<double> optimum_value;
  std::optional<Configuration> optimum;
};

/// Ten parameters in [0, 1] split into a latency half and a power half:
///   latency = 1 + sum_{i<=5} (p_i - a_i)^2
///   power   = 1 + sum_{i>5}  (p_i - b_i)^2
///   edp     = power * latency^2
/// Emits 20 "sys.lat.*" and 20 "sys.pow.*" metrics, each a fixed affine image
/// of its latent plus Gaussian noise (std 0.01) seeded by (env seed, config).
/// The objective is computed from the latents, so edp = 1 exactly at (a, b).
class SyntheticEdpEnv : public Environment {
 public:
  static constexpr std::array<double, 5> kA = {0.2, 0.3, 0.15, 0.25, 0.1};
  static constexpr std::array<double, 5> kB = {0.8, 0.7, 0.85, 0.75, 0.9};
  static constexpr int kMetricsPerGroup = 20;
  static constexpr double kNoiseStd = 0.01;

  using Centers = std::array<double, 5>;

  explicit SyntheticEdpEnv(std::uint64_t seed = 0, Centers a = kA, Centers b = kB)
      : seed_(seed), a_(a), b_(b) {}

  EvalResult evaluate(const Configuration& cfg) override;

  static BuiltinInfo info();
  double latency(const Configuration& cfg) const;
  double power(const Configuration& cfg) const;

 private:
  std::uint64_t seed_;
  Centers a_;
  Centers b_;
};

std::vector<std::string> builtin_names();
BuiltinInfo builtin_info(const std::string& name);
std::unique_ptr<Environment> make_builtin(const std::string& name, std::uint64_t seed);

/// "name = value" per parameter in space order, newline-terminated. Floats
/// use the shortest round-trip form; categoricals are written verbatim.
std::string write_config_text(const Configuration& cfg, const ParamSpace& space);

struct ProcessEnvOptions {
  // Shell command; "{config}" becomes the config file path and "{metrics}"
  // (optional) a path the command may write extra log lines to.
  std::string command;
  std::string objective;
  // Objective expression over metric keys; the metric named by objective
  // is used when empty.
  std::string objective_expr;
};

/// Runs an external command per evaluation and parses its output with the
/// log annotation. A nonzero exit status or a missing objective is a failed
/// evaluation. Temporary files are removed on every path.
class ProcessEnv : public Environment {
 public:
  ProcessEnv(ParamSpace space, LogAnnotation annotation, ProcessEnvOptions opts);

  EvalResult evaluate(const Configuration& cfg) override;

 private:
  ParamSpace space_;
  LogAnnotation annotation_;
  ProcessEnvOptions opts_;
  std::optional<Expr> expr_;
};

}  // namespace dagtune
