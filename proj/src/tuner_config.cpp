#include "dagtune/tuner_config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dagtune/errors.hpp"

namespace dagtune {

namespace {

using json = nlohmann::ordered_json;

[[noreturn]] void field_error(const std::string& field, const std::string& what) {
  throw ValidationError("config field '" + field + "': " + what);
}

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) field_error(where, "must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) {
      field_error(where.empty() ? it.key() : where + "." + it.key(), "unknown field");
    }
  }
}

template <typename T>
T get_field(const json& j, const std::string& key, const std::string& path) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    field_error(path, j.contains(key) ? "has the wrong type" : "is required");
  }
}

template <typename T>
std::optional<T> opt_field(const json& j, const std::string& key, const std::string& path) {
  if (!j.contains(key)) return std::nullopt;
  return get_field<T>(j, key, path);
}

json space_to_json(const ParamSpace& space) {
  json arr = json::array();
  for (const auto& p : space.params()) {
    json e;
    e["name"] = p.name;
    if (const auto* c = std::get_if<Continuous>(&p.domain)) {
      e["type"] = "continuous";
      e["lo"] = c->lo;
      e["hi"] = c->hi;
    } else if (const auto* i = std::get_if<Integer>(&p.domain)) {
      e["type"] = "integer";
      e["lo"] = i->lo;
      e["hi"] = i->hi;
    } else {
      e["type"] = "categorical";
      e["choices"] = std::get<Categorical>(p.domain).choices;
    }
    arr.push_back(std::move(e));
  }
  return arr;
}

ParamSpace space_from_json(const json& j) {
  if (!j.is_array()) field_error("space", "must be a list of parameters");
  std::vector<ParamDef> defs;
  for (std::size_t k = 0; k < j.size(); ++k) {
    const auto& e = j[k];
    const std::string path = "space[" + std::to_string(k) + "]";
    check_keys(e, path, {"name", "type", "lo", "hi", "choices"});
    ParamDef def;
    def.name = get_field<std::string>(e, "name", path + ".name");
    const auto type = get_field<std::string>(e, "type", path + ".type");
    if (type == "continuous") {
      def.domain = Continuous{get_field<double>(e, "lo", path + ".lo"),
                              get_field<double>(e, "hi", path + ".hi")};
    } else if (type == "integer") {
      def.domain = Integer{get_field<std::int64_t>(e, "lo", path + ".lo"),
                           get_field<std::int64_t>(e, "hi", path + ".hi")};
    } else if (type == "categorical") {
      def.domain = Categorical{get_field<std::vector<std::string>>(e, "choices", path + ".choices")};
    } else {
      field_error(path + ".type", "must be continuous, integer or categorical");
    }
    defs.push_back(std::move(def));
  }
  try {
    return ParamSpace(std::move(defs));
  } catch (const ValidationError& e) {
    field_error("space", e.what());
  }
}

json value_to_json(const ParamValue& v) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
  return std::get<std::string>(v);
}

Configuration config_from_json(const json& j, const ParamSpace& space, const std::string& path) {
  if (!j.is_object()) field_error(path, "must be an object");
  Configuration cfg;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string p = path + "." + it.key();
    if (!space.contains(it.key())) field_error(p, "not a parameter of the space");
    const auto& dom = space.at(it.key()).domain;
    const auto& v = it.value();
    if (std::holds_alternative<Continuous>(dom)) {
      if (!v.is_number()) field_error(p, "must be a number");
      cfg.values[it.key()] = v.get<double>();
    } else if (std::holds_alternative<Integer>(dom)) {
      if (!v.is_number_integer()) field_error(p, "must be an integer");
      cfg.values[it.key()] = v.get<std::int64_t>();
    } else {
      if (!v.is_string()) field_error(p, "must be a string");
      cfg.values[it.key()] = v.get<std::string>();
    }
  }
  try {
    space.validate(cfg);
  } catch (const ValidationError& e) {
    field_error(path, e.what());
  }
  return cfg;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

json edges_to_json(const std::vector<NamedEdge>& edges) {
  json arr = json::array();
  for (const auto& [s, t] : edges) arr.push_back(json::array({s, t}));
  return arr;
}

std::vector<NamedEdge> edges_from_json(const json& j, const std::string& field) {
  if (!j.is_array()) throw ValidationError("prior field '" + field + "' must be a list");
  std::vector<NamedEdge> out;
  for (const auto& e : j) {
    if (!e.is_array() || e.size() != 2 || !e[0].is_string() || !e[1].is_string()) {
      throw ValidationError("prior field '" + field + "': each edge is a [source, target] pair");
    }
    const auto s = e[0].get<std::string>();
    const auto t = e[1].get<std::string>();
    if (s == t) throw ValidationError("prior field '" + field + "': self-edge on '" + s + "'");
    out.emplace_back(s, t);
  }
  return out;
}

}  // namespace

Schedule TunerConfig::resolved_schedule() const {
  if (!schedule.budget) throw ValidationError("config field 'schedule.budget': is required");
  Schedule s = Schedule::defaults(*schedule.budget, space.dimension());
  if (schedule.warmup) s.warmup = *schedule.warmup;
  if (schedule.relearn_every) s.relearn_every = *schedule.relearn_every;
  return s;
}

TunerConfig parse_tuner_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, "", {"schema_version", "space", "objective", "annotation", "grouping", "schedule",
                     "acquisition", "tuner", "kernel", "seed", "env", "output_dir",
                     "default_config", "prior"});
  const int version = get_field<int>(j, "schema_version", "schema_version");
  if (version != kConfigSchemaVersion) {
    field_error("schema_version", "unsupported version " + std::to_string(version));
  }

  TunerConfig cfg;
  cfg.space = space_from_json(j.contains("space") ? j["space"] : json());

  const auto& obj = j.contains("objective") ? j["objective"] : json();
  check_keys(obj, "objective", {"name", "direction", "expr"});
  cfg.objective.name = get_field<std::string>(obj, "name", "objective.name");
  if (cfg.objective.name.empty()) field_error("objective.name", "must not be empty");
  const auto dir = opt_field<std::string>(obj, "direction", "objective.direction").value_or("min");
  if (dir != "min" && dir != "max") field_error("objective.direction", "must be min or max");
  cfg.objective.maximize = dir == "max";
  cfg.objective.expr = opt_field<std::string>(obj, "expr", "objective.expr").value_or("");
  if (!cfg.objective.expr.empty()) {
    try {
      (void)Expr::parse(cfg.objective.expr);
    } catch (const ValidationError& e) {
      field_error("objective.expr", e.what());
    }
  }

  if (const auto a = opt_field<std::string>(j, "annotation", "annotation")) {
    cfg.annotation = *a;
  }
  try {
    LogAnnotation check(cfg.annotation);
  } catch (const ValidationError& e) {
    field_error("annotation", e.what());
  }

  if (j.contains("grouping")) {
    const auto& g = j["grouping"];
    check_keys(g, "grouping", {"depth", "min_variance"});
    cfg.grouping.depth = opt_field<int>(g, "depth", "grouping.depth").value_or(1);
    cfg.grouping.min_variance =
        opt_field<double>(g, "min_variance", "grouping.min_variance").value_or(1e-12);
    if (cfg.grouping.depth < 1) field_error("grouping.depth", "must be >= 1");
  }
  if (j.contains("schedule")) {
    const auto& s = j["schedule"];
    check_keys(s, "schedule", {"budget", "warmup", "relearn_every"});
    cfg.schedule.budget = opt_field<int>(s, "budget", "schedule.budget");
    cfg.schedule.warmup = opt_field<int>(s, "warmup", "schedule.warmup");
    cfg.schedule.relearn_every = opt_field<int>(s, "relearn_every", "schedule.relearn_every");
    if (cfg.schedule.budget && *cfg.schedule.budget < 1) field_error("schedule.budget", "must be >= 1");
    if (cfg.schedule.warmup && *cfg.schedule.warmup < 2) field_error("schedule.warmup", "must be >= 2");
    if (cfg.schedule.relearn_every && *cfg.schedule.relearn_every < 1) {
      field_error("schedule.relearn_every", "must be >= 1");
    }
  }
  if (j.contains("acquisition")) {
    const auto& a = j["acquisition"];
    check_keys(a, "acquisition", {"n_candidates", "mc_draws"});
    cfg.acquisition.n_candidates =
        opt_field<int>(a, "n_candidates", "acquisition.n_candidates").value_or(512);
    cfg.acquisition.mc_draws = opt_field<int>(a, "mc_draws", "acquisition.mc_draws").value_or(128);
    if (cfg.acquisition.n_candidates < 1) field_error("acquisition.n_candidates", "must be >= 1");
    if (cfg.acquisition.mc_draws < 1) field_error("acquisition.mc_draws", "must be >= 1");
  }
  if (const auto t = opt_field<std::string>(j, "tuner", "tuner")) {
    try {
      cfg.tuner = tuner_from_string(*t);
    } catch (const ValidationError& e) {
      field_error("tuner", e.what());
    }
  }
  if (const auto k = opt_field<std::string>(j, "kernel", "kernel")) {
    try {
      cfg.kernel = kernel_from_string(*k);
    } catch (const ValidationError& e) {
      field_error("kernel", e.what());
    }
  }
  cfg.seed = opt_field<std::uint64_t>(j, "seed", "seed").value_or(0);

  const auto& env = j.contains("env") ? j["env"] : json();
  check_keys(env, "env", {"kind", "builtin_name", "command"});
  const auto kind = get_field<std::string>(env, "kind", "env.kind");
  if (kind == "builtin") {
    cfg.env.kind = EnvSpec::Kind::Builtin;
    cfg.env.builtin_name = get_field<std::string>(env, "builtin_name", "env.builtin_name");
    if (env.contains("command")) field_error("env.command", "not allowed for a builtin env");
    try {
      const auto info = builtin_info(cfg.env.builtin_name);
      if (!(info.space == cfg.space)) field_error("space", "does not match builtin '" + info.name + "'");
    } catch (const ValidationError& e) {
      field_error("env.builtin_name", e.what());
    }
  } else if (kind == "process") {
    cfg.env.kind = EnvSpec::Kind::Process;
    cfg.env.command = get_field<std::string>(env, "command", "env.command");
    if (env.contains("builtin_name")) field_error("env.builtin_name", "not allowed for a process env");
    if (cfg.env.command.find("{config}") == std::string::npos) {
      field_error("env.command", "must contain the {config} placeholder");
    }
  } else {
    field_error("env.kind", "must be builtin or process");
  }

  cfg.output_dir = opt_field<std::string>(j, "output_dir", "output_dir").value_or("");
  if (j.contains("default_config")) {
    cfg.default_config = config_from_json(j["default_config"], cfg.space, "default_config");
  }
  cfg.prior = opt_field<std::string>(j, "prior", "prior").value_or("");
  return cfg;
}

std::string serialize_tuner_config(const TunerConfig& cfg) {
  json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["space"] = space_to_json(cfg.space);
  j["objective"]["name"] = cfg.objective.name;
  j["objective"]["direction"] = cfg.objective.maximize ? "max" : "min";
  if (!cfg.objective.expr.empty()) j["objective"]["expr"] = cfg.objective.expr;
  j["annotation"] = cfg.annotation;
  j["grouping"]["depth"] = cfg.grouping.depth;
  j["grouping"]["min_variance"] = cfg.grouping.min_variance;
  j["schedule"] = json::object();
  if (cfg.schedule.budget) j["schedule"]["budget"] = *cfg.schedule.budget;
  if (cfg.schedule.warmup) j["schedule"]["warmup"] = *cfg.schedule.warmup;
  if (cfg.schedule.relearn_every) j["schedule"]["relearn_every"] = *cfg.schedule.relearn_every;
  j["acquisition"]["n_candidates"] = cfg.acquisition.n_candidates;
  j["acquisition"]["mc_draws"] = cfg.acquisition.mc_draws;
  j["tuner"] = to_string(cfg.tuner);
  j["kernel"] = to_string(cfg.kernel);
  j["seed"] = cfg.seed;
  if (cfg.env.kind == EnvSpec::Kind::Builtin) {
    j["env"]["kind"] = "builtin";
    j["env"]["builtin_name"] = cfg.env.builtin_name;
  } else {
    j["env"]["kind"] = "process";
    j["env"]["command"] = cfg.env.command;
  }
  if (!cfg.output_dir.empty()) j["output_dir"] = cfg.output_dir;
  if (cfg.default_config) {
    json d = json::object();
    for (const auto& p : cfg.space.params()) {
      if (const auto it = cfg.default_config->values.find(p.name); it != cfg.default_config->values.end()) {
        d[p.name] = value_to_json(it->second);
      }
    }
    j["default_config"] = std::move(d);
  }
  if (!cfg.prior.empty()) j["prior"] = cfg.prior;
  return j.dump(2) + "\n";
}

TunerConfig load_tuner_config(const std::filesystem::path& path) {
  return parse_tuner_config(read_file(path));
}

TunerConfig builtin_config(const std::string& name) {
  const auto info = builtin_info(name);
  TunerConfig cfg;
  cfg.space = info.space;
  cfg.objective.name = info.objective;
  cfg.objective.maximize = info.maximize;
  cfg.grouping.depth = info.grouping_depth;
  cfg.schedule.budget = 50;
  cfg.env.kind = EnvSpec::Kind::Builtin;
  cfg.env.builtin_name = info.name;
  cfg.default_config = info.default_config;
  return cfg;
}

ExpertPrior parse_expert_prior(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("prior is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ValidationError("prior must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    static const std::set<std::string> allowed = {"schema_version", "edges", "tabu_edges", "models"};
    if (!allowed.count(it.key())) throw ValidationError("prior field '" + it.key() + "': unknown field");
  }
  if (!j.contains("schema_version") || !j["schema_version"].is_number_integer() ||
      j["schema_version"].get<int>() != kConfigSchemaVersion) {
    throw ValidationError("prior field 'schema_version': must be " +
                          std::to_string(kConfigSchemaVersion));
  }
  ExpertPrior prior;
  if (j.contains("edges")) prior.edges = edges_from_json(j["edges"], "edges");
  if (j.contains("tabu_edges")) prior.tabu_edges = edges_from_json(j["tabu_edges"], "tabu_edges");

  // Expert edges must be acyclic on their own.
  std::vector<DagNode> names;
  const auto add = [&](const std::string& n) {
    for (const auto& x : names) {
      if (x.name == n) return;
    }
    names.push_back({n, NodeRole::MetricGroup});
  };
  for (const auto& [s, t] : prior.edges) {
    add(s);
    add(t);
  }
  DagStructure g(names);
  for (const auto& [s, t] : prior.edges) g.add_edge({g.require(s), g.require(t), 0.0, Provenance::Expert});
  if (!g.is_acyclic()) throw ValidationError("prior field 'edges': edges form a cycle");

  if (j.contains("models")) {
    const auto& m = j["models"];
    if (!m.is_object()) throw ValidationError("prior field 'models' must be an object");
    for (auto it = m.begin(); it != m.end(); ++it) {
      const std::string path = "models." + it.key();
      const auto& e = it.value();
      if (!e.is_object()) throw ValidationError("prior field '" + path + "' must be an object");
      ModelSpec spec;
      const auto model = e.value("model", std::string("gp"));
      if (model == "gp") {
        spec.kind = ModelSpec::Kind::Gp;
        if (e.contains("kernel")) spec.kernel = kernel_from_string(e["kernel"].get<std::string>());
      } else if (model == "expr") {
        spec.kind = ModelSpec::Kind::Expr;
        if (!e.contains("expression") || !e["expression"].is_string()) {
          throw ValidationError("prior field '" + path + ".expression' is required for expr models");
        }
        spec.expression = e["expression"].get<std::string>();
        (void)Expr::parse(spec.expression);
      } else {
        throw ValidationError("prior field '" + path + ".model' must be gp or expr");
      }
      prior.models.emplace(it.key(), spec);
    }
  }
  return prior;
}

std::string serialize_expert_prior(const ExpertPrior& prior) {
  json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["edges"] = edges_to_json(prior.edges);
  j["tabu_edges"] = edges_to_json(prior.tabu_edges);
  j["models"] = json::object();
  for (const auto& [name, spec] : prior.models) {
    json e;
    if (spec.kind == ModelSpec::Kind::Gp) {
      e["model"] = "gp";
      e["kernel"] = to_string(spec.kernel);
    } else {
      e["model"] = "expr";
      e["expression"] = spec.expression;
    }
    j["models"][name] = std::move(e);
  }
  return j.dump(2) + "\n";
}

ExpertPrior load_expert_prior(const std::filesystem::path& path) {
  return parse_expert_prior(read_file(path));
}

std::unique_ptr<Environment> make_environment(const TunerConfig& cfg) {
  if (cfg.env.kind == EnvSpec::Kind::Builtin) return make_builtin(cfg.env.builtin_name, cfg.seed);
  ProcessEnvOptions po;
  po.command = cfg.env.command;
  po.objective = cfg.objective.name;
  po.objective_expr = cfg.objective.expr;
  return std::make_unique<ProcessEnv>(cfg.space, LogAnnotation(cfg.annotation), po);
}

LoopOptions loop_options(const TunerConfig& cfg, const ExpertPrior& prior) {
  LoopOptions o;
  o.tuner = cfg.tuner;
  o.objective = cfg.objective.name;
  o.maximize = cfg.objective.maximize;
  o.schedule = cfg.resolved_schedule();
  o.acquisition = cfg.acquisition;
  o.grouping = cfg.grouping;
  o.prior = prior;
  o.kernel = cfg.kernel;
  o.seed = cfg.seed;
  return o;
}

}  // namespace dagtune
