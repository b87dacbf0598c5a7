#include "dagtune/trace_store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>
#include <spdlog/spdlog.h>

#include "dagtune/errors.hpp"

namespace dagtune {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

MetricKeyPath MetricKeyPath::parse(std::string_view key) {
  MetricKeyPath out;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const auto seg = key.substr(start, dot == std::string_view::npos ? key.size() - start
                                                                       : dot - start);
    if (seg.empty()) {
      throw ValidationError("metric key '" + std::string(key) + "' has an empty segment");
    }
    out.segments.emplace_back(seg);
    if (dot == std::string_view::npos) break;
    start = dot + 1;
  }
  return out;
}

std::string MetricKeyPath::str() const {
  std::string s;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    if (i) s += '.';
    s += segments[i];
  }
  return s;
}

LogAnnotation::LogAnnotation(std::string pattern) : pattern_(std::move(pattern)) {
  try {
    regex_ = std::regex(pattern_, std::regex::ECMAScript);
  } catch (const std::regex_error& e) {
    throw ValidationError("annotation: invalid regex '" + pattern_ + "': " + e.what());
  }
  if (regex_.mark_count() != 2) {
    throw ValidationError("annotation: regex must have exactly 2 capture groups (key, value), got " +
                          std::to_string(regex_.mark_count()));
  }
}

RawMetrics parse_log(std::string_view text, const LogAnnotation& ann, LogParseStats* stats) {
  LogParseStats local;
  RawMetrics out;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string line(text.substr(pos, eol - pos));
    pos = eol + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();

    std::smatch m;
    if (!std::regex_search(line, m, ann.regex())) continue;
    const std::string key = m[1].str();
    const std::string val = m[2].str();
    try {
      (void)MetricKeyPath::parse(key);
    } catch (const ValidationError&) {
      continue;
    }
    double v = 0.0;
    const auto res = std::from_chars(val.data(), val.data() + val.size(), v);
    if (res.ec != std::errc() || res.ptr != val.data() + val.size()) {
      ++local.unparsable_values;
      continue;
    }
    if (!std::isfinite(v)) {
      ++local.dropped_non_finite;
      continue;
    }
    ++local.matched_lines;
    out[key] = v;
  }
  if (local.matched_lines == 0) {
    spdlog::warn("parse_log: no line matched annotation '{}'", ann.pattern());
  }
  if (local.dropped_non_finite > 0) {
    spdlog::warn("parse_log: dropped {} non-finite metric values", local.dropped_non_finite);
  }
  if (stats) *stats = local;
  return out;
}

namespace {

ojson value_to_json(const ParamValue& v) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
  return std::get<std::string>(v);
}

ParamValue value_from_json(const ojson& j) {
  if (j.is_number_float()) return j.get<double>();
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_string()) return j.get<std::string>();
  throw CorruptionError("config value must be a number or string");
}

std::map<std::string, double> finite_map(const ojson& j, const char* field) {
  if (!j.is_object()) throw CorruptionError(std::string("field '") + field + "' must be an object");
  std::map<std::string, double> out;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!it.value().is_number()) {
      throw CorruptionError(std::string("field '") + field + "' holds a non-number");
    }
    out[it.key()] = it.value().get<double>();
  }
  return out;
}

}  // namespace

std::string serialize_record(const TraceRecord& rec) {
  ojson j;
  j["step"] = rec.step;
  ojson cfg = ojson::object();
  for (const auto& [k, v] : rec.config.values) cfg[k] = value_to_json(v);
  j["config"] = std::move(cfg);
  j["metrics"] = ojson::object();
  for (const auto& [k, v] : rec.metrics) j["metrics"][k] = v;
  j["objectives"] = ojson::object();
  for (const auto& [k, v] : rec.objectives) j["objectives"][k] = v;
  j["wall_seconds"] = rec.wall_seconds;
  j["seed"] = rec.seed;
  return j.dump();
}

TraceRecord deserialize_record(std::string_view line) {
  ojson j;
  try {
    j = ojson::parse(line);
  } catch (const ojson::exception& e) {
    throw CorruptionError(std::string("unparsable trace line: ") + e.what());
  }
  try {
    TraceRecord rec;
    rec.step = j.at("step").get<std::int64_t>();
    const auto& cfg = j.at("config");
    if (!cfg.is_object()) throw CorruptionError("field 'config' must be an object");
    for (auto it = cfg.begin(); it != cfg.end(); ++it) {
      rec.config.values.emplace(it.key(), value_from_json(it.value()));
    }
    rec.metrics = finite_map(j.at("metrics"), "metrics");
    rec.objectives = finite_map(j.at("objectives"), "objectives");
    rec.wall_seconds = j.at("wall_seconds").get<double>();
    rec.seed = j.at("seed").get<std::uint64_t>();
    return rec;
  } catch (const ojson::exception& e) {
    throw CorruptionError(std::string("malformed trace record: ") + e.what());
  }
}

TraceStore TraceStore::load(const fs::path& path) {
  TraceStore store(path);
  std::error_code ec;
  if (!fs::exists(path, ec)) return store;

  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open trace '" + path.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string data = buf.str();

  struct Line {
    std::size_t begin, end;
    bool terminated;
  };
  std::vector<Line> lines;
  std::size_t pos = 0;
  while (pos < data.size()) {
    const auto eol = data.find('\n', pos);
    if (eol == std::string::npos) {
      lines.push_back({pos, data.size(), false});
      break;
    }
    lines.push_back({pos, eol, true});
    pos = eol + 1;
  }
  // Blank lines carry no record; ignore them wherever they appear.
  std::erase_if(lines, [&](const Line& l) {
    return data.find_first_not_of(" \t\r", l.begin) >= l.end;
  });

  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto& l = lines[i];
    const bool last = i + 1 == lines.size();
    TraceRecord rec;
    try {
      rec = deserialize_record(std::string_view(data).substr(l.begin, l.end - l.begin));
    } catch (const CorruptionError& e) {
      if (!last) {
        throw CorruptionError("trace '" + path.string() + "' line " + std::to_string(i + 1) +
                              ": " + e.what());
      }
      spdlog::warn("trace '{}': discarding partially written trailing line", path.string());
      ++store.load_warnings_;
      break;
    }
    if (rec.step != static_cast<std::int64_t>(store.records_.size())) {
      throw CorruptionError("trace '" + path.string() + "': expected step " +
                            std::to_string(store.records_.size()) + ", found " +
                            std::to_string(rec.step));
    }
    store.records_.push_back(std::move(rec));
    store.valid_bytes_ = l.terminated ? l.end + 1 : l.end;
    store.needs_newline_ = !l.terminated;
  }
  if (lines.empty()) store.valid_bytes_ = 0;
  return store;
}

void TraceStore::append(const TraceRecord& record) {
  if (record.step != static_cast<std::int64_t>(records_.size())) {
    throw ValidationError("trace append: step " + std::to_string(record.step) +
                          " does not match store length " + std::to_string(records_.size()));
  }
  if (path_.empty()) {
    records_.push_back(record);
    return;
  }
  if (path_.has_parent_path()) fs::create_directories(path_.parent_path());

  const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT, 0644);
  if (fd < 0) {
    throw Error("trace '" + path_.string() + "': open failed: " + std::strerror(errno));
  }
  struct FdCloser {
    int fd;
    ~FdCloser() { ::close(fd); }
  } closer{fd};

  if (!tail_checked_) {
    // Cut any partial record left by a crash before writing after it.
    if (::ftruncate(fd, static_cast<off_t>(valid_bytes_)) != 0) {
      throw Error("trace '" + path_.string() + "': truncate failed: " + std::strerror(errno));
    }
    tail_checked_ = true;
  }
  if (::lseek(fd, 0, SEEK_END) < 0) {
    throw Error("trace '" + path_.string() + "': seek failed: " + std::strerror(errno));
  }

  std::string line = (needs_newline_ ? "\n" : "") + serialize_record(record) + "\n";
  const char* p = line.data();
  std::size_t left = line.size();
  while (left > 0) {
    const auto n = ::write(fd, p, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error("trace '" + path_.string() + "': write failed: " + std::strerror(errno));
    }
    p += n;
    left -= static_cast<std::size_t>(n);
  }
  if (::fsync(fd) != 0) {
    throw Error("trace '" + path_.string() + "': fsync failed: " + std::strerror(errno));
  }
  needs_newline_ = false;
  valid_bytes_ += line.size();
  records_.push_back(record);
}

TraceMatrix to_matrix(std::span<const TraceRecord> records, const ParamSpace& space) {
  if (records.empty()) throw ValidationError("to_matrix: trace has no records");
  std::set<std::string> metric_keys;
  std::set<std::string> objective_keys;
  for (const auto& r : records) {
    for (const auto& [k, _] : r.metrics) metric_keys.insert(k);
    for (const auto& [k, _] : r.objectives) objective_keys.insert(k);
  }

  TraceMatrix m;
  m.n_params = space.dimension();
  m.n_metrics = metric_keys.size();
  m.n_objectives = objective_keys.size();
  m.columns = space.names();
  m.columns.insert(m.columns.end(), metric_keys.begin(), metric_keys.end());
  m.columns.insert(m.columns.end(), objective_keys.begin(), objective_keys.end());

  const auto n = static_cast<Eigen::Index>(records.size());
  m.rows = Eigen::MatrixXd::Constant(n, static_cast<Eigen::Index>(m.columns.size()),
                                     std::numeric_limits<double>::quiet_NaN());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = records[static_cast<std::size_t>(i)];
    const auto x = space.encode(r.config);
    for (std::size_t d = 0; d < x.size(); ++d) m.rows(i, static_cast<Eigen::Index>(d)) = x[d];
    Eigen::Index col = static_cast<Eigen::Index>(m.n_params);
    for (const auto& k : metric_keys) {
      if (const auto it = r.metrics.find(k); it != r.metrics.end()) m.rows(i, col) = it->second;
      ++col;
    }
    for (const auto& k : objective_keys) {
      if (const auto it = r.objectives.find(k); it != r.objectives.end()) {
        m.rows(i, col) = it->second;
      }
      ++col;
    }
  }
  return m;
}

TraceMatrix TraceStore::to_matrix(const ParamSpace& space) const {
  return dagtune::to_matrix(std::span<const TraceRecord>(records_), space);
}

}  // namespace dagtune
