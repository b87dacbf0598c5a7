#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "dagtune/param_space.hpp"

namespace dagtune {

/// Dotted metric key such as "system.l2.overall_hits".
struct MetricKeyPath {
  std::vector<std::string> segments;

  /// Throws ValidationError on an empty key or an empty segment.
  static MetricKeyPath parse(std::string_view key);
  std::string str() const;
  bool operator==(const MetricKeyPath&) const = default;
};

/// Metric key (dotted) to finite value.
using RawMetrics = std::map<std::string, double>;

struct TraceRecord {
  std::int64_t step = 0;
  Configuration config;
  RawMetrics metrics;
  // Empty for a failed evaluation.
  std::map<std::string, double> objectives;
  double wall_seconds = 0.0;
  std::uint64_t seed = 0;

  bool failed() const { return objectives.empty(); }
  bool operator==(const TraceRecord&) const = default;
};

/// User-supplied one-line regex with exactly two capture groups: key, value.
class LogAnnotation {
 public:
  explicit LogAnnotation(std::string pattern);
  const std::string& pattern() const { return pattern_; }
  const std::regex& regex() const { return regex_; }

 private:
  std::string pattern_;
  std::regex regex_;
};

struct LogParseStats {
  std::size_t matched_lines = 0;
  std::size_t dropped_non_finite = 0;
  std::size_t unparsable_values = 0;
};

RawMetrics parse_log(std::string_view text, const LogAnnotation& ann,
                     LogParseStats* stats = nullptr);

// JSON-lines codec; exposed for tools and tests.
std::string serialize_record(const TraceRecord& rec);
TraceRecord deserialize_record(std::string_view line);

/// Column-major view of a trace: encoded parameters, then the sorted union of
/// metric keys, then sorted objective names. Missing cells hold NaN.
struct TraceMatrix {
  std::vector<std::string> columns;
  std::size_t n_params = 0;
  std::size_t n_metrics = 0;
  std::size_t n_objectives = 0;
  Eigen::MatrixXd rows;
};

/// Append-only on-disk trace, one JSON document per line. A single process
/// may write; every successful append is fsync'ed before returning.
class TraceStore {
 public:
  TraceStore() = default;
  explicit TraceStore(std::filesystem::path path) : path_(std::move(path)) {}

  /// Loads all complete records. A trailing unparsable line is dropped with a
  /// warning and cut off before the next append; a malformed line anywhere
  /// else throws CorruptionError. A missing file yields an empty store.
  static TraceStore load(const std::filesystem::path& path);

  void append(const TraceRecord& record);

  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const std::vector<TraceRecord>& records() const { return records_; }
  const std::filesystem::path& path() const { return path_; }
  std::size_t load_warnings() const { return load_warnings_; }

  TraceMatrix to_matrix(const ParamSpace& space) const;

 private:
  std::filesystem::path path_;
  std::vector<TraceRecord> records_;
  std::uintmax_t valid_bytes_ = 0;
  bool needs_newline_ = false;
  bool tail_checked_ = false;
  std::size_t load_warnings_ = 0;
};

TraceMatrix to_matrix(std::span<const TraceRecord> records, const ParamSpace& space);

}  // namespace dagtune
