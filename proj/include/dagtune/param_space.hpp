#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace dagtune {

struct Continuous {
  double lo;
  double hi;
  bool operator==(const Continuous&) const = default;
};

struct Integer {
  std::int64_t lo;
  std::int64_t hi;
  bool operator==(const Integer&) const = default;
};

struct Categorical {
  std::vector<std::string> choices;
  bool operator==(const Categorical&) const = default;
};

using Domain = std::variant<Continuous, Integer, Categorical>;

struct ParamDef {
  std::string name;
  Domain domain;
  bool operator==(const ParamDef&) const = default;
};

using ParamValue = std::variant<double, std::int64_t, std::string>;

struct Configuration {
  std::map<std::string, ParamValue> values;
  bool operator==(const Configuration&) const = default;
};

std::string to_string(const ParamValue& v);

struct SpaceCardinality {
  double discrete_log2 = 0.0;
  // Any continuous dimension makes the space uncountable.
  bool infinite = false;
};

/// Ordered, validated set of tunable parameters. Every parameter occupies
/// exactly one dimension of the unit hypercube: continuous and integer
/// parameters map affinely, categoricals map choice i to (i + 0.5) / k.
class ParamSpace {
 public:
  ParamSpace() = default;
  explicit ParamSpace(std::vector<ParamDef> params);

  const std::vector<ParamDef>& params() const { return params_; }
  std::size_t dimension() const { return params_.size(); }
  std::vector<std::string> names() const;
  const ParamDef& at(const std::string& name) const;
  bool contains(const std::string& name) const;

  /// Throws ValidationError naming the offending parameter.
  void validate(const Configuration& cfg) const;

  std::vector<double> encode(const Configuration& cfg) const;
  /// Entries are clamped to [0, 1] before decoding.
  Configuration decode(std::span<const double> x) const;

  SpaceCardinality cardinality_log2() const;

  /// Continuous values may differ by rounding after an encode/decode cycle;
  /// integer and categorical values must match exactly.
  bool approx_equal(const Configuration& a, const Configuration& b,
                    double rel_tol = 1e-12) const;

  bool operator==(const ParamSpace&) const = default;

 private:
  std::vector<ParamDef> params_;
};

}  // namespace dagtune
