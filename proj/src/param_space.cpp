#include "dagtune/param_space.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include "dagtune/errors.hpp"

namespace dagtune {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void validate_def(const ParamDef& def) {
  if (def.name.empty()) throw ValidationError("parameter name must be nonempty");
  if (def.name.find('.') != std::string::npos) {
    throw ValidationError("parameter '" + def.name + "': name must not contain '.'");
  }
  std::visit(Overloaded{
                 [&](const Continuous& c) {
                   if (!std::isfinite(c.lo) || !std::isfinite(c.hi) || !(c.lo < c.hi)) {
                     throw ValidationError("parameter '" + def.name +
                                           "': continuous bounds need lo < hi");
                   }
                 },
                 [&](const Integer& i) {
                   if (!(i.lo < i.hi)) {
                     throw ValidationError("parameter '" + def.name +
                                           "': integer bounds need lo < hi");
                   }
                 },
                 [&](const Categorical& c) {
                   if (c.choices.size() < 2) {
                     throw ValidationError("parameter '" + def.name +
                                           "': categorical needs at least 2 choices");
                   }
                   std::set<std::string> seen(c.choices.begin(), c.choices.end());
                   if (seen.size() != c.choices.size()) {
                     throw ValidationError("parameter '" + def.name +
                                           "': categorical choices must be distinct");
                   }
                 },
             },
             def.domain);
}

double encode_one(const ParamDef& def, const ParamValue& value) {
  const auto bad = [&](const std::string& why) {
    return ValidationError("parameter '" + def.name + "': " + why);
  };
  return std::visit(
      Overloaded{
          [&](const Continuous& c) -> double {
            double v;
            if (const auto* d = std::get_if<double>(&value)) {
              v = *d;
            } else if (const auto* i = std::get_if<std::int64_t>(&value)) {
              v = static_cast<double>(*i);
            } else {
              throw bad("expected a number");
            }
            if (!std::isfinite(v) || v < c.lo || v > c.hi) throw bad("value out of range");
            return (v - c.lo) / (c.hi - c.lo);
          },
          [&](const Integer& r) -> double {
            std::int64_t v;
            if (const auto* i = std::get_if<std::int64_t>(&value)) {
              v = *i;
            } else if (const auto* d = std::get_if<double>(&value);
                       d && std::isfinite(*d) && std::floor(*d) == *d) {
              v = static_cast<std::int64_t>(*d);
            } else {
              throw bad("expected an integer");
            }
            if (v < r.lo || v > r.hi) throw bad("value out of range");
            return static_cast<double>(v - r.lo) / static_cast<double>(r.hi - r.lo);
          },
          [&](const Categorical& c) -> double {
            const auto* s = std::get_if<std::string>(&value);
            if (!s) throw bad("expected a choice string");
            const auto it = std::find(c.choices.begin(), c.choices.end(), *s);
            if (it == c.choices.end()) throw bad("unknown choice '" + *s + "'");
            const auto k = static_cast<double>(c.choices.size());
            return (static_cast<double>(it - c.choices.begin()) + 0.5) / k;
          },
      },
      def.domain);
}

ParamValue decode_one(const ParamDef& def, double u) {
  if (std::isnan(u)) {
    throw ValidationError("parameter '" + def.name + "': cannot decode NaN");
  }
  u = std::clamp(u, 0.0, 1.0);
  return std::visit(
      Overloaded{
          [&](const Continuous& c) -> ParamValue {
            return std::clamp(c.lo + u * (c.hi - c.lo), c.lo, c.hi);
          },
          [&](const Integer& r) -> ParamValue {
            const double x = static_cast<double>(r.lo) + u * static_cast<double>(r.hi - r.lo);
            const auto v = static_cast<std::int64_t>(std::floor(x + 0.5));
            return std::clamp(v, r.lo, r.hi);
          },
          [&](const Categorical& c) -> ParamValue {
            const auto k = c.choices.size();
            auto idx = static_cast<std::size_t>(std::floor(u * static_cast<double>(k)));
            return c.choices[std::min(idx, k - 1)];
          },
      },
      def.domain);
}

}  // namespace

std::string to_string(const ParamValue& v) {
  return std::visit(Overloaded{
                        [](double d) {
                          char buf[64];
                          auto res = std::to_chars(buf, buf + sizeof(buf), d);
                          return std::string(buf, res.ptr);
                        },
                        [](std::int64_t i) { return std::to_string(i); },
                        [](const std::string& s) { return s; },
                    },
                    v);
}

ParamSpace::ParamSpace(std::vector<ParamDef> params) : params_(std::move(params)) {
  std::set<std::string> names;
  for (const auto& p : params_) {
    validate_def(p);
    if (!names.insert(p.name).second) {
      throw ValidationError("duplicate parameter name '" + p.name + "'");
    }
  }
}

std::vector<std::string> ParamSpace::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.name);
  return out;
}

bool ParamSpace::contains(const std::string& name) const {
  return std::any_of(params_.begin(), params_.end(),
                     [&](const ParamDef& p) { return p.name == name; });
}

const ParamDef& ParamSpace::at(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return p;
  }
  throw ValidationError("unknown parameter '" + name + "'");
}

void ParamSpace::validate(const Configuration& cfg) const { (void)encode(cfg); }

std::vector<double> ParamSpace::encode(const Configuration& cfg) const {
  for (const auto& [name, _] : cfg.values) {
    if (!contains(name)) throw ValidationError("unknown parameter '" + name + "'");
  }
  std::vector<double> x;
  x.reserve(params_.size());
  for (const auto& p : params_) {
    const auto it = cfg.values.find(p.name);
    if (it == cfg.values.end()) {
      throw ValidationError("parameter '" + p.name + "': missing value");
    }
    x.push_back(encode_one(p, it->second));
  }
  return x;
}

Configuration ParamSpace::decode(std::span<const double> x) const {
  if (x.size() != params_.size()) {
    throw ValidationError("decode: expected " + std::to_string(params_.size()) +
                          " coordinates, got " + std::to_string(x.size()));
  }
  Configuration cfg;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    cfg.values.emplace(params_[i].name, decode_one(params_[i], x[i]));
  }
  return cfg;
}

SpaceCardinality ParamSpace::cardinality_log2() const {
  SpaceCardinality out;
  for (const auto& p : params_) {
    std::visit(Overloaded{
                   [&](const Continuous&) { out.infinite = true; },
                   [&](const Integer& r) {
                     out.discrete_log2 += std::log2(static_cast<double>(r.hi - r.lo) + 1.0);
                   },
                   [&](const Categorical& c) {
                     out.discrete_log2 += std::log2(static_cast<double>(c.choices.size()));
                   },
               },
               p.domain);
  }
  return out;
}

bool ParamSpace::approx_equal(const Configuration& a, const Configuration& b,
                              double rel_tol) const {
  if (a.values.size() != b.values.size()) return false;
  for (const auto& p : params_) {
    const auto ia = a.values.find(p.name);
    const auto ib = b.values.find(p.name);
    if (ia == a.values.end() || ib == b.values.end()) return false;
    if (const auto* c = std::get_if<Continuous>(&p.domain)) {
      const auto* da = std::get_if<double>(&ia->second);
      const auto* db = std::get_if<double>(&ib->second);
      if (!da || !db) return false;
      if (std::abs(*da - *db) > rel_tol * (c->hi - c->lo)) return false;
    } else if (ia->second != ib->second) {
      return false;
    }
  }
  return true;
}

}  // namespace dagtune
