#include <doctest.h>

#include <cmath>
#include <random>

#include "dagtune/errors.hpp"
#include "dagtune/param_space.hpp"

using namespace dagtune;

namespace {

ParamSpace mixed_space() {
  return ParamSpace({
      {"lr", Continuous{1e-4, 1e-1}},
      {"depth", Integer{1, 9}},
      {"mode", Categorical{{"fast", "safe", "tiny"}}},
      {"alpha", Continuous{-2.0, 3.0}},
  });
}

}  // namespace

TEST_CASE("encodings land in the unit cube") {
  const auto space = mixed_space();
  Configuration cfg;
  cfg.values = {{"lr", 1e-4}, {"depth", std::int64_t{9}}, {"mode", std::string("safe")},
                {"alpha", 0.5}};
  const auto x = space.encode(cfg);
  REQUIRE(x.size() == 4);
  CHECK(x[0] == doctest::Approx(0.0));
  CHECK(x[1] == doctest::Approx(1.0));
  CHECK(x[2] == doctest::Approx(0.5));
  CHECK(x[3] == doctest::Approx(0.5));
}

TEST_CASE("categorical choice i encodes to (i + 0.5) / k") {
  const ParamSpace space({{"c", Categorical{{"a", "b", "c", "d"}}}});
  for (int i = 0; i < 4; ++i) {
    Configuration cfg;
    cfg.values["c"] = std::string(1, static_cast<char>('a' + i));
    CHECK(space.encode(cfg)[0] == doctest::Approx((i + 0.5) / 4.0));
  }
}

TEST_CASE("decode then encode round trips on random configurations") {
  const auto space = mixed_space();
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> x{u(rng), u(rng), u(rng), u(rng)};
    const auto cfg = space.decode(x);
    const auto again = space.decode(space.encode(cfg));
    CHECK(space.approx_equal(cfg, again));
    CHECK(std::get<std::int64_t>(cfg.values.at("depth")) ==
          std::get<std::int64_t>(again.values.at("depth")));
    CHECK(cfg.values.at("mode") == again.values.at("mode"));
  }
}

TEST_CASE("integers decode to the nearest value and categoricals by bucket") {
  const auto space = mixed_space();
  const auto cfg = space.decode(std::vector<double>{0.5, 0.49, 0.99, 0.0});
  CHECK(std::get<std::int64_t>(cfg.values.at("depth")) == 5);
  CHECK(std::get<std::string>(cfg.values.at("mode")) == "tiny");
  CHECK(std::get<double>(cfg.values.at("alpha")) == doctest::Approx(-2.0));
  const auto clamped = space.decode(std::vector<double>{-1.0, 2.0, 1.0, 5.0});
  CHECK(std::get<std::int64_t>(clamped.values.at("depth")) == 9);
  CHECK(std::get<std::string>(clamped.values.at("mode")) == "tiny");
  CHECK(std::get<double>(clamped.values.at("alpha")) == doctest::Approx(3.0));
}

TEST_CASE("cardinality in bits") {
  const ParamSpace discrete({{"i", Integer{0, 7}}, {"c", Categorical{{"x", "y"}}}});
  const auto card = discrete.cardinality_log2();
  CHECK_FALSE(card.infinite);
  CHECK(card.discrete_log2 == doctest::Approx(4.0));
  CHECK(mixed_space().cardinality_log2().infinite);
}

TEST_CASE("invalid definitions are rejected") {
  CHECK_THROWS_AS(ParamSpace({{"x", Continuous{1.0, 1.0}}}), ValidationError);
  CHECK_THROWS_AS(ParamSpace({{"x", Integer{3, 2}}}), ValidationError);
  CHECK_THROWS_AS(ParamSpace({{"x", Categorical{{"only"}}}}), ValidationError);
  CHECK_THROWS_AS(ParamSpace({{"x", Categorical{{"a", "a"}}}}), ValidationError);
  CHECK_THROWS_AS(ParamSpace({{"x", Continuous{0, 1}}, {"x", Continuous{0, 1}}}), ValidationError);
  CHECK_THROWS_AS(ParamSpace({{"a.b", Continuous{0, 1}}}), ValidationError);
  CHECK_THROWS_AS(ParamSpace({{"", Continuous{0, 1}}}), ValidationError);
}

TEST_CASE("invalid configurations name the parameter") {
  const auto space = mixed_space();
  Configuration cfg = space.decode(std::vector<double>{0.1, 0.2, 0.3, 0.4});
  cfg.values["depth"] = std::int64_t{10};
  try {
    space.validate(cfg);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("depth") != std::string::npos);
  }
  cfg = space.decode(std::vector<double>{0.1, 0.2, 0.3, 0.4});
  cfg.values["mode"] = std::string("slow");
  CHECK_THROWS_AS(space.validate(cfg), ValidationError);
  cfg = space.decode(std::vector<double>{0.1, 0.2, 0.3, 0.4});
  cfg.values.erase("lr");
  CHECK_THROWS_AS(space.validate(cfg), ValidationError);
  cfg = space.decode(std::vector<double>{0.1, 0.2, 0.3, 0.4});
  cfg.values["extra"] = 1.0;
  CHECK_THROWS_AS(space.validate(cfg), ValidationError);
  CHECK_THROWS_AS(space.decode(std::vector<double>{0.1}), ValidationError);
  CHECK_THROWS_AS(space.decode(std::vector<double>{NAN, 0.1, 0.1, 0.1}), ValidationError);
}

TEST_CASE("whole-number doubles are accepted for integer parameters") {
  const ParamSpace space({{"n", Integer{0, 4}}});
  Configuration cfg;
  cfg.values["n"] = 2.0;
  CHECK(space.encode(cfg)[0] == doctest::Approx(0.5));
  cfg.values["n"] = 2.5;
  CHECK_THROWS_AS(space.encode(cfg), ValidationError);
}
