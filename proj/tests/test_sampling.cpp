#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>

#include "dagtune/acquisition.hpp"
#include "dagtune/errors.hpp"
#include "dagtune/sobol.hpp"

using namespace dagtune;

namespace {

double analytic_ei(double mu, double sigma, double f_best) {
  const double z = (f_best - mu) / sigma;
  const double pdf = std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
  const double cdf = 0.5 * std::erfc(-z / std::sqrt(2.0));
  return (f_best - mu) * cdf + sigma * pdf;
}

}  // namespace

TEST_CASE("sobol first dimension matches the reference sequence") {
  SobolSampler s(1);
  const auto p = s.next(8);
  const double want[] = {0.5, 0.75, 0.25, 0.375, 0.875, 0.625, 0.125, 0.1875};
  for (int i = 0; i < 8; ++i) CHECK(p(i, 0) == want[i]);
}

TEST_CASE("sobol multi-dimensional points match reference rows") {
  SobolSampler s(8);
  const auto p = s.next(15);
  const double want[15][8] = {
      {0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5},
      {0.75, 0.25, 0.25, 0.25, 0.75, 0.75, 0.25, 0.75},
      {0.25, 0.75, 0.75, 0.75, 0.25, 0.25, 0.75, 0.25},
      {0.375, 0.375, 0.625, 0.875, 0.375, 0.125, 0.375, 0.875},
      {0.875, 0.875, 0.125, 0.375, 0.875, 0.625, 0.875, 0.375},
      {0.625, 0.125, 0.875, 0.625, 0.625, 0.875, 0.125, 0.125},
      {0.125, 0.625, 0.375, 0.125, 0.125, 0.375, 0.625, 0.625},
      {0.1875, 0.3125, 0.9375, 0.4375, 0.5625, 0.3125, 0.4375, 0.9375},
      {0.6875, 0.8125, 0.4375, 0.9375, 0.0625, 0.8125, 0.9375, 0.4375},
      {0.9375, 0.0625, 0.6875, 0.1875, 0.3125, 0.5625, 0.1875, 0.1875},
      {0.4375, 0.5625, 0.1875, 0.6875, 0.8125, 0.0625, 0.6875, 0.6875},
      {0.3125, 0.1875, 0.3125, 0.5625, 0.9375, 0.4375, 0.0625, 0.0625},
      {0.8125, 0.6875, 0.8125, 0.0625, 0.4375, 0.9375, 0.5625, 0.5625},
      {0.5625, 0.4375, 0.0625, 0.8125, 0.1875, 0.6875, 0.3125, 0.8125},
      {0.0625, 0.9375, 0.5625, 0.3125, 0.6875, 0.1875, 0.8125, 0.3125},
  };
  for (int i = 0; i < 15; ++i) {
    for (int d = 0; d < 8; ++d) CHECK(p(i, d) == want[i][d]);
  }
}

TEST_CASE("sobol later points match reference rows in twelve dimensions") {
  const double row100[] = {0.4140625, 0.2578125, 0.7734375, 0.7265625, 0.8828125, 0.7421875,
                           0.0234375, 0.4765625, 0.6328125, 0.6953125, 0.4609375, 0.6796875};
  const double row255[] = {0.00390625, 0.99609375, 0.76953125, 0.57421875,
                           0.61328125, 0.98046875, 0.88671875, 0.17578125,
                           0.44140625, 0.35546875, 0.13671875, 0.16796875};
  const double row1000[] = {0.2197265625, 0.0966796875, 0.5185546875, 0.6767578125,
                            0.2802734375, 0.9072265625, 0.0458984375, 0.8994140625,
                            0.5009765625, 0.0693359375, 0.0849609375, 0.2548828125};
  SobolSampler s(12);
  const auto p = s.next(1000);
  for (int d = 0; d < 12; ++d) {
    CHECK(p(99, d) == row100[d]);
    CHECK(p(254, d) == row255[d]);
    CHECK(p(999, d) == row1000[d]);
  }
}

TEST_CASE("sobol points stratify every dimension") {
  const int m = 10;
  const std::size_t n = (1u << m) - 1;
  SobolSampler plain(40);
  SobolSampler scrambled(40, 77);
  const auto p = plain.next(n);
  const auto q = scrambled.next(n);
  for (int d = 0; d < 40; ++d) {
    std::set<long> bins_p{0}, bins_q;
    for (std::size_t i = 0; i < n; ++i) {
      bins_p.insert(static_cast<long>(std::floor(p(i, d) * (1 << m))));
      bins_q.insert(static_cast<long>(std::floor(q(i, d) * (1 << m))));
      CHECK(q(i, d) >= 0.0);
      CHECK(q(i, d) < 1.0);
    }
    CHECK(bins_p.size() == n + 1);
    CHECK(bins_q.size() == n);
  }
}

TEST_CASE("sobol seeding, skipping and limits") {
  SobolSampler a(5, 3), b(5, 3), c(5, 4), plain(5);
  const auto pa = a.next(64);
  CHECK(pa == b.next(64));
  CHECK(pa != c.next(64));
  CHECK(pa != plain.next(64));
  SobolSampler skipper(5, 3);
  skipper.skip(40);
  CHECK(skipper.index() == 40);
  CHECK(skipper.next(1).row(0) == pa.row(40));
  CHECK_THROWS_AS(SobolSampler(0), ValidationError);
  CHECK_THROWS_AS(SobolSampler(SobolSampler::kMaxDimension + 1), ValidationError);
  CHECK_NOTHROW(SobolSampler(SobolSampler::kMaxDimension).next(4));
}

TEST_CASE("single-point qEI agrees with closed-form EI") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-2.0, 2.0), us(0.1, 2.0);
  std::normal_distribution<double> n01;
  for (const int s : {1 << 10, 1 << 14}) {
    for (int t = 0; t < 20; ++t) {
      const double mu = u(rng), sigma = us(rng), f = mu + sigma * u(rng);
      Eigen::MatrixXd draws(s, 1);
      for (int i = 0; i < s; ++i) draws(i, 0) = mu + sigma * n01(rng);
      const Eigen::ArrayXd imp = (f - draws.col(0).array()).max(0.0);
      const double se = std::sqrt((imp - imp.mean()).square().sum() / (s - 1) / s);
      CHECK(std::abs(qei(draws, f) - analytic_ei(mu, sigma, f)) < 3.0 * se);
    }
  }
}

TEST_CASE("qEI structural properties") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n01;
  Eigen::MatrixXd a(500, 1), b(500, 1);
  for (int i = 0; i < 500; ++i) {
    a(i, 0) = n01(rng);
    b(i, 0) = 0.5 + n01(rng);
  }
  double last = -1.0;
  for (double f = -3.0; f <= 3.0; f += 0.25) {
    const double v = qei(a, f);
    CHECK(v >= last);
    last = v;
  }
  Eigen::MatrixXd dup(500, 2), pair(500, 2);
  dup << a, a;
  pair << a, b;
  CHECK(qei(dup, 0.3) == qei(a, 0.3));
  CHECK(qei(pair, 0.3) >= std::max(qei(a, 0.3), qei(b, 0.3)));

  Eigen::MatrixXd cols(500, 3);
  cols << b, a, 2.0 * b;
  const auto base = qei_per_column(cols, 0.2);
  Eigen::Index arg = 0;
  base.maxCoeff(&arg);
  for (const double c : {0.01, 3.0, 1e4}) {
    const auto scaled = qei_per_column(c * cols, c * 0.2);
    Eigen::Index arg2 = 0;
    scaled.maxCoeff(&arg2);
    CHECK(arg2 == arg);
    CHECK((scaled - c * base).cwiseAbs().maxCoeff() <= 1e-9 * c);
  }
}

TEST_CASE("non-finite draws are discarded") {
  Eigen::MatrixXd d(4, 2);
  d << 0.0, 1.0, NAN, 0.0, INFINITY, 0.0, 2.0, NAN;
  CHECK(qei(d.col(0), 1.0) == doctest::Approx(0.5));
  const auto per = qei_per_column(d, 1.0);
  CHECK(per(0) == doctest::Approx(0.5));
  CHECK(per(1) == doctest::Approx(2.0 / 3.0));
  CHECK(qei(d, 1.0) == doctest::Approx(1.0));
  Eigen::MatrixXd bad = Eigen::MatrixXd::Constant(3, 2, NAN);
  CHECK_THROWS_AS(qei(bad, 0.0), NumericalError);
  CHECK(std::isnan(qei_per_column(bad, 0.0)(1)));
  CHECK_THROWS_AS(qei(d, NAN), NumericalError);
}
