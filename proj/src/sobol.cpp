#include "dagtune/sobol.hpp"

#include <bit>
#include <initializer_list>

#include "dagtune/errors.hpp"
#include "dagtune/rng.hpp"

namespace dagtune {

namespace {

struct DirectionEntry {
  std::uint32_t poly;
  std::initializer_list<std::uint32_t> m;
};

const DirectionEntry kTable[] = {
#include "sobol_direction_numbers.inc"
};

std::array<std::uint32_t, SobolSampler::kBits> directions_for(std::size_t d) {
  constexpr int bits = SobolSampler::kBits;
  std::array<std::uint32_t, bits> v{};
  if (d == 0) {
    for (int k = 0; k < bits; ++k) v[static_cast<std::size_t>(k)] = 1u << (bits - 1 - k);
    return v;
  }
  const auto& e = kTable[d - 1];
  const int s = std::bit_width(e.poly) - 1;
  std::vector<std::uint32_t> m(e.m.begin(), e.m.end());
  m.resize(bits);
  for (int k = s; k < bits; ++k) {
    std::uint32_t mk = m[static_cast<std::size_t>(k - s)] ^ (m[static_cast<std::size_t>(k - s)] << s);
    for (int j = 1; j < s; ++j) {
      const std::uint32_t a = (e.poly >> (s - j)) & 1u;
      if (a) mk ^= m[static_cast<std::size_t>(k - j)] << j;
    }
    m[static_cast<std::size_t>(k)] = mk;
  }
  for (int k = 0; k < bits; ++k) {
    v[static_cast<std::size_t>(k)] = m[static_cast<std::size_t>(k)] << (bits - 1 - k);
  }
  return v;
}

}  // namespace

SobolSampler::SobolSampler(std::size_t dimension, std::optional<std::uint64_t> scramble_seed)
    : dim_(dimension), state_(dimension, 0), shift_(dimension, 0) {
  if (dimension == 0 || dimension > kMaxDimension) {
    throw ValidationError("sobol: dimension must be in [1, " + std::to_string(kMaxDimension) + "]");
  }
  directions_.reserve(dimension);
  for (std::size_t d = 0; d < dimension; ++d) directions_.push_back(directions_for(d));

  if (scramble_seed) {
    Rng rng(*scramble_seed);
    for (std::size_t d = 0; d < dimension; ++d) {
      // Lower-triangular unit-diagonal bit matrix: output bit r (from the top)
      // mixes input bits 0..r.
      std::array<std::uint32_t, kBits> rows{};
      for (int r = 0; r < kBits; ++r) {
        const std::uint32_t top = 1u << (kBits - 1 - r);
        const std::uint32_t below_mask = r == 0 ? 0u : ~((top << 1) - 1u);
        rows[static_cast<std::size_t>(r)] = top | (static_cast<std::uint32_t>(rng()) & below_mask);
      }
      for (auto& v : directions_[d]) {
        std::uint32_t out = 0;
        for (int r = 0; r < kBits; ++r) {
          if (std::popcount(rows[static_cast<std::size_t>(r)] & v) & 1) out |= 1u << (kBits - 1 - r);
        }
        v = out;
      }
      shift_[d] = static_cast<std::uint32_t>(rng());
    }
  }
  advance();
}

void SobolSampler::advance() {
  // Gray-code step from index_ to index_ + 1: flip the direction of the lowest
  // zero bit of index_.
  const int c = std::countr_one(index_);
  if (c >= kBits) throw ValidationError("sobol: sequence exhausted");
  for (std::size_t d = 0; d < dim_; ++d) state_[d] ^= directions_[d][static_cast<std::size_t>(c)];
  ++index_;
}

Eigen::MatrixXd SobolSampler::next(std::size_t count) {
  constexpr double scale = 1.0 / 4294967296.0;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(dim_));
  for (std::size_t i = 0; i < count; ++i) {
    for (std::size_t d = 0; d < dim_; ++d) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) =
          static_cast<double>(state_[d] ^ shift_[d]) * scale;
    }
    advance();
  }
  return out;
}

void SobolSampler::skip(std::uint64_t count) {
  for (std::uint64_t i = 0; i < count; ++i) advance();
}

}  // namespace dagtune
