#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace dagtune {

/// Sobol low-discrepancy sequence in [0, 1)^D with Joe-Kuo direction numbers
/// and 32-bit resolution, generated in Gray-code order. The all-zero first
/// point is always skipped. An optional seed applies a linear matrix scramble
/// plus a digital shift.
class SobolSampler {
 public:
  static constexpr std::size_t kMaxDimension = 1111;
  static constexpr int kBits = 32;

  explicit SobolSampler(std::size_t dimension, std::optional<std::uint64_t> scramble_seed = {});

  std::size_t dimension() const { return dim_; }
  /// Points emitted so far.
  std::uint64_t index() const { return index_ - 1; }

  /// Next count points, one per row.
  Eigen::MatrixXd next(std::size_t count);
  /// Advances without producing output.
  void skip(std::uint64_t count);

 private:
  void advance();

  std::size_t dim_;
  // directions_[d][k] is the k-th direction number of dimension d.
  std::vector<std::array<std::uint32_t, kBits>> directions_;
  std::vector<std::uint32_t> state_;
  std::vector<std::uint32_t> shift_;
  std::uint64_t index_ = 0;
};

}  // namespace dagtune
