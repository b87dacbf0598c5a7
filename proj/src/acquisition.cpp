#include "dagtune/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dagtune/errors.hpp"

namespace dagtune {

double qei(const Eigen::MatrixXd& draws, double f_best) {
  if (!std::isfinite(f_best)) throw NumericalError("qei: best observed value is not finite");
  double sum = 0.0;
  Eigen::Index kept = 0;
  for (Eigen::Index i = 0; i < draws.rows(); ++i) {
    const auto row = draws.row(i);
    if (!row.allFinite()) continue;
    sum += std::max(f_best - row.minCoeff(), 0.0);
    ++kept;
  }
  if (kept == 0) throw NumericalError("qei: every draw is non-finite");
  return sum / static_cast<double>(kept);
}

Eigen::VectorXd qei_per_column(const Eigen::MatrixXd& draws, double f_best) {
  Eigen::VectorXd out(draws.cols());
  for (Eigen::Index j = 0; j < draws.cols(); ++j) {
    try {
      out(j) = qei(draws.col(j), f_best);
    } catch (const NumericalError&) {
      out(j) = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return out;
}

}  // namespace dagtune
