#pragma once

#include <Eigen/Dense>

namespace dagtune {

/// Monte-Carlo quasi expected improvement for minimization:
/// mean over draws of max(max_j (f_best - y_j), 0), where each row of draws
/// is one joint sample of q points. Rows containing a non-finite value are
/// discarded; NumericalError if none remain.
double qei(const Eigen::MatrixXd& draws, double f_best);

/// qei applied to each column separately (q = 1 per candidate).
Eigen::VectorXd qei_per_column(const Eigen::MatrixXd& draws, double f_best);

}  // namespace dagtune
