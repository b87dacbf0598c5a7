#pragma once

#include <Eigen/Dense>

namespace dagtune {

struct FactorFitOptions {
  int max_iterations = 200;
  // On the per-row average log-likelihood.
  double tolerance = 1e-8;
  double min_uniqueness = 1e-6;
};

struct FactorFit {
  // Regression-method factor scores, rescaled to mean 0 and population std 1.
  Eigen::VectorXd scores;
  Eigen::VectorXd loadings;
  Eigen::VectorXd uniquenesses;
  int iterations = 0;
  bool converged = false;
  bool pca_fallback = false;
};

/// Single-factor model x = loadings * f + e fitted by EM on an n x m block of
/// standardized columns. Sign is fixed so the largest-magnitude loading is
/// positive (earliest column wins ties). Falls back to the first principal
/// component when EM does not converge.
FactorFit factor_compress(const Eigen::MatrixXd& z, const FactorFitOptions& opts = {});

}  // namespace dagtune
