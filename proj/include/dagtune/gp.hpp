#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Dense>

namespace dagtune {

enum class KernelKind { Matern52, Rbf };

std::string to_string(KernelKind k);
KernelKind kernel_from_string(const std::string& s);

/// Log-space hyperparameter layout: [log signal variance, log length scale
/// per input dimension..., log noise variance].
struct GpBounds {
  double lengthscale_lo = 1e-3;
  double lengthscale_hi = 1e3;
  double noise_lo = 1e-6;
  double noise_hi = 1.0;
  double signal_lo = 1e-3;
  double signal_hi = 1e3;
};

struct GpFitOptions {
  KernelKind kernel = KernelKind::Matern52;
  int random_restarts = 3;
  int max_iterations = 200;
  std::uint64_t seed = 0;
  GpBounds bounds;
};

/// Kernel matrix between row sets a and b (no noise term).
Eigen::MatrixXd kernel_matrix(KernelKind kind, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                              const Eigen::VectorXd& theta);

/// Log marginal likelihood of y under a zero-mean GP; if grad is non-null it
/// receives d/dtheta. Returns -inf when the covariance cannot be factorized.
double gp_log_marginal_likelihood(KernelKind kind, const Eigen::MatrixXd& x,
                                  const Eigen::VectorXd& y, const Eigen::VectorXd& theta,
                                  Eigen::VectorXd* grad = nullptr);

/// Exact GP regression with a constant-zero prior mean.
class GaussianProcess {
 public:
  GaussianProcess() = default;

  /// Maximizes the log marginal likelihood from a default start plus
  /// random_restarts random starts, keeping the best.
  static GaussianProcess fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                             const GpFitOptions& opts = {});
  /// Conditions on data with fixed hyperparameters.
  static GaussianProcess condition(KernelKind kind, const Eigen::MatrixXd& x,
                                   const Eigen::VectorXd& y, const Eigen::VectorXd& theta);

  /// Latent posterior mean and variance at each row of xs.
  void predict(const Eigen::MatrixXd& xs, Eigen::VectorXd& mean, Eigen::VectorXd& var) const;

  KernelKind kernel() const { return kind_; }
  const Eigen::VectorXd& theta() const { return theta_; }
  double signal_variance() const;
  double noise_variance() const;
  // Extra diagonal added so the factorization succeeded; 0 if none was needed.
  double jitter() const { return jitter_; }
  double log_marginal_likelihood() const { return lml_; }
  Eigen::Index input_dim() const { return x_.cols(); }

 private:
  KernelKind kind_ = KernelKind::Matern52;
  Eigen::VectorXd theta_;
  Eigen::MatrixXd x_;
  Eigen::MatrixXd chol_;
  Eigen::VectorXd alpha_;
  double jitter_ = 0.0;
  double lml_ = 0.0;
};

}  // namespace dagtune
