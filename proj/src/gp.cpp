#include "dagtune/gp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>

#include <spdlog/spdlog.h>

#include "dagtune/bounded_lbfgs.hpp"
#include "dagtune/errors.hpp"
#include "dagtune/rng.hpp"

namespace dagtune {

std::string to_string(KernelKind k) { return k == KernelKind::Matern52 ? "matern52" : "rbf"; }

KernelKind kernel_from_string(const std::string& s) {
  if (s == "matern52") return KernelKind::Matern52;
  if (s == "rbf") return KernelKind::Rbf;
  throw ValidationError("unknown kernel '" + s + "' (expected matern52 or rbf)");
}

namespace {

constexpr double kSqrt5 = 2.23606797749979;
constexpr double kJitterStart = 1e-6;
constexpr double kJitterMax = 1e-2;

// Scaled squared distances r^2 between rows of a and b.
Eigen::MatrixXd scaled_sqdist(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                              const Eigen::VectorXd& inv_ls) {
  const Eigen::MatrixXd as = a * inv_ls.asDiagonal();
  const Eigen::MatrixXd bs = b * inv_ls.asDiagonal();
  Eigen::MatrixXd d2 = (-2.0 * as * bs.transpose()).colwise() + as.rowwise().squaredNorm();
  d2.rowwise() += bs.rowwise().squaredNorm().transpose();
  return d2.cwiseMax(0.0);
}

Eigen::MatrixXd kernel_from_r2(KernelKind kind, const Eigen::MatrixXd& r2, double signal) {
  if (kind == KernelKind::Rbf) return signal * (-0.5 * r2.array()).exp().matrix();
  const Eigen::ArrayXXd r = r2.array().sqrt();
  return (signal * (1.0 + kSqrt5 * r + (5.0 / 3.0) * r2.array()) * (-kSqrt5 * r).exp()).matrix();
}

struct Factorized {
  Eigen::MatrixXd chol;
  double jitter = 0.0;
};

std::optional<Factorized> factorize(const Eigen::MatrixXd& k) {
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() == Eigen::Success) return Factorized{llt.matrixL(), 0.0};
  const Eigen::Index n = k.rows();
  for (double j = kJitterStart; j <= kJitterMax * (1.0 + 1e-12); j *= 2.0) {
    llt.compute(k + j * Eigen::MatrixXd::Identity(n, n));
    if (llt.info() == Eigen::Success) return Factorized{llt.matrixL(), j};
  }
  return std::nullopt;
}

std::string condition_report(const Eigen::MatrixXd& k, const Eigen::VectorXd& theta) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  std::ostringstream os;
  os << "min eigenvalue " << ev.minCoeff() << ", max eigenvalue " << ev.maxCoeff()
     << ", condition number ";
  if (ev.minCoeff() > 0.0) {
    os << ev.maxCoeff() / ev.minCoeff();
  } else {
    os << "inf";
  }
  os << ", theta [" << theta.transpose() << "]";
  return os.str();
}

Eigen::MatrixXd full_cov(KernelKind kind, const Eigen::MatrixXd& x, const Eigen::VectorXd& theta) {
  const Eigen::Index n = x.rows();
  return kernel_matrix(kind, x, x, theta) +
         std::exp(theta(theta.size() - 1)) * Eigen::MatrixXd::Identity(n, n);
}

}  // namespace

Eigen::MatrixXd kernel_matrix(KernelKind kind, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                              const Eigen::VectorXd& theta) {
  const Eigen::Index p = a.cols();
  if (b.cols() != p || theta.size() != p + 2) {
    throw ValidationError("kernel_matrix: dimension mismatch");
  }
  const Eigen::VectorXd inv_ls = (-theta.segment(1, p)).array().exp();
  return kernel_from_r2(kind, scaled_sqdist(a, b, inv_ls), std::exp(theta(0)));
}

double gp_log_marginal_likelihood(KernelKind kind, const Eigen::MatrixXd& x,
                                  const Eigen::VectorXd& y, const Eigen::VectorXd& theta,
                                  Eigen::VectorXd* grad) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  const double signal = std::exp(theta(0));
  const double noise = std::exp(theta(p + 1));
  const Eigen::VectorXd ls = theta.segment(1, p).array().exp();
  const Eigen::MatrixXd r2 = scaled_sqdist(x, x, ls.cwiseInverse());
  const Eigen::MatrixXd kf = kernel_from_r2(kind, r2, signal);
  const auto fac = factorize(kf + noise * Eigen::MatrixXd::Identity(n, n));
  if (!fac) return -std::numeric_limits<double>::infinity();

  const auto lower = fac->chol.triangularView<Eigen::Lower>();
  Eigen::VectorXd alpha = lower.solve(y);
  fac->chol.transpose().triangularView<Eigen::Upper>().solveInPlace(alpha);
  const double lml = -0.5 * y.dot(alpha) - fac->chol.diagonal().array().log().sum() -
                     0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
  if (!grad) return lml;

  Eigen::MatrixXd kinv = Eigen::MatrixXd::Identity(n, n);
  lower.solveInPlace(kinv);
  fac->chol.transpose().triangularView<Eigen::Upper>().solveInPlace(kinv);
  const Eigen::MatrixXd w = alpha * alpha.transpose() - kinv;

  grad->resize(p + 2);
  (*grad)(0) = 0.5 * w.cwiseProduct(kf).sum();
  Eigen::MatrixXd shape;
  if (kind == KernelKind::Rbf) {
    shape = kf;
  } else {
    const Eigen::ArrayXXd r = r2.array().sqrt();
    shape = (signal * (5.0 / 3.0) * (1.0 + kSqrt5 * r) * (-kSqrt5 * r).exp()).matrix();
  }
  const Eigen::MatrixXd ws = w.cwiseProduct(shape);
  for (Eigen::Index d = 0; d < p; ++d) {
    const Eigen::VectorXd xd = x.col(d) / ls(d);
    const Eigen::MatrixXd diff2 =
        (xd.replicate(1, n) - xd.transpose().replicate(n, 1)).array().square().matrix();
    (*grad)(d + 1) = 0.5 * ws.cwiseProduct(diff2).sum();
  }
  (*grad)(p + 1) = 0.5 * noise * w.trace();
  return lml;
}

GaussianProcess GaussianProcess::condition(KernelKind kind, const Eigen::MatrixXd& x,
                                           const Eigen::VectorXd& y, const Eigen::VectorXd& theta) {
  if (x.rows() != y.size()) throw ValidationError("gp: input/target row mismatch");
  if (theta.size() != x.cols() + 2) throw ValidationError("gp: hyperparameter size mismatch");
  const Eigen::MatrixXd k = full_cov(kind, x, theta);
  const auto fac = factorize(k);
  if (!fac) {
    throw NumericalError("gp: covariance not positive definite after jitter up to " +
                         std::to_string(kJitterMax) + "; " + condition_report(k, theta));
  }
  GaussianProcess gp;
  gp.kind_ = kind;
  gp.theta_ = theta;
  gp.x_ = x;
  gp.chol_ = fac->chol;
  gp.jitter_ = fac->jitter;
  const auto lower = gp.chol_.triangularView<Eigen::Lower>();
  gp.alpha_ = lower.solve(y);
  gp.chol_.transpose().triangularView<Eigen::Upper>().solveInPlace(gp.alpha_);
  gp.lml_ = -0.5 * y.dot(gp.alpha_) - gp.chol_.diagonal().array().log().sum() -
            0.5 * static_cast<double>(x.rows()) * std::log(2.0 * std::numbers::pi);
  return gp;
}

GaussianProcess GaussianProcess::fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                     const GpFitOptions& opts) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (n < 2) throw ValidationError("gp: need at least 2 training rows");
  if (p < 1) throw ValidationError("gp: need at least 1 input dimension");
  if (n != y.size()) throw ValidationError("gp: input/target row mismatch");
  if (!x.allFinite() || !y.allFinite()) throw NumericalError("gp: non-finite training data");

  const auto& b = opts.bounds;
  Eigen::VectorXd lo(p + 2), hi(p + 2);
  lo(0) = std::log(b.signal_lo);
  hi(0) = std::log(b.signal_hi);
  lo.segment(1, p).setConstant(std::log(b.lengthscale_lo));
  hi.segment(1, p).setConstant(std::log(b.lengthscale_hi));
  lo(p + 1) = std::log(b.noise_lo);
  hi(p + 1) = std::log(b.noise_hi);

  const double var_y = std::max((y.array() - y.mean()).square().mean(), 1e-2);
  Eigen::VectorXd range = x.colwise().maxCoeff() - x.colwise().minCoeff();
  for (Eigen::Index d = 0; d < p; ++d) {
    if (!(range(d) > 1e-9)) range(d) = 1.0;
  }

  std::vector<Eigen::VectorXd> starts;
  Eigen::VectorXd t0(p + 2);
  t0(0) = std::log(var_y);
  t0.segment(1, p) = (0.5 * range).array().log();
  t0(p + 1) = std::log(1e-2 * var_y);
  starts.push_back(t0.cwiseMax(lo).cwiseMin(hi));
  Rng rng(opts.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int r = 0; r < opts.random_restarts; ++r) {
    Eigen::VectorXd t(p + 2);
    t(0) = std::log(var_y) + std::log(10.0) * (2.0 * u(rng) - 1.0);
    for (Eigen::Index d = 0; d < p; ++d) {
      t(d + 1) = std::log(range(d)) + std::log(10.0) * (2.0 * u(rng) - 1.0);
    }
    t(p + 1) = std::log(1e-5) + (std::log(0.3) - std::log(1e-5)) * u(rng);
    starts.push_back(t.cwiseMax(lo).cwiseMin(hi));
  }

  const Objective neg_lml = [&](const Eigen::VectorXd& t, Eigen::VectorXd& g) {
    const double v = gp_log_marginal_likelihood(opts.kernel, x, y, t, &g);
    if (!std::isfinite(v)) return std::numeric_limits<double>::infinity();
    g = -g;
    return -v;
  };
  LbfgsOptions lopts;
  lopts.max_iterations = opts.max_iterations;

  std::optional<Eigen::VectorXd> best;
  double best_f = std::numeric_limits<double>::infinity();
  for (const auto& s : starts) {
    try {
      const auto res = minimize_box(neg_lml, s, lo, hi, lopts);
      if (std::isfinite(res.f) && res.f < best_f) {
        best_f = res.f;
        best = res.x;
      }
    } catch (const NumericalError& e) {
      spdlog::debug("gp: restart skipped: {}", e.what());
    }
  }
  if (!best) {
    throw NumericalError("gp: log marginal likelihood not finite at any restart; " +
                         condition_report(full_cov(opts.kernel, x, starts.front()), starts.front()));
  }
  return condition(opts.kernel, x, y, *best);
}

void GaussianProcess::predict(const Eigen::MatrixXd& xs, Eigen::VectorXd& mean,
                              Eigen::VectorXd& var) const {
  if (xs.cols() != x_.cols()) throw ValidationError("gp: prediction input has wrong width");
  const Eigen::MatrixXd ks = kernel_matrix(kind_, xs, x_, theta_);
  mean = ks * alpha_;
  const Eigen::MatrixXd v = chol_.triangularView<Eigen::Lower>().solve(ks.transpose());
  var = (signal_variance() - v.colwise().squaredNorm().transpose().array()).cwiseMax(0.0).matrix();
}

double GaussianProcess::signal_variance() const { return std::exp(theta_(0)); }

double GaussianProcess::noise_variance() const { return std::exp(theta_(theta_.size() - 1)); }

}  // namespace dagtune
