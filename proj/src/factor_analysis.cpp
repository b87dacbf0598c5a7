#include "dagtune/factor_analysis.hpp"

#include <cmath>
#include <numbers>

#include <spdlog/spdlog.h>

#include "dagtune/errors.hpp"

namespace dagtune {

namespace {

void standardize_in_place(Eigen::VectorXd& v) {
  const double mean = v.mean();
  v.array() -= mean;
  const double sd = std::sqrt(v.squaredNorm() / static_cast<double>(v.size()));
  if (sd > 0.0) v /= sd;
}

// Sign convention: the largest |loading| is positive, earliest index on ties.
void fix_sign(FactorFit& fit) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < fit.loadings.size(); ++i) {
    if (std::abs(fit.loadings(i)) > std::abs(fit.loadings(best))) best = i;
  }
  if (fit.loadings(best) < 0.0) {
    fit.loadings = -fit.loadings;
    fit.scores = -fit.scores;
  }
}

double average_log_likelihood(const Eigen::MatrixXd& s, const Eigen::VectorXd& lambda,
                              const Eigen::VectorXd& psi) {
  const auto m = static_cast<double>(lambda.size());
  const Eigen::VectorXd lp = lambda.cwiseQuotient(psi);
  const double c = 1.0 + lambda.dot(lp);
  const double logdet = psi.array().log().sum() + std::log(c);
  // Woodbury: inv(Sigma) = diag(1/psi) - lp lp^T / c.
  const double trace = (s.diagonal().array() / psi.array()).sum() - lp.dot(s * lp) / c;
  return -0.5 * (m * std::log(2.0 * std::numbers::pi) + logdet + trace);
}

FactorFit principal_component(const Eigen::MatrixXd& z, const Eigen::MatrixXd& s) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
  const Eigen::Index top = s.rows() - 1;
  FactorFit fit;
  fit.loadings = eig.eigenvectors().col(top) * std::sqrt(std::max(eig.eigenvalues()(top), 0.0));
  fit.uniquenesses = (s.diagonal() - fit.loadings.cwiseAbs2()).cwiseMax(0.0);
  fit.scores = z * eig.eigenvectors().col(top);
  standardize_in_place(fit.scores);
  fit.pca_fallback = true;
  return fit;
}

}  // namespace

FactorFit factor_compress(const Eigen::MatrixXd& z, const FactorFitOptions& opts) {
  const Eigen::Index n = z.rows();
  const Eigen::Index m = z.cols();
  if (n < 2 || m < 1) {
    throw ValidationError("factor_compress: needs at least 2 rows and 1 column");
  }
  if (m == 1) {
    FactorFit fit;
    fit.scores = z.col(0);
    standardize_in_place(fit.scores);
    fit.loadings = Eigen::VectorXd::Ones(1);
    fit.uniquenesses = Eigen::VectorXd::Zero(1);
    fit.converged = true;
    return fit;
  }

  const Eigen::MatrixXd s = (z.transpose() * z) / static_cast<double>(n);

  // Start from the leading principal axis.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
  Eigen::VectorXd lambda =
      eig.eigenvectors().col(m - 1) * std::sqrt(std::max(eig.eigenvalues()(m - 1), 1e-12));
  Eigen::VectorXd psi =
      (s.diagonal() - lambda.cwiseAbs2()).cwiseMax(std::max(opts.min_uniqueness, 0.05));

  FactorFit fit;
  double ll = average_log_likelihood(s, lambda, psi);
  for (int it = 1; it <= opts.max_iterations; ++it) {
    // E-step: posterior of f given x is N(beta x, 1 - beta lambda).
    const Eigen::VectorXd lp = lambda.cwiseQuotient(psi);
    const Eigen::VectorXd beta = lp / (1.0 + lambda.dot(lp));
    const Eigen::VectorXd s_beta = s * beta;
    const double eff = 1.0 - beta.dot(lambda) + beta.dot(s_beta);
    // M-step.
    lambda = s_beta / eff;
    psi = (s.diagonal() - lambda.cwiseProduct(s_beta)).cwiseMax(opts.min_uniqueness);

    const double next = average_log_likelihood(s, lambda, psi);
    fit.iterations = it;
    if (!std::isfinite(next)) break;
    if (std::abs(next - ll) < opts.tolerance) {
      fit.converged = true;
      ll = next;
      break;
    }
    ll = next;
  }

  if (!fit.converged) {
    spdlog::warn("factor_compress: EM did not converge in {} iterations; using first principal component",
                 opts.max_iterations);
    auto pc = principal_component(z, s);
    pc.iterations = fit.iterations;
    fix_sign(pc);
    return pc;
  }

  fit.loadings = lambda;
  fit.uniquenesses = psi;
  const Eigen::VectorXd lp = lambda.cwiseQuotient(psi);
  fit.scores = z * (lp / (1.0 + lambda.dot(lp)));
  standardize_in_place(fit.scores);
  fix_sign(fit);
  return fit;
}

}  // namespace dagtune
