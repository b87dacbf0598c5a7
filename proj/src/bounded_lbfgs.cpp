#include "dagtune/bounded_lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "dagtune/errors.hpp"

namespace dagtune {

namespace {

Eigen::VectorXd project(Eigen::VectorXd x, const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  return x.cwiseMax(lo).cwiseMin(hi);
}

}  // namespace

LbfgsResult minimize_box(const Objective& f, Eigen::VectorXd x0, const Eigen::VectorXd& lower,
                         const Eigen::VectorXd& upper, const LbfgsOptions& opts) {
  const Eigen::Index n = x0.size();
  LbfgsResult res;
  res.x = project(std::move(x0), lower, upper);
  Eigen::VectorXd g(n);
  res.f = f(res.x, g);
  ++res.evaluations;
  if (!std::isfinite(res.f)) throw NumericalError("minimize_box: objective is not finite at start");

  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;

  for (int it = 0; it < opts.max_iterations; ++it) {
    res.iterations = it + 1;
    // Free variables: not pinned at a bound by the gradient.
    Eigen::Array<bool, Eigen::Dynamic, 1> free(n);
    double pg_norm = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const bool at_lo = res.x(i) <= lower(i) && g(i) > 0.0;
      const bool at_hi = res.x(i) >= upper(i) && g(i) < 0.0;
      free(i) = !(at_lo || at_hi) && lower(i) < upper(i);
      const double step = std::clamp(res.x(i) - g(i), lower(i), upper(i)) - res.x(i);
      pg_norm = std::max(pg_norm, std::abs(step));
    }
    if (pg_norm < opts.pgtol) {
      res.converged = true;
      break;
    }

    Eigen::VectorXd q = free.select(g, 0.0);
    std::vector<double> alpha(s_hist.size());
    for (std::size_t k = s_hist.size(); k-- > 0;) {
      alpha[k] = rho_hist[k] * s_hist[k].dot(q);
      q -= alpha[k] * y_hist[k];
    }
    if (!s_hist.empty()) {
      q *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    }
    for (std::size_t k = 0; k < s_hist.size(); ++k) {
      const double beta = rho_hist[k] * y_hist[k].dot(q);
      q += (alpha[k] - beta) * s_hist[k];
    }
    Eigen::VectorXd d = free.select(-q, 0.0);
    if (g.dot(d) >= 0.0) {
      d = free.select(-g, 0.0);
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }

    double t = 1.0;
    if (s_hist.empty()) t = std::min(1.0, 1.0 / std::max(d.lpNorm<Eigen::Infinity>(), 1e-300));
    Eigen::VectorXd x_new, g_new(n);
    double f_new = 0.0;
    bool accepted = false;
    for (int bt = 0; bt < opts.max_backtracks; ++bt) {
      x_new = project(res.x + t * d, lower, upper);
      f_new = f(x_new, g_new);
      ++res.evaluations;
      if (std::isfinite(f_new) && f_new <= res.f + 1e-4 * g.dot(x_new - res.x)) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;

    const Eigen::VectorXd s = x_new - res.x;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-10 * y.squaredNorm()) {
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opts.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    const double rel = (res.f - f_new) / std::max({std::abs(res.f), std::abs(f_new), 1.0});
    res.x = std::move(x_new);
    g = g_new;
    res.f = f_new;
    if (rel <= opts.ftol) {
      res.converged = true;
      break;
    }
  }
  return res;
}

}  // namespace dagtune
