#pragma once

#include <functional>

#include <Eigen/Dense>

namespace dagtune {

struct LbfgsOptions {
  int memory = 10;
  int max_iterations = 1000;
  // Relative objective decrease below which the solve stops.
  double ftol = 2.220446049250313e-09;
  // Infinity norm of the projected gradient.
  double pgtol = 1e-5;
  int max_backtracks = 40;
};

struct LbfgsResult {
  Eigen::VectorXd x;
  double f = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

/// Returns f(x) and writes the gradient into grad.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

/// Minimizes f over the box [lower, upper] (entries may be +-infinity) with a
/// projected limited-memory BFGS: quasi-Newton directions on the free
/// variables, projection onto the box, Armijo backtracking.
LbfgsResult minimize_box(const Objective& f, Eigen::VectorXd x0, const Eigen::VectorXd& lower,
                         const Eigen::VectorXd& upper, const LbfgsOptions& opts = {});

}  // namespace dagtune
