#pragma once

#include <functional>
#include <string>

#include "stgm/kernels.hpp"

namespace stgm {

struct OptimizerOptions {
  int max_iterations = 500;
  double gradient_tolerance = 1e-3;
  /// Relative central-difference step.
  double fd_step = 1e-5;
  /// Largest allowed |step| component in unconstrained units.
  double max_step = 2.0;
  int threads = 0;
  /// Called with each accepted iterate before its gradient is taken.
  std::function<void(const Eigen::VectorXd&)> on_accept;
};

struct OptimizerResult {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::VectorXd gradient;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::string message;
};

/// BFGS with Armijo backtracking and finite-difference gradients.
/// Non-finite objective values are treated as rejections by the line
/// search.
OptimizerResult minimize_bfgs(const kernels::Objective& f, const Eigen::VectorXd& x0,
                              const OptimizerOptions& options = {});

}  // namespace stgm
