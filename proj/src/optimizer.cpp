#include "stgm/optimizer.hpp"

#include <atomic>
#include <cmath>

namespace stgm {

OptimizerResult minimize_bfgs(const kernels::Objective& f, const Eigen::VectorXd& x0,
                              const OptimizerOptions& options) {
  std::atomic<int> evals{0};
  kernels::Objective counted = [&](const Eigen::VectorXd& x) {
    ++evals;
    return f(x);
  };
  auto grad = [&](const Eigen::VectorXd& x) {
    return kernels::fd_gradient(counted, x, options.fd_step, options.threads);
  };

  OptimizerResult r;
  const Index n = x0.size();
  r.x = x0;
  r.value = counted(x0);
  if (!std::isfinite(r.value)) {
    r.message = "objective is not finite at the start";
    r.gradient = Eigen::VectorXd::Zero(n);
    r.evaluations = evals;
    return r;
  }
  if (n == 0) {
    r.gradient = Eigen::VectorXd::Zero(0);
    r.converged = true;
    r.evaluations = evals;
    return r;
  }
  r.gradient = grad(r.x);
  Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(n, n);
  bool identity = true;
  for (r.iterations = 0; r.iterations < options.max_iterations; ++r.iterations) {
    if (!r.gradient.allFinite()) {
      r.message = "gradient is not finite";
      break;
    }
    if (r.gradient.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) {
      r.converged = true;
      break;
    }
    Eigen::VectorXd d = -hinv * r.gradient;
    double slope = r.gradient.dot(d);
    if (!(slope < 0.0)) {
      hinv.setIdentity();
      identity = true;
      d = -r.gradient;
      slope = r.gradient.dot(d);
    }
    const double big = d.lpNorm<Eigen::Infinity>();
    if (big > options.max_step) {
      d *= options.max_step / big;
      slope = r.gradient.dot(d);
    }
    double t = 1.0;
    bool accepted = false;
    Eigen::VectorXd xn, gn;
    double fn = 0.0;
    for (int k = 0; k < 50; ++k, t *= 0.5) {
      xn = r.x + t * d;
      fn = counted(xn);
      if (xn == r.x) break;
      if (!(std::isfinite(fn) && fn < r.value && fn <= r.value + 1e-4 * t * slope)) continue;
      if (options.on_accept) options.on_accept(xn);
      gn = grad(xn);
      if (gn.allFinite()) {
        accepted = true;
        break;
      }
      // the neighbourhood of xn is not evaluable; keep backtracking
      if (options.on_accept) options.on_accept(r.x);
    }
    if (!accepted) {
      if (!identity) {
        hinv.setIdentity();
        identity = true;
        continue;
      }
      r.message = "line search failed";
      break;
    }
    Eigen::VectorXd s = xn - r.x;
    Eigen::VectorXd y = gn - r.gradient;
    const double sy = s.dot(y);
    r.x = xn;
    r.value = fn;
    r.gradient = gn;
    if (sy > 1e-12 * s.norm() * y.norm() && sy > 0.0) {
      if (identity) {
        // Shanno-Phua scaling of the initial inverse Hessian
        hinv *= sy / y.dot(y);
        identity = false;
      }
      const double rho = 1.0 / sy;
      Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n) - rho * s * y.transpose();
      hinv = v * hinv * v.transpose() + rho * s * s.transpose();
    }
  }
  if (!r.converged && r.message.empty()) r.message = "iteration limit reached";
  r.evaluations = evals;
  return r;
}

}  // namespace stgm
