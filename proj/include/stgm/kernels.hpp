#pragma once

#include <functional>
#include <vector>

#include "stgm/family.hpp"
#include "stgm/sparse_sym.hpp"

/// Hot loops of the fitter, each in a serial reference form and an OpenMP
/// form. Both forms perform the same floating-point operations in the same
/// order per element and reduce serially, so results are bit-identical.
namespace stgm::kernels {

using Objective = std::function<double(const Eigen::VectorXd&)>;

/// Step for coordinate j: rel_step * max(1, |x_j|).
double fd_step(double x, double rel_step);

/// Central differences (f(x + h e_j) - f(x - h e_j)) / 2h.
Eigen::VectorXd fd_gradient_serial(const Objective& f, const Eigen::VectorXd& x, double rel_step);
Eigen::VectorXd fd_gradient(const Objective& f, const Eigen::VectorXd& x, double rel_step, int threads = 0);

/// Second differences; `f0` is f(x).
Eigen::MatrixXd fd_hessian_serial(const Objective& f, const Eigen::VectorXd& x, double f0, double rel_step);
Eigen::MatrixXd fd_hessian(const Objective& f, const Eigen::VectorXd& x, double f0, double rel_step,
                           int threads = 0);

/// Per-row negative log densities and eta derivatives.
struct RowTerms {
  Eigen::VectorXd nll;
  Eigen::VectorXd d1;
  Eigen::VectorXd d2;
  double total = 0.0;
  Index invalid = 0;
};

struct RowInputs {
  const std::vector<Family>* families = nullptr;  // one per variable
  const std::vector<Index>* var = nullptr;
  const Eigen::VectorXd* y = nullptr;
  const Eigen::VectorXd* dispersion = nullptr;  // per variable
};

RowTerms family_rows_serial(const RowInputs& in, const Eigen::VectorXd& eta);
RowTerms family_rows(const RowInputs& in, const Eigen::VectorXd& eta, int threads = 0);

/// Number of threads an OpenMP region would use for `threads` (0: default).
int resolve_threads(int threads);

}  // namespace stgm::kernels
