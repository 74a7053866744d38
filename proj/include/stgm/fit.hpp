#pragma once

#include <optional>
#include <string>
#include <vector>

#include "stgm/laplace.hpp"
#include "stgm/model.hpp"
#include "stgm/optimizer.hpp"

namespace stgm {

struct FitOptions {
  OptimizerOptions optimizer;
  LaplaceOptions laplace;
  bool compute_se = true;
  /// Relative step of the finite-difference outer Hessian.
  double hessian_step = 1e-4;
};

struct FitResult {
  /// Free parameters, in layout order.
  std::vector<std::string> names;
  std::vector<Transform> transforms;
  Eigen::VectorXd theta;     // unconstrained
  Eigen::VectorXd estimate;  // natural
  Eigen::VectorXd se;        // natural, NaN when unavailable
  /// Covariance of theta (unconstrained scale).
  Eigen::MatrixXd covariance;
  bool has_covariance = false;
  /// Natural values of all parameters, fixed ones included.
  Eigen::VectorXd natural;
  Eigen::VectorXd mode;
  double nll = 0.0;
  double log_lik = 0.0;
  double aic = 0.0;
  int k = 0;
  bool converged = false;
  double gradient_max = 0.0;
  int iterations = 0;
  int evaluations = 0;
  std::string message;
  std::vector<std::string> warnings;
  std::shared_ptr<const HessianFactor> inner_hessian;
};

FitResult fit_model(const Model& model, const FitOptions& options = {});

/// FitResult at given parameters without optimizing: recomputes the mode;
/// `covariance` (unconstrained) may be empty.
FitResult restore_fit(const Model& model, const Eigen::VectorXd& theta, const Eigen::MatrixXd& covariance,
                      const LaplaceOptions& options = {});

/// Linear predictor split into its additive parts.
struct Prediction {
  Eigen::VectorXd link;
  Eigen::VectorXd response;
  Eigen::VectorXd fixed;
  Eigen::VectorXd smooth;
  Eigen::VectorXd omega;
  Eigen::VectorXd epsilon;
  Eigen::VectorXd offset;
  std::vector<std::string> errors;
  Index failed = 0;
};

/// Rows that cannot be encoded get NaN and an error message.
Prediction predict(const Model& model, const FitResult& fit, const DataTable& rows);
/// Same at the training rows.
Prediction fitted(const Model& model, const FitResult& fit);

enum class ResidualKind { Response, Deviance };

/// Deviance residuals are sign(y - mu) sqrt(d(y, mu)), divided by the SD
/// for Gaussian families and multiplied by sqrt(shape) for Gamma.
Eigen::VectorXd residuals(const Model& model, const FitResult& fit, ResidualKind kind);

struct IntegratedOutput {
  double estimate = 0.0;
  double se = 0.0;
  Index rows_used = 0;
  std::vector<std::string> errors;
  bool bias_corrected = false;
};

/// Plug-in sum_g w_g g^{-1}(eta_g) over grid rows; SE from the inner
/// Hessian (random effects) and the outer covariance (parameters).
IntegratedOutput integrate_output(const Model& model, const FitResult& fit, const DataTable& grid,
                                  const std::vector<double>& weights, const FitOptions& options = {});

}  // namespace stgm
