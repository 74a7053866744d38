#pragma once

#include <limits>
#include <memory>
#include <string>

#include "stgm/model.hpp"

namespace stgm {

struct LaplaceOptions {
  double tolerance = 1e-8;
  int max_iterations = 100;
  int threads = 1;
};

/// Sparse LDL^T of the inner Hessian under the model's fill-reducing
/// ordering.
class HessianFactor {
 public:
  using Permutation = Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int>;

  HessianFactor(const SparseMatrix& h, const Permutation& perm);

  /// Factorization succeeded and every pivot is positive.
  bool positive_definite() const { return pd_; }
  double logdet() const;
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;
  /// Stored entries of the factor L.
  Index factor_nonzeros() const { return ldlt_.matrixL().nestedExpression().nonZeros(); }

 private:
  Permutation perm_;
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::NaturalOrdering<int>> ldlt_;
  bool pd_ = false;
};

struct LaplaceResult {
  /// Negative log marginal likelihood.
  double value = std::numeric_limits<double>::infinity();
  /// Joint negative log likelihood at the mode.
  double joint = std::numeric_limits<double>::infinity();
  double logdet_h = 0.0;
  Eigen::VectorXd mode;
  bool ok = false;
  bool converged = false;
  /// Some mean was numerically invalid at the mode.
  bool barrier = false;
  int iterations = 0;
  double gradient_max = 0.0;
  std::string message;
  std::shared_ptr<const HessianFactor> hessian;
};

/// Data term plus Gaussian prior of the random effects (the smoother prior
/// with rank-based normalization folded in).
double joint_nll(const Model& model, const Assembled& a, const Eigen::VectorXd& u, bool include_data = true);

/// Inner Newton for the mode of u, then joint(u) + 1/2 logdet H - n_u/2
/// log(2 pi). `start` defaults to zeros.
LaplaceResult laplace_marginal(const Model& model, const Assembled& a, const Eigen::VectorXd* start = nullptr,
                               const LaplaceOptions& options = {});
LaplaceResult laplace_marginal(const Model& model, const Eigen::VectorXd& theta,
                               const Eigen::VectorXd* start = nullptr, const LaplaceOptions& options = {});

/// laplace_marginal(...).value, or +infinity when the parameters are
/// invalid or the inner problem fails.
double laplace_value(const Model& model, const Eigen::VectorXd& theta, const Eigen::VectorXd* start = nullptr,
                     const LaplaceOptions& options = {});

}  // namespace stgm
