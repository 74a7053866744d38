#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>

namespace stgm {

using Index = Eigen::Index;
using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Raised when a factorization or solve fails (non-SPD, singular).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid model input: bad dimensions, bad parameter domains, bad files.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Compressed sparse symmetric matrix with a lazily computed sparse
/// Cholesky (LDL^T, AMD ordering) factor.
///
/// Both triangles are stored. The factor is cached and dropped whenever
/// the values change. Copies share the (immutable) cached factor.
class SparseSymMatrix {
 public:
  using Factor = Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>>;

  SparseSymMatrix() = default;
  /// Symmetrizes `m` as (m + m^T) / 2 unless `symmetrize` is false.
  explicit SparseSymMatrix(SparseMatrix m, bool symmetrize = true);

  static SparseSymMatrix identity(Index n);
  static SparseSymMatrix diagonal(const Eigen::VectorXd& d);
  static SparseSymMatrix from_dense(const Eigen::MatrixXd& m);

  Index dim() const { return m_.rows(); }
  const SparseMatrix& matrix() const { return m_; }
  Eigen::MatrixXd dense() const { return Eigen::MatrixXd(m_); }
  double coeff(Index i, Index j) const { return m_.coeff(i, j); }

  void set_matrix(SparseMatrix m, bool symmetrize = true);
  SparseSymMatrix scaled(double s) const;

  /// Max |a_ij - a_ji| relative to max |a_ij| over stored entries.
  bool is_symmetric(double rel_tol = 1e-12) const;

  /// Throws NumericalError unless the matrix is symmetric positive definite.
  const Factor& cholesky() const;
  bool is_positive_definite() const noexcept;
  bool has_factor() const noexcept { return static_cast<bool>(factor_); }

  double logdet() const;
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;

  /// Maps i.i.d. standard normal columns z to draws with covariance Q^{-1}.
  Eigen::MatrixXd sample_from_white(const Eigen::MatrixXd& z) const;

  /// Lower triangle in MatrixMarket coordinate format, 1-based indices.
  void write_matrix_market(std::ostream& out) const;

 private:
  SparseMatrix m_;
  mutable std::shared_ptr<const Factor> factor_;
};

/// Sparse Kronecker product a (x) b.
SparseMatrix kronecker(const SparseMatrix& a, const SparseMatrix& b);

}  // namespace stgm
