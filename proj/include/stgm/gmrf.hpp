#pragma once

#include <cstdint>
#include <random>

#include "stgm/sparse_sym.hpp"
#include "stgm/spatial_domain.hpp"

namespace stgm {

/// S x n field whose vec (site index fastest) is
/// MVN(0, inner^{-1} (x) spatial^{-1}).
///
/// When `projected` is set, `values` are white coordinates with precision
/// I (x) spatial and the structured field is values * transform^T.
struct SeparableField {
  SparseSymMatrix inner;
  SparseSymMatrix spatial;
  Eigen::MatrixXd values;
  bool projected = false;
  Eigen::MatrixXd transform;

  Index num_sites() const { return values.rows(); }
  Index inner_dim() const { return values.cols(); }
  Eigen::MatrixXd structured() const;
};

/// logdet(inner (x) spatial) = S logdet(inner) + n logdet(spatial).
double kron_logdet(const SparseSymMatrix& inner, const SparseSymMatrix& spatial);

/// vec(V)^T (inner (x) spatial) vec(V) = tr(V^T spatial V inner).
double kron_quadratic(const SparseSymMatrix& inner, const SparseSymMatrix& spatial, const Eigen::MatrixXd& values);

/// Gaussian log density of the field; never forms the Kronecker product.
double gmrf_logpdf(const SeparableField& field);

/// Draw with covariance inner^{-1} (x) spatial^{-1} via one triangular
/// solve per factor.
Eigen::MatrixXd gmrf_sample(const SparseSymMatrix& inner, const SparseSymMatrix& spatial, std::mt19937_64& rng);
Eigen::MatrixXd gmrf_sample(const SparseSymMatrix& inner, const SparseSymMatrix& spatial, std::uint64_t seed);

Eigen::MatrixXd standard_normal(Index rows, Index cols, std::mt19937_64& rng);

/// sum_s w_s * field[s, inner_index], applying the projection when set.
double read_field(const SeparableField& field, Index inner_index, const ProjectorRow& row);

}  // namespace stgm
