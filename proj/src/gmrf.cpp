#include "stgm/gmrf.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace stgm {

namespace {

void check_dims(const SeparableField& f) {
  if (f.spatial.dim() != f.values.rows())
    throw ModelError("separable field: spatial precision has dimension " + std::to_string(f.spatial.dim()) +
                     ", values have " + std::to_string(f.values.rows()) + " sites");
  if (f.projected) {
    if (f.transform.rows() != f.values.cols() || f.transform.cols() != f.values.cols())
      throw ModelError("separable field: projection has wrong dimension");
  } else if (f.inner.dim() != f.values.cols()) {
    throw ModelError("separable field: inner precision has dimension " + std::to_string(f.inner.dim()) +
                     ", values have " + std::to_string(f.values.cols()) + " columns");
  }
}

}  // namespace

Eigen::MatrixXd SeparableField::structured() const {
  if (!projected) return values;
  return values * transform.transpose();
}

double kron_logdet(const SparseSymMatrix& inner, const SparseSymMatrix& spatial) {
  return static_cast<double>(spatial.dim()) * inner.logdet() + static_cast<double>(inner.dim()) * spatial.logdet();
}

double kron_quadratic(const SparseSymMatrix& inner, const SparseSymMatrix& spatial, const Eigen::MatrixXd& values) {
  Eigen::MatrixXd left = spatial.matrix() * values;
  Eigen::MatrixXd right = values * inner.matrix();
  return left.cwiseProduct(right).sum();
}

double gmrf_logpdf(const SeparableField& field) {
  check_dims(field);
  const double n = static_cast<double>(field.values.size());
  const double log2pi = std::log(2.0 * std::numbers::pi);
  if (field.projected) {
    const double nc = static_cast<double>(field.values.cols());
    double quad = (field.values.transpose() * (field.spatial.matrix() * field.values)).trace();
    return -0.5 * (n * log2pi - nc * field.spatial.logdet() + quad);
  }
  double quad = kron_quadratic(field.inner, field.spatial, field.values);
  return -0.5 * (n * log2pi - kron_logdet(field.inner, field.spatial) + quad);
}

Eigen::MatrixXd standard_normal(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd z(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) z(i, j) = normal(rng);
  return z;
}

Eigen::MatrixXd gmrf_sample(const SparseSymMatrix& inner, const SparseSymMatrix& spatial, std::mt19937_64& rng) {
  Eigen::MatrixXd z = standard_normal(spatial.dim(), inner.dim(), rng);
  Eigen::MatrixXd left = spatial.sample_from_white(z);
  Eigen::MatrixXd right = inner.sample_from_white(left.transpose());
  return right.transpose();
}

Eigen::MatrixXd gmrf_sample(const SparseSymMatrix& inner, const SparseSymMatrix& spatial, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return gmrf_sample(inner, spatial, rng);
}

double read_field(const SeparableField& field, Index inner_index, const ProjectorRow& row) {
  if (inner_index < 0 || inner_index >= field.inner_dim())
    throw ModelError("read_field: inner index " + std::to_string(inner_index) + " out of range");
  double out = 0.0;
  for (int k = 0; k < row.count; ++k) {
    const Index s = row.node[k];
    if (s < 0 || s >= field.num_sites()) throw ModelError("read_field: node " + std::to_string(s) + " out of range");
    double v = field.projected ? field.values.row(s).dot(field.transform.row(inner_index))
                               : field.values(s, inner_index);
    out += row.weight[k] * v;
  }
  return out;
}

}  // namespace stgm
