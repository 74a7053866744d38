#include "stgm/sparse_sym.hpp"

#include <cmath>
#include <ostream>
#include <vector>

#include "stgm/format.hpp"

namespace stgm {

SparseSymMatrix::SparseSymMatrix(SparseMatrix m, bool symmetrize) {
  set_matrix(std::move(m), symmetrize);
}

SparseSymMatrix SparseSymMatrix::identity(Index n) {
  SparseMatrix m(n, n);
  m.setIdentity();
  return SparseSymMatrix(std::move(m), false);
}

SparseSymMatrix SparseSymMatrix::diagonal(const Eigen::VectorXd& d) {
  std::vector<Triplet> t;
  t.reserve(d.size());
  for (Index i = 0; i < d.size(); ++i) t.emplace_back(i, i, d[i]);
  SparseMatrix m(d.size(), d.size());
  m.setFromTriplets(t.begin(), t.end());
  return SparseSymMatrix(std::move(m), false);
}

SparseSymMatrix SparseSymMatrix::from_dense(const Eigen::MatrixXd& m) {
  return SparseSymMatrix(m.sparseView(0.0, 0.0));
}

void SparseSymMatrix::set_matrix(SparseMatrix m, bool symmetrize) {
  if (m.rows() != m.cols()) throw ModelError("SparseSymMatrix: matrix is not square");
  if (symmetrize) {
    SparseMatrix t = m.transpose();
    m_ = 0.5 * (m + t);
  } else {
    m_ = std::move(m);
  }
  m_.makeCompressed();
  factor_.reset();
}

SparseSymMatrix SparseSymMatrix::scaled(double s) const {
  SparseSymMatrix out;
  out.m_ = s * m_;
  return out;
}

bool SparseSymMatrix::is_symmetric(double rel_tol) const {
  double scale = 0.0;
  for (Index k = 0; k < m_.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(m_, k); it; ++it) scale = std::max(scale, std::abs(it.value()));
  for (Index k = 0; k < m_.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(m_, k); it; ++it)
      if (std::abs(it.value() - m_.coeff(it.col(), it.row())) > rel_tol * scale) return false;
  return true;
}

const SparseSymMatrix::Factor& SparseSymMatrix::cholesky() const {
  if (factor_) return *factor_;
  auto f = std::make_shared<Factor>();
  f->compute(m_);
  if (f->info() != Eigen::Success) throw NumericalError("sparse Cholesky failed: matrix is singular");
  const Eigen::VectorXd& d = f->vectorD();
  for (Index i = 0; i < d.size(); ++i)
    if (!(d[i] > 0.0) || !std::isfinite(d[i]))
      throw NumericalError("sparse Cholesky failed: matrix is not positive definite");
  factor_ = std::move(f);
  return *factor_;
}

bool SparseSymMatrix::is_positive_definite() const noexcept {
  try {
    cholesky();
    return true;
  } catch (const NumericalError&) {
    return false;
  }
}

double SparseSymMatrix::logdet() const {
  return cholesky().vectorD().array().log().sum();
}

Eigen::MatrixXd SparseSymMatrix::solve(const Eigen::MatrixXd& rhs) const {
  return cholesky().solve(rhs);
}

Eigen::MatrixXd SparseSymMatrix::sample_from_white(const Eigen::MatrixXd& z) const {
  // P Q P^T = L D L^T, so x = P^T L^{-T} D^{-1/2} z has covariance Q^{-1}.
  const Factor& f = cholesky();
  Eigen::MatrixXd scaled = f.vectorD().array().rsqrt().matrix().asDiagonal() * z;
  Eigen::MatrixXd y = f.matrixU().solve(scaled);
  return f.permutationPinv() * y;
}

void SparseSymMatrix::write_matrix_market(std::ostream& out) const {
  Index nnz = 0;
  for (Index k = 0; k < m_.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(m_, k); it; ++it)
      if (it.row() >= it.col()) ++nnz;
  out << "%%MatrixMarket matrix coordinate real symmetric\n";
  out << m_.rows() << ' ' << m_.cols() << ' ' << nnz << '\n';
  for (Index k = 0; k < m_.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(m_, k); it; ++it)
      if (it.row() >= it.col())
        out << (it.row() + 1) << ' ' << (it.col() + 1) << ' ' << format_double(it.value()) << '\n';
}

SparseMatrix kronecker(const SparseMatrix& a, const SparseMatrix& b) {
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(a.nonZeros() * b.nonZeros()));
  for (Index ka = 0; ka < a.outerSize(); ++ka)
    for (SparseMatrix::InnerIterator ia(a, ka); ia; ++ia)
      for (Index kb = 0; kb < b.outerSize(); ++kb)
        for (SparseMatrix::InnerIterator ib(b, kb); ib; ++ib)
          t.emplace_back(ia.row() * b.rows() + ib.row(), ia.col() * b.cols() + ib.col(),
                         ia.value() * ib.value());
  SparseMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

}  // namespace stgm
