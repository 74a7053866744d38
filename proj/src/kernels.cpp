#include "stgm/kernels.hpp"

#include <algorithm>
#include <cmath>

#include <omp.h>

namespace stgm::kernels {

int resolve_threads(int threads) { return threads > 0 ? threads : omp_get_max_threads(); }

double fd_step(double x, double rel_step) { return rel_step * std::max(1.0, std::abs(x)); }

namespace {

double central(const Objective& f, const Eigen::VectorXd& x, Index j, double rel_step) {
  const double h = fd_step(x[j], rel_step);
  Eigen::VectorXd xp = x, xm = x;
  xp[j] += h;
  xm[j] -= h;
  return (f(xp) - f(xm)) / (2.0 * h);
}

// entry (i, j) of the second-difference Hessian; i <= j
double second(const Objective& f, const Eigen::VectorXd& x, double f0, Index i, Index j, double rel_step) {
  const double hi = fd_step(x[i], rel_step);
  if (i == j) {
    Eigen::VectorXd xp = x, xm = x;
    xp[i] += hi;
    xm[i] -= hi;
    return (f(xp) - 2.0 * f0 + f(xm)) / (hi * hi);
  }
  const double hj = fd_step(x[j], rel_step);
  Eigen::VectorXd a = x, b = x, c = x, d = x;
  a[i] += hi, a[j] += hj;
  b[i] += hi, b[j] -= hj;
  c[i] -= hi, c[j] += hj;
  d[i] -= hi, d[j] -= hj;
  return (f(a) - f(b) - f(c) + f(d)) / (4.0 * hi * hj);
}

void row_term(const RowInputs& in, const Eigen::VectorXd& eta, Index i, RowTerms& out) {
  const Index c = (*in.var)[static_cast<std::size_t>(i)];
  const auto& fams = *in.families;
  const Family& f = fams.size() == 1 ? fams[0] : fams[static_cast<std::size_t>(c)];
  FamilyTerms t = family_terms(f, (*in.y)[i], eta[i], (*in.dispersion)[c]);
  out.nll[i] = t.nll;
  out.d1[i] = t.d1;
  out.d2[i] = t.d2;
}

RowTerms allocate(Index n) {
  RowTerms r;
  r.nll.resize(n);
  r.d1.resize(n);
  r.d2.resize(n);
  return r;
}

void reduce(RowTerms& r) {
  r.total = 0.0;
  r.invalid = 0;
  for (Index i = 0; i < r.nll.size(); ++i) {
    r.total += r.nll[i];
    if (r.nll[i] == kBarrierNll) ++r.invalid;
  }
}

}  // namespace

Eigen::VectorXd fd_gradient_serial(const Objective& f, const Eigen::VectorXd& x, double rel_step) {
  Eigen::VectorXd g(x.size());
  for (Index j = 0; j < x.size(); ++j) g[j] = central(f, x, j, rel_step);
  return g;
}

Eigen::VectorXd fd_gradient(const Objective& f, const Eigen::VectorXd& x, double rel_step, int threads) {
  const Index n = x.size();
  Eigen::VectorXd g(n);
#pragma omp parallel for schedule(dynamic) num_threads(resolve_threads(threads))
  for (Index j = 0; j < n; ++j) g[j] = central(f, x, j, rel_step);
  return g;
}

Eigen::MatrixXd fd_hessian_serial(const Objective& f, const Eigen::VectorXd& x, double f0, double rel_step) {
  const Index n = x.size();
  Eigen::MatrixXd h(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = i; j < n; ++j) h(i, j) = h(j, i) = second(f, x, f0, i, j, rel_step);
  return h;
}

Eigen::MatrixXd fd_hessian(const Objective& f, const Eigen::VectorXd& x, double f0, double rel_step,
                           int threads) {
  const Index n = x.size();
  std::vector<std::pair<Index, Index>> pairs;
  for (Index i = 0; i < n; ++i)
    for (Index j = i; j < n; ++j) pairs.emplace_back(i, j);
  std::vector<double> vals(pairs.size());
  const auto m = static_cast<std::ptrdiff_t>(pairs.size());
#pragma omp parallel for schedule(dynamic) num_threads(resolve_threads(threads))
  for (std::ptrdiff_t k = 0; k < m; ++k)
    vals[static_cast<std::size_t>(k)] =
        second(f, x, f0, pairs[static_cast<std::size_t>(k)].first, pairs[static_cast<std::size_t>(k)].second, rel_step);
  Eigen::MatrixXd h(n, n);
  for (std::size_t k = 0; k < pairs.size(); ++k) h(pairs[k].first, pairs[k].second) = h(pairs[k].second, pairs[k].first) = vals[k];
  return h;
}

RowTerms family_rows_serial(const RowInputs& in, const Eigen::VectorXd& eta) {
  RowTerms r = allocate(eta.size());
  for (Index i = 0; i < eta.size(); ++i) row_term(in, eta, i, r);
  reduce(r);
  return r;
}

RowTerms family_rows(const RowInputs& in, const Eigen::VectorXd& eta, int threads) {
  const Index n = eta.size();
  RowTerms r = allocate(n);
#pragma omp parallel for schedule(static) num_threads(resolve_threads(threads)) if (n > 4096)
  for (Index i = 0; i < n; ++i) row_term(in, eta, i, r);
  reduce(r);
  return r;
}

}  // namespace stgm::kernels
