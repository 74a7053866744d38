#include "stgm/ram_precision.hpp"

#include <Eigen/SparseLU>

#include <cmath>
#include <queue>
#include <string>
#include <vector>

namespace stgm {

namespace {

double term_value(const RamModel& ram, const PathTerm& t, std::span<const double> values) {
  auto idx = ram.term_param(t);
  return idx ? values[*idx] : t.value;
}

// Lag-0 one-headed edges among variables form a DAG without self loops,
// in which case I - P is a permuted unit-triangular matrix.
bool simultaneous_paths_acyclic(const RamModel& ram) {
  const std::size_t c = ram.variables.size();
  std::vector<std::vector<std::size_t>> out(c);
  std::vector<int> indeg(c, 0);
  for (const auto& t : ram.terms) {
    if (t.heads != 1 || t.lag != 0) continue;
    std::size_t from = ram.variable_index(t.from);
    std::size_t to = ram.variable_index(t.to);
    if (from == to) return false;
    out[from].push_back(to);
    ++indeg[to];
  }
  std::queue<std::size_t> ready;
  for (std::size_t i = 0; i < c; ++i)
    if (indeg[i] == 0) ready.push(i);
  std::size_t visited = 0;
  while (!ready.empty()) {
    auto v = ready.front();
    ready.pop();
    ++visited;
    for (auto w : out[v])
      if (--indeg[w] == 0) ready.push(w);
  }
  return visited == c;
}

SparseMatrix identity_minus(const SparseMatrix& p) {
  SparseMatrix eye(p.rows(), p.cols());
  eye.setIdentity();
  SparseMatrix out = eye - p;
  out.makeCompressed();
  return out;
}

using LU = Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>>;

void factor_or_throw(LU& lu, const SparseMatrix& a) {
  lu.analyzePattern(a);
  lu.factorize(a);
  if (lu.info() != Eigen::Success || !std::isfinite(lu.logAbsDeterminant()))
    throw NumericalError("I - P is singular");
}

}  // namespace

bool ram_is_rank_deficient(const RamModel& ram) {
  for (const auto& t : ram.terms)
    if (t.is_variance() && t.lag == 0 && t.fixed() && t.value == 0.0) return true;
  return false;
}

RamMatrices assemble_ram(const RamModel& ram, std::span<const double> values, Index times) {
  if (values.size() != ram.params.size())
    throw ModelError("assemble_ram: expected " + std::to_string(ram.params.size()) + " parameter values, got " +
                     std::to_string(values.size()));
  if (times < 1) throw ModelError("assemble_ram: number of times must be at least 1");
  if (ram.max_lag > 0 && times < 1 + ram.max_lag)
    throw ModelError("assemble_ram: " + std::to_string(times) + " times cannot hold lag " +
                     std::to_string(ram.max_lag));

  const Index c = static_cast<Index>(ram.variables.size());
  const Index n = c * times;
  std::vector<Triplet> p_trip;
  std::vector<Triplet> g_trip;
  for (const auto& term : ram.terms) {
    const Index from = static_cast<Index>(ram.variable_index(term.from));
    const Index to = static_cast<Index>(ram.variable_index(term.to));
    const double v = term_value(ram, term, values);
    for (Index t = term.lag; t < times; ++t) {
      Index row = t * c + to;
      Index col = (t - term.lag) * c + from;
      if (term.heads == 1) {
        p_trip.emplace_back(row, col, v);
      } else {
        if (row < col) std::swap(row, col);
        g_trip.emplace_back(row, col, v);
      }
    }
  }
  RamMatrices m;
  m.num_vars = c;
  m.num_times = times;
  m.P.resize(n, n);
  m.P.setFromTriplets(p_trip.begin(), p_trip.end());
  m.P.makeCompressed();
  m.G.resize(n, n);
  m.G.setFromTriplets(g_trip.begin(), g_trip.end());
  m.G.makeCompressed();
  m.rank_deficient = ram_is_rank_deficient(ram);

  if (!simultaneous_paths_acyclic(ram)) {
    LU lu;
    factor_or_throw(lu, identity_minus(m.P));
  }
  return m;
}

bool has_zero_variance(const RamMatrices& m) {
  for (Index i = 0; i < m.G.rows(); ++i)
    if (m.G.coeff(i, i) == 0.0) return true;
  return false;
}

SparseSymMatrix precision_from_ram(const RamMatrices& m) {
  if (m.rank_deficient)
    throw ModelError("precision_from_ram: RAM is rank deficient; use the projection parameterization");
  if (has_zero_variance(m)) throw NumericalError("precision_from_ram: G is singular (zero exogenous SD)");
  SparseMatrix b = identity_minus(m.P);
  m.G.triangularView<Eigen::Lower>().solveInPlace(b);
  SparseMatrix q = SparseMatrix(b.transpose()) * b;
  for (Index k = 0; k < q.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(q, k); it; ++it)
      if (!std::isfinite(it.value())) throw NumericalError("precision_from_ram: non-finite precision entry");
  return SparseSymMatrix(std::move(q));
}

Eigen::MatrixXd project_rank_deficient(const RamMatrices& m, const Eigen::MatrixXd& white) {
  if (white.rows() != m.dim())
    throw ModelError("project_rank_deficient: white coordinates have " + std::to_string(white.rows()) +
                     " rows, expected " + std::to_string(m.dim()));
  Eigen::MatrixXd rhs = m.G * white;
  LU lu;
  factor_or_throw(lu, identity_minus(m.P));
  Eigen::MatrixXd out = lu.solve(rhs);
  return out;
}

Eigen::MatrixXd projection_matrix(const RamMatrices& m) {
  return project_rank_deficient(m, Eigen::MatrixXd::Identity(m.dim(), m.dim()));
}

}  // namespace stgm
