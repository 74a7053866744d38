#pragma once

#include <span>

#include "stgm/notation.hpp"
#include "stgm/sparse_sym.hpp"

namespace stgm {

/// Path matrix P and exogenous SD/loading matrix G of a RAM, unrolled over
/// `times` when the model is dynamic.
///
/// Flat index of variable c at time t is t * C + c (time-major). Entries are
/// stored as P[to, from] so that x = P x + G z reads "to receives from".
/// G is lower triangular in the flat index.
struct RamMatrices {
  SparseMatrix P;
  SparseMatrix G;
  Index num_vars = 0;
  Index num_times = 1;
  /// Some diagonal entry of G is fixed at exactly zero.
  bool rank_deficient = false;

  Index dim() const { return P.rows(); }
};

/// `values` holds one natural-scale value per `ram.params` entry.
/// Throws ModelError on dimension mismatch and NumericalError when I - P
/// is singular.
RamMatrices assemble_ram(const RamModel& ram, std::span<const double> values, Index times = 1);

/// Q = (I - P)^T G^{-T} G^{-1} (I - P).
/// Throws ModelError for rank-deficient input, NumericalError when G is
/// singular.
SparseSymMatrix precision_from_ram(const RamMatrices& m);

/// Dense (I - P)^{-1} G: maps white coordinates to the structured field.
Eigen::MatrixXd projection_matrix(const RamMatrices& m);

/// (I - P)^{-1} G applied to the columns of `white` (leading dimension n).
Eigen::MatrixXd project_rank_deficient(const RamMatrices& m, const Eigen::MatrixXd& white);

/// True when any diagonal entry of G is exactly zero.
bool has_zero_variance(const RamMatrices& m);

/// Rank deficiency by FIXED specification: some variance term is `NA, 0`.
bool ram_is_rank_deficient(const RamModel& ram);

}  // namespace stgm
