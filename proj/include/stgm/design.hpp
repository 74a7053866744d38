#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stgm/data_table.hpp"
#include "stgm/sparse_sym.hpp"

namespace stgm {

struct FormulaTerm {
  enum class Kind { Intercept, NoIntercept, Numeric, Factor, Poly, Smooth, Offset };
  Kind kind = Kind::Intercept;
  std::string column;
  int k = 0;
};

/// `response ~ term + term + ...` with terms 1, 0, col, factor(col),
/// poly(col, k), s(col, k), offset(col).
struct Formula {
  std::string text;
  std::string response;
  std::vector<FormulaTerm> terms;
  bool intercept = true;
};

Formula parse_formula(std::string_view text);

/// One penalized block of Z: gamma_z ~ MVN(0, (lambda_z Q_z)^{-1}).
struct PenaltyBlock {
  std::string name;
  Index start = 0;
  Index size = 0;
  SparseMatrix penalty;
  Index rank = 0;
};

/// Basis bookkeeping for one s() term.
///
/// The raw cubic B-spline basis B (k columns, clamped equally spaced
/// knots) with penalty D2^T D2 is centered over the training rows and split
/// into its unpenalized linear direction (one X column) and the k - 2
/// penalized eigen-directions (Z columns, diagonal Q_z).
struct SmoothBasis {
  std::string name;
  std::string column;
  int k = 0;
  int degree = 3;
  std::vector<double> knots;
  double lower = 0.0;
  double upper = 0.0;
  Eigen::RowVectorXd center;
  Eigen::MatrixXd penalty;
  Eigen::MatrixXd range_basis;
  Eigen::VectorXd range_eigenvalues;
};

struct DesignBlocks {
  Eigen::MatrixXd X;
  SparseMatrix Z;
  std::vector<PenaltyBlock> penalties;
  Eigen::VectorXd offset;
  std::vector<std::string> x_names;
  std::vector<std::string> z_names;
  std::vector<SmoothBasis> smooths;
  std::vector<std::string> warnings;

  Index rows() const { return X.rows(); }
};

/// Formula compiled against training data; re-applies the same encoding
/// (factor levels, polynomial recurrences, spline knots and centering) to
/// new rows.
class Design {
 public:
  Design(std::string_view formula, const DataTable& training);

  const Formula& formula() const { return formula_; }
  const DesignBlocks& training() const { return training_; }
  /// Response column is not required.
  DesignBlocks apply(const DataTable& rows) const;

 private:
  struct Encoder;
  Formula formula_;
  std::vector<std::shared_ptr<const Encoder>> encoders_;
  DesignBlocks training_;
};

DesignBlocks build_design(std::string_view formula, const DataTable& data);

/// Clamped B-spline basis (rows: x, columns: knots.size() - degree - 1).
Eigen::MatrixXd bspline_basis(std::span<const double> x, const std::vector<double>& knots, int degree);

/// D2^T D2 for a k-vector of coefficients.
Eigen::MatrixXd second_difference_penalty(int k);

/// Improper Gaussian log density 0.5 rank log(lambda) - 0.5 lambda g^T Q g
/// + 0.5 logdet+(Q) - 0.5 rank log(2 pi).
double smoother_logpdf(const Eigen::VectorXd& gamma, const Eigen::MatrixXd& penalty, double lambda);

}  // namespace stgm
