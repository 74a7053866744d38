#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "stgm/data_table.hpp"
#include "stgm/design.hpp"
#include "stgm/family.hpp"
#include "stgm/notation.hpp"
#include "stgm/ram_precision.hpp"
#include "stgm/spatial_domain.hpp"

namespace stgm {

enum class Transform { Identity, Log, ScaledLogit };

std::string transform_name(Transform t);
double to_natural(Transform t, double x);
double to_unconstrained(Transform t, double v);
/// d natural / d unconstrained at x.
double natural_derivative(Transform t, double x);

enum class ParamKind { Alpha, Sem, Dsem, Spatial, Dispersion, Lambda };

struct ParamInfo {
  std::string name;
  ParamKind kind = ParamKind::Alpha;
  Transform transform = Transform::Identity;
  /// Natural-scale start value, or the fixed value.
  double start = 0.0;
  bool fixed = false;
  /// Position inside its block: X column, RAM parameter, variable or
  /// smoother index.
  std::size_t target = 0;
};

/// Outer parameter vector: all parameters on the natural scale, the free
/// ones also on an unconstrained scale.
class ParameterLayout {
 public:
  const std::vector<ParamInfo>& params() const { return params_; }
  std::size_t size() const { return params_.size(); }
  std::size_t num_free() const { return free_.size(); }
  const std::vector<std::size_t>& free_indices() const { return free_; }
  std::vector<std::string> free_names() const;
  std::optional<std::size_t> find(std::string_view name) const;

  /// Unconstrained start of the free parameters.
  Eigen::VectorXd start() const;
  /// Natural values of all parameters given the free unconstrained vector.
  Eigen::VectorXd natural(const Eigen::VectorXd& theta) const;
  /// Free unconstrained vector from natural values of all parameters.
  Eigen::VectorXd unconstrained(const Eigen::VectorXd& natural_all) const;

 private:
  friend class Model;
  std::vector<ParamInfo> params_;
  std::vector<std::size_t> free_;
};

struct ModelSpec {
  std::string formula = "y ~ 1";
  std::optional<RamModel> sem;
  std::optional<RamModel> dsem;
  SpatialDomain domain = SpatialDomain::single_site();
  /// Declared variables; empty means taken from the data in order of
  /// first appearance.
  std::vector<std::string> variables;
  /// Declared times; empty means the sorted distinct times in the data.
  std::vector<double> times;
  /// One family shared by all variables, or one per variable.
  std::vector<Family> families{Family{}};
  std::string variable_column = "var";
  std::string time_column = "time";
  /// Two coordinate columns for a mesh, one node-id column otherwise.
  std::vector<std::string> space_columns;
  /// Parameters held at a natural-scale value.
  std::map<std::string, double> fixed;
  /// Natural-scale start overrides.
  std::map<std::string, double> starts;
  /// Parameters estimated on the scaled-logit (-1, 1) scale.
  std::set<std::string> bounded;
};

/// Rows encoded against the model: design blocks plus the variable, time
/// and projector row of each sample.
struct EncodedRows {
  DesignBlocks design;
  std::vector<Index> var;
  std::vector<Index> time;
  std::vector<ProjectorRow> proj;
  /// Per-row failure message; empty string when the row is usable.
  std::vector<std::string> errors;

  Index size() const { return static_cast<Index>(var.size()); }
  bool ok(Index i) const { return errors.empty() || errors[static_cast<std::size_t>(i)].empty(); }
};

/// Everything that depends on the outer parameters.
struct Assembled {
  Eigen::VectorXd natural;
  Eigen::VectorXd alpha;
  /// Per variable; zero for families without dispersion.
  Eigen::VectorXd dispersion;
  std::vector<double> lambda;
  SparseSymMatrix spatial;
  RamMatrices sem_ram;
  RamMatrices dsem_ram;
  /// Inner precisions (empty when the block is projected).
  SparseSymMatrix sem_precision;
  SparseSymMatrix dsem_precision;
  /// (I - P)^{-1} G for projected blocks.
  Eigen::MatrixXd sem_transform;
  Eigen::MatrixXd dsem_transform;
  /// Prior precision of all random effects and its log-determinant.
  SparseSymMatrix Q;
  double logdet_q = 0.0;
};

struct RandomEffectLabel {
  std::string block;
  std::string variable;
  std::string time;
  Index node = 0;
};

/// ModelSpec compiled against a data table.
///
/// Random effects u stack Omega (S x C, site fastest), E (S x C*T, inner
/// index t * C + c) and the smoother coefficients gamma. Projected blocks
/// hold white coordinates.
class Model {
 public:
  Model(ModelSpec spec, const DataTable& data, bool require_response = true);

  const ModelSpec& spec() const { return spec_; }
  const ParameterLayout& layout() const { return layout_; }
  const Design& design() const { return *design_; }
  const EncodedRows& rows() const { return rows_; }
  const Eigen::VectorXd& response() const { return y_; }
  bool has_response() const { return has_response_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  Index num_rows() const { return rows_.size(); }
  Index num_sites() const { return S_; }
  Index num_vars() const { return C_; }
  Index num_times() const { return T_; }
  Index num_random() const { return n_u_; }
  bool has_omega() const { return spec_.sem.has_value(); }
  bool has_epsilon() const { return spec_.dsem.has_value(); }
  bool sem_projected() const { return sem_projected_; }
  bool dsem_projected() const { return dsem_projected_; }
  Index omega_offset() const { return omega_offset_; }
  Index epsilon_offset() const { return epsilon_offset_; }
  Index gamma_offset() const { return gamma_offset_; }
  const Family& family(Index var) const;
  std::string time_label(Index t) const;

  /// Encodes new rows. With `per_row_errors` a bad row is reported in
  /// EncodedRows::errors instead of throwing.
  EncodedRows encode(const DataTable& data, bool per_row_errors = false) const;

  /// Throws NumericalError / ModelError for parameters where the priors
  /// cannot be built.
  Assembled assemble(const Eigen::VectorXd& theta) const;

  /// I x n_u map from random effects to the linear predictor.
  SparseMatrix loading(const EncodedRows& rows, const Assembled& a) const;
  /// X alpha + offset.
  Eigen::VectorXd fixed_predictor(const EncodedRows& rows, const Assembled& a) const;

  /// Fill-reducing ordering for the inner Hessian.
  const Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int>& ordering() const { return ordering_; }

  std::vector<RandomEffectLabel> random_effect_labels() const;
  /// u with projected blocks mapped to the structured field.
  Eigen::VectorXd structured_effects(const Eigen::VectorXd& u, const Assembled& a) const;

 private:
  void build_layout();
  Eigen::VectorXd start_alpha() const;

  ModelSpec spec_;
  std::shared_ptr<const Design> design_;
  EncodedRows rows_;
  Eigen::VectorXd y_;
  bool has_response_ = false;
  std::vector<std::string> warnings_;
  Index S_ = 1, C_ = 1, T_ = 1;
  Index n_u_ = 0;
  Index omega_offset_ = 0, epsilon_offset_ = 0, gamma_offset_ = 0, num_gamma_ = 0;
  bool sem_projected_ = false;
  bool dsem_projected_ = false;
  ParameterLayout layout_;
  Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> ordering_;
};

}  // namespace stgm
