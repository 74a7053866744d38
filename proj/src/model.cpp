#include "stgm/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include <Eigen/OrderingMethods>

#include "stgm/format.hpp"

namespace stgm {

std::string transform_name(Transform t) {
  switch (t) {
    case Transform::Identity: return "identity";
    case Transform::Log: return "log";
    case Transform::ScaledLogit: return "scaled_logit";
  }
  return "";
}

double to_natural(Transform t, double x) {
  switch (t) {
    case Transform::Identity: return x;
    case Transform::Log: return std::exp(x);
    case Transform::ScaledLogit: return 2.0 / (1.0 + std::exp(-x)) - 1.0;
  }
  return x;
}

double to_unconstrained(Transform t, double v) {
  switch (t) {
    case Transform::Identity: return v;
    case Transform::Log: return std::log(v);
    case Transform::ScaledLogit: return std::log((1.0 + v) / (1.0 - v));
  }
  return v;
}

double natural_derivative(Transform t, double x) {
  switch (t) {
    case Transform::Identity: return 1.0;
    case Transform::Log: return std::exp(x);
    case Transform::ScaledLogit: {
      double r = to_natural(t, x);
      return 0.5 * (1.0 - r * r);
    }
  }
  return 1.0;
}

std::vector<std::string> ParameterLayout::free_names() const {
  std::vector<std::string> out;
  for (auto i : free_) out.push_back(params_[i].name);
  return out;
}

std::optional<std::size_t> ParameterLayout::find(std::string_view name) const {
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].name == name) return i;
  return std::nullopt;
}

Eigen::VectorXd ParameterLayout::start() const {
  Eigen::VectorXd x(static_cast<Index>(free_.size()));
  for (std::size_t k = 0; k < free_.size(); ++k) {
    const auto& p = params_[free_[k]];
    x[static_cast<Index>(k)] = to_unconstrained(p.transform, p.start);
  }
  return x;
}

Eigen::VectorXd ParameterLayout::natural(const Eigen::VectorXd& theta) const {
  if (theta.size() != static_cast<Index>(free_.size()))
    throw ModelError("parameter vector has length " + std::to_string(theta.size()) + ", expected " +
                     std::to_string(free_.size()));
  Eigen::VectorXd out(static_cast<Index>(params_.size()));
  for (std::size_t i = 0; i < params_.size(); ++i) out[static_cast<Index>(i)] = params_[i].start;
  for (std::size_t k = 0; k < free_.size(); ++k) {
    const auto& p = params_[free_[k]];
    out[static_cast<Index>(free_[k])] = to_natural(p.transform, theta[static_cast<Index>(k)]);
  }
  return out;
}

Eigen::VectorXd ParameterLayout::unconstrained(const Eigen::VectorXd& natural_all) const {
  Eigen::VectorXd x(static_cast<Index>(free_.size()));
  for (std::size_t k = 0; k < free_.size(); ++k) {
    const auto& p = params_[free_[k]];
    x[static_cast<Index>(k)] = to_unconstrained(p.transform, natural_all[static_cast<Index>(free_[k])]);
  }
  return x;
}

namespace {

std::string row_message(std::size_t i, const std::string& msg) { return "row " + std::to_string(i + 1) + ": " + msg; }

bool variance_only(const RamModel& ram, std::size_t param) {
  bool any = false;
  for (const auto& t : ram.terms) {
    auto p = ram.term_param(t);
    if (!p || *p != param) continue;
    if (!t.is_variance() || t.lag != 0) return false;
    any = true;
  }
  return any;
}

bool projected_by_spec(const RamModel& ram, const std::map<std::string, double>& fixed, const std::string& prefix) {
  if (ram_is_rank_deficient(ram)) return true;
  for (const auto& t : ram.terms) {
    if (!t.is_variance() || t.lag != 0 || t.fixed()) continue;
    auto it = fixed.find(prefix + *t.param);
    if (it != fixed.end() && it->second == 0.0) return true;
  }
  return false;
}

void append_block(std::vector<Triplet>& trip, const SparseMatrix& m, Index offset) {
  for (Index k = 0; k < m.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(m, k); it; ++it) trip.emplace_back(offset + it.row(), offset + it.col(), it.value());
}

}  // namespace

Model::Model(ModelSpec spec, const DataTable& data, bool require_response) : spec_(std::move(spec)) {
  if (spec_.families.empty()) throw ModelError("no family given");
  // variables
  if (spec_.variables.empty()) {
    if (data.has(spec_.variable_column)) {
      for (const auto& v : data.text(spec_.variable_column))
        if (std::find(spec_.variables.begin(), spec_.variables.end(), v) == spec_.variables.end())
          spec_.variables.push_back(v);
    } else {
      spec_.variables.push_back(parse_formula(spec_.formula).response);
    }
  }
  C_ = static_cast<Index>(spec_.variables.size());
  if (spec_.families.size() != 1 && static_cast<Index>(spec_.families.size()) != C_)
    throw ModelError("expected 1 or " + std::to_string(C_) + " families, got " + std::to_string(spec_.families.size()));
  for (const auto* ram : {spec_.sem ? &*spec_.sem : nullptr, spec_.dsem ? &*spec_.dsem : nullptr}) {
    if (ram && ram->variables != spec_.variables)
      throw ModelError("path model variables differ from the declared variables");
  }
  // times
  if (spec_.times.empty()) {
    if (data.has(spec_.time_column)) {
      spec_.times = data.numeric(spec_.time_column);
      std::sort(spec_.times.begin(), spec_.times.end());
      spec_.times.erase(std::unique(spec_.times.begin(), spec_.times.end()), spec_.times.end());
    }
  }
  T_ = std::max<Index>(1, static_cast<Index>(spec_.times.size()));
  if (spec_.dsem && T_ < 1 + spec_.dsem->max_lag)
    throw ModelError("the lagged path model needs at least " + std::to_string(1 + spec_.dsem->max_lag) + " times");
  S_ = spec_.domain.num_nodes();
  if (spec_.space_columns.empty()) {
    if (spec_.domain.kind() == DomainKind::Mesh)
      spec_.space_columns = {"x", "y"};
    else if (spec_.domain.kind() != DomainKind::SingleSite)
      spec_.space_columns = {"node"};
  }

  design_ = std::make_shared<const Design>(spec_.formula, data);
  for (const auto& w : design_->training().warnings) warnings_.push_back(w);
  rows_ = encode(data, false);

  const Index n = rows_.size();
  if (require_response) {
    const auto& y = data.numeric(design_->formula().response);
    y_ = Eigen::Map<const Eigen::VectorXd>(y.data(), n);
    for (Index i = 0; i < n; ++i) {
      try {
        family(rows_.var[i]).check_response(y_[i]);
      } catch (const ModelError& e) {
        throw ModelError(row_message(static_cast<std::size_t>(i), e.what()));
      }
    }
    has_response_ = true;
  } else if (data.has(design_->formula().response)) {
    const Column& c = data.column(design_->formula().response);
    if (c.numeric) {
      y_ = Eigen::Map<const Eigen::VectorXd>(c.numbers.data(), n);
      has_response_ = true;
    }
  }
  if (n == 0) throw ModelError("data table has no rows");

  // random-effect layout
  Index off = 0;
  omega_offset_ = off;
  if (spec_.sem) off += S_ * C_;
  epsilon_offset_ = off;
  if (spec_.dsem) off += S_ * C_ * T_;
  gamma_offset_ = off;
  num_gamma_ = rows_.design.Z.cols();
  off += num_gamma_;
  n_u_ = off;
  if (spec_.sem) sem_projected_ = projected_by_spec(*spec_.sem, spec_.fixed, "sem:");
  if (spec_.dsem) dsem_projected_ = projected_by_spec(*spec_.dsem, spec_.fixed, "dsem:");
  for (const auto* ram : {spec_.sem ? &*spec_.sem : nullptr, spec_.dsem ? &*spec_.dsem : nullptr})
    if (ram)
      for (const auto& note : ram->notes) warnings_.push_back(note);

  build_layout();

  ordering_.setIdentity(n_u_);
  if (n_u_ > 0) {
    try {
      Assembled a = assemble(layout_.start());
      SparseMatrix m = loading(rows_, a);
      SparseMatrix mtm = m.transpose() * m;
      SparseMatrix h = a.Q.matrix() + mtm;
      Eigen::AMDOrdering<int> amd;
      Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> pinv;
      amd(h, pinv);
      ordering_ = pinv.inverse();
    } catch (const NumericalError&) {
      ordering_.setIdentity(n_u_);
    }
  }
}

const Family& Model::family(Index var) const {
  return spec_.families.size() == 1 ? spec_.families[0] : spec_.families[static_cast<std::size_t>(var)];
}

std::string Model::time_label(Index t) const {
  if (spec_.times.empty()) return "0";
  return format_double(spec_.times[static_cast<std::size_t>(t)]);
}

EncodedRows Model::encode(const DataTable& data, bool per_row_errors) const {
  EncodedRows out;
  const std::size_t n = data.rows();
  out.errors.assign(n, "");
  auto fail = [&](std::size_t i, const std::string& msg) {
    if (!per_row_errors) throw ModelError(row_message(i, msg));
    if (out.errors[i].empty()) out.errors[i] = msg;
  };

  try {
    out.design = design_->apply(data);
  } catch (const ModelError& e) {
    if (!per_row_errors) throw;
    // encode row by row so the failing rows can be reported
    const DesignBlocks& tb = design_->training();
    out.design.X = Eigen::MatrixXd::Zero(static_cast<Index>(n), tb.X.cols());
    out.design.offset = Eigen::VectorXd::Zero(static_cast<Index>(n));
    out.design.x_names = tb.x_names;
    out.design.z_names = tb.z_names;
    out.design.penalties = tb.penalties;
    out.design.smooths = tb.smooths;
    std::vector<Triplet> zt;
    for (std::size_t i = 0; i < n; ++i) {
      try {
        DesignBlocks b = design_->apply(data.select_rows({i}));
        out.design.X.row(static_cast<Index>(i)) = b.X.row(0);
        out.design.offset[static_cast<Index>(i)] = b.offset[0];
        for (Index k = 0; k < b.Z.outerSize(); ++k)
          for (SparseMatrix::InnerIterator it(b.Z, k); it; ++it)
            zt.emplace_back(static_cast<Index>(i), it.col(), it.value());
      } catch (const ModelError& ee) {
        fail(i, ee.what());
      }
    }
    out.design.Z.resize(static_cast<Index>(n), tb.Z.cols());
    out.design.Z.setFromTriplets(zt.begin(), zt.end());
  }

  // variable
  out.var.assign(n, 0);
  if (data.has(spec_.variable_column)) {
    const auto& v = data.column(spec_.variable_column).text;
    for (std::size_t i = 0; i < n; ++i) {
      auto it = std::find(spec_.variables.begin(), spec_.variables.end(), v[i]);
      if (it == spec_.variables.end())
        fail(i, "variable '" + v[i] + "' is not declared");
      else
        out.var[i] = static_cast<Index>(it - spec_.variables.begin());
    }
  } else if (C_ > 1) {
    throw ModelError("missing variable column '" + spec_.variable_column + "'");
  }

  // time
  out.time.assign(n, 0);
  if (data.has(spec_.time_column) && !spec_.times.empty()) {
    const Column& col = data.column(spec_.time_column);
    for (std::size_t i = 0; i < n; ++i) {
      auto v = parse_double(trim(col.text[i]));
      auto it = v ? std::find(spec_.times.begin(), spec_.times.end(), *v) : spec_.times.end();
      if (it == spec_.times.end())
        fail(i, "time '" + col.text[i] + "' is not declared");
      else
        out.time[i] = static_cast<Index>(it - spec_.times.begin());
    }
  } else if (T_ > 1) {
    throw ModelError("missing time column '" + spec_.time_column + "'");
  }

  // space
  out.proj.assign(n, ProjectorRow::unit(0));
  const bool need_space = (spec_.sem || spec_.dsem) && spec_.domain.kind() != DomainKind::SingleSite;
  if (need_space) {
    for (const auto& c : spec_.space_columns)
      if (!data.has(c)) throw ModelError("missing space column '" + c + "'");
    if (spec_.domain.kind() == DomainKind::Mesh) {
      if (spec_.space_columns.size() != 2) throw ModelError("a mesh needs two space columns");
      const Column& cx = data.column(spec_.space_columns[0]);
      const Column& cy = data.column(spec_.space_columns[1]);
      for (std::size_t i = 0; i < n; ++i) {
        auto x = parse_double(trim(cx.text[i]));
        auto y = parse_double(trim(cy.text[i]));
        if (!x || !y) {
          fail(i, "non-numeric coordinates");
          continue;
        }
        auto row = spec_.domain.locate({*x, *y});
        if (!row)
          fail(i, "point (" + format_double(*x) + ", " + format_double(*y) + ") outside the mesh");
        else
          out.proj[i] = *row;
      }
    } else {
      if (spec_.space_columns.size() != 1) throw ModelError("a graph or stream domain needs one node column");
      const Column& cn = data.column(spec_.space_columns[0]);
      for (std::size_t i = 0; i < n; ++i) {
        auto v = parse_double(trim(cn.text[i]));
        if (!v || *v != std::floor(*v)) {
          fail(i, "node id '" + cn.text[i] + "' is not an integer");
          continue;
        }
        auto row = spec_.domain.node_row(static_cast<Index>(*v));
        if (!row)
          fail(i, "unknown node id " + cn.text[i]);
        else
          out.proj[i] = *row;
      }
    }
  }
  return out;
}

Eigen::VectorXd Model::start_alpha() const {
  const Index p = rows_.design.X.cols();
  if (p == 0 || !has_response_) return Eigen::VectorXd::Zero(p);
  std::vector<double> sum(static_cast<std::size_t>(C_), 0.0), cnt(static_cast<std::size_t>(C_), 0.0);
  for (Index i = 0; i < rows_.size(); ++i) {
    sum[static_cast<std::size_t>(rows_.var[i])] += y_[i];
    cnt[static_cast<std::size_t>(rows_.var[i])] += 1.0;
  }
  Eigen::VectorXd z(rows_.size());
  for (Index i = 0; i < rows_.size(); ++i) {
    const auto c = static_cast<std::size_t>(rows_.var[i]);
    double m = sum[c] / cnt[c];
    const Family& f = family(rows_.var[i]);
    if (f.link == Link::Log) m = std::max(m, 1e-2);
    if (f.link == Link::Logit) m = std::clamp(m, 0.01, 0.99);
    z[i] = f.link_function(m) - rows_.design.offset[i];
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(rows_.design.X);
  Eigen::VectorXd a = qr.solve(z);
  for (Index j = 0; j < a.size(); ++j)
    if (!std::isfinite(a[j])) a[j] = 0.0;
  return a;
}

void Model::build_layout() {
  auto& ps = layout_.params_;
  Eigen::VectorXd a0 = start_alpha();
  for (Index j = 0; j < rows_.design.X.cols(); ++j) {
    ParamInfo p;
    p.name = "alpha:" + rows_.design.x_names[static_cast<std::size_t>(j)];
    p.kind = ParamKind::Alpha;
    p.start = a0[j];
    p.target = static_cast<std::size_t>(j);
    ps.push_back(p);
  }
  auto add_ram = [&](const RamModel& ram, ParamKind kind, const std::string& prefix) {
    for (std::size_t k = 0; k < ram.params.size(); ++k) {
      ParamInfo p;
      p.name = prefix + ram.params[k].label;
      p.kind = kind;
      p.transform = variance_only(ram, k) ? Transform::Log : Transform::Identity;
      p.start = ram.params[k].start;
      if (p.transform == Transform::Log) p.start = std::abs(p.start);
      p.target = k;
      ps.push_back(p);
    }
  };
  if (spec_.sem) add_ram(*spec_.sem, ParamKind::Sem, "sem:");
  if (spec_.dsem) add_ram(*spec_.dsem, ParamKind::Dsem, "dsem:");
  if ((spec_.sem || spec_.dsem) && spec_.domain.has_parameter()) {
    ParamInfo p;
    p.name = "spatial:" + spec_.domain.parameter_name();
    p.kind = ParamKind::Spatial;
    p.transform = spec_.domain.kind() == DomainKind::Areal ? Transform::ScaledLogit : Transform::Log;
    p.start = spec_.domain.default_parameter();
    ps.push_back(p);
  }
  for (Index c = 0; c < C_; ++c) {
    const Family& f = family(c);
    if (!f.has_dispersion()) continue;
    double n = 0, s = 0, s2 = 0;
    for (Index i = 0; i < rows_.size(); ++i)
      if (rows_.var[i] == c) {
        n += 1;
        if (has_response_) {
          s += y_[i];
          s2 += y_[i] * y_[i];
        }
      }
    if (n == 0) continue;
    ParamInfo p;
    p.name = "dispersion:" + spec_.variables[static_cast<std::size_t>(c)];
    p.kind = ParamKind::Dispersion;
    p.transform = Transform::Log;
    p.start = 1.0;
    if (f.distribution == Distribution::Gaussian && has_response_ && n > 1) {
      double var = (s2 - s * s / n) / (n - 1);
      if (var > 1e-12) p.start = std::sqrt(var);
    }
    p.target = static_cast<std::size_t>(c);
    ps.push_back(p);
  }
  for (std::size_t z = 0; z < rows_.design.penalties.size(); ++z) {
    ParamInfo p;
    p.name = "lambda:" + rows_.design.penalties[z].name;
    p.kind = ParamKind::Lambda;
    p.transform = Transform::Log;
    p.start = 1.0;
    p.target = z;
    ps.push_back(p);
  }

  auto lookup = [&](const std::string& name) -> ParamInfo& {
    for (auto& p : ps)
      if (p.name == name) return p;
    throw ModelError("unknown parameter: " + name);
  };
  for (const auto& name : spec_.bounded) lookup(name).transform = Transform::ScaledLogit;
  for (const auto& [name, v] : spec_.starts) lookup(name).start = v;
  for (const auto& [name, v] : spec_.fixed) {
    auto& p = lookup(name);
    p.fixed = true;
    p.start = v;
  }
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const auto& p = ps[i];
    if (!std::isfinite(p.start)) throw ModelError("parameter " + p.name + " has a non-finite value");
    if (p.fixed) continue;
    if (p.transform == Transform::Log && !(p.start > 0.0))
      throw ModelError("parameter " + p.name + " needs a positive start value");
    if (p.transform == Transform::ScaledLogit && !(std::abs(p.start) < 1.0))
      throw ModelError("parameter " + p.name + " needs a start value inside (-1, 1)");
    layout_.free_.push_back(i);
  }
}

Assembled Model::assemble(const Eigen::VectorXd& theta) const {
  Assembled a;
  a.natural = layout_.natural(theta);
  a.alpha = Eigen::VectorXd::Zero(rows_.design.X.cols());
  a.dispersion = Eigen::VectorXd::Ones(C_);
  a.lambda.assign(rows_.design.penalties.size(), 1.0);
  std::vector<double> sem_values(spec_.sem ? spec_.sem->params.size() : 0);
  std::vector<double> dsem_values(spec_.dsem ? spec_.dsem->params.size() : 0);
  double spatial_param = spec_.domain.has_parameter() ? spec_.domain.default_parameter() : 0.0;
  const auto& ps = layout_.params_;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const double v = a.natural[static_cast<Index>(i)];
    switch (ps[i].kind) {
      case ParamKind::Alpha: a.alpha[static_cast<Index>(ps[i].target)] = v; break;
      case ParamKind::Sem: sem_values[ps[i].target] = v; break;
      case ParamKind::Dsem: dsem_values[ps[i].target] = v; break;
      case ParamKind::Spatial: spatial_param = v; break;
      case ParamKind::Dispersion: a.dispersion[static_cast<Index>(ps[i].target)] = v; break;
      case ParamKind::Lambda: a.lambda[ps[i].target] = v; break;
    }
  }
  for (std::size_t i = 0; i < ps.size(); ++i)
    if (ps[i].kind == ParamKind::Dispersion && !(a.natural[static_cast<Index>(i)] >= 0.0))
      throw ModelError("dispersion must not be negative");
  for (double l : a.lambda)
    if (!(l > 0.0)) throw ModelError("smoothing parameter must be positive");

  std::vector<Triplet> trip;
  double logdet = 0.0;
  if (spec_.sem || spec_.dsem) a.spatial = spec_.domain.precision(spatial_param);
  const double S = static_cast<double>(S_);
  auto block = [&](const RamModel& ram, const std::vector<double>& values, Index times, bool projected,
                   RamMatrices& mats, SparseSymMatrix& inner, Eigen::MatrixXd& transform, Index offset) {
    mats = assemble_ram(ram, values, times);
    const Index n = mats.dim();
    if (projected) {
      transform = projection_matrix(mats);
      SparseMatrix eye(n, n);
      eye.setIdentity();
      append_block(trip, kronecker(eye, a.spatial.matrix()), offset);
      logdet += static_cast<double>(n) * a.spatial.logdet();
    } else {
      inner = precision_from_ram(mats);
      append_block(trip, kronecker(inner.matrix(), a.spatial.matrix()), offset);
      logdet += S * inner.logdet() + static_cast<double>(n) * a.spatial.logdet();
    }
  };
  if (spec_.sem)
    block(*spec_.sem, sem_values, 1, sem_projected_, a.sem_ram, a.sem_precision, a.sem_transform, omega_offset_);
  if (spec_.dsem)
    block(*spec_.dsem, dsem_values, T_, dsem_projected_, a.dsem_ram, a.dsem_precision, a.dsem_transform,
          epsilon_offset_);
  for (std::size_t z = 0; z < rows_.design.penalties.size(); ++z) {
    const auto& pb = rows_.design.penalties[z];
    for (Index k = 0; k < pb.penalty.outerSize(); ++k)
      for (SparseMatrix::InnerIterator it(pb.penalty, k); it; ++it) {
        trip.emplace_back(gamma_offset_ + pb.start + it.row(), gamma_offset_ + pb.start + it.col(),
                          a.lambda[z] * it.value());
        if (it.row() == it.col()) logdet += std::log(a.lambda[z] * it.value());
      }
  }
  SparseMatrix q(n_u_, n_u_);
  q.setFromTriplets(trip.begin(), trip.end());
  a.Q = SparseSymMatrix(std::move(q), false);
  a.logdet_q = logdet;
  return a;
}

SparseMatrix Model::loading(const EncodedRows& rows, const Assembled& a) const {
  std::vector<Triplet> trip;
  const Index n = rows.size();
  for (Index i = 0; i < n; ++i) {
    if (!rows.ok(i)) continue;
    const ProjectorRow& pr = rows.proj[static_cast<std::size_t>(i)];
    const Index c = rows.var[static_cast<std::size_t>(i)];
    const Index t = rows.time[static_cast<std::size_t>(i)];
    auto add = [&](Index offset, Index inner_row, Index inner_dim, bool projected, const Eigen::MatrixXd& tr) {
      for (int k = 0; k < pr.count; ++k) {
        const Index s = pr.node[static_cast<std::size_t>(k)];
        const double w = pr.weight[static_cast<std::size_t>(k)];
        if (!projected) {
          trip.emplace_back(i, offset + inner_row * S_ + s, w);
          continue;
        }
        for (Index j = 0; j < inner_dim; ++j) {
          const double v = tr(inner_row, j);
          if (v != 0.0) trip.emplace_back(i, offset + j * S_ + s, w * v);
        }
      }
    };
    if (spec_.sem) add(omega_offset_, c, C_, sem_projected_, a.sem_transform);
    if (spec_.dsem) add(epsilon_offset_, t * C_ + c, C_ * T_, dsem_projected_, a.dsem_transform);
  }
  const SparseMatrix& z = rows.design.Z;
  for (Index k = 0; k < z.outerSize(); ++k)
    for (SparseMatrix::InnerIterator it(z, k); it; ++it)
      if (rows.ok(it.row())) trip.emplace_back(it.row(), gamma_offset_ + it.col(), it.value());
  SparseMatrix m(n, n_u_);
  m.setFromTriplets(trip.begin(), trip.end());
  return m;
}

Eigen::VectorXd Model::fixed_predictor(const EncodedRows& rows, const Assembled& a) const {
  return rows.design.X * a.alpha + rows.design.offset;
}

std::vector<RandomEffectLabel> Model::random_effect_labels() const {
  std::vector<RandomEffectLabel> out;
  out.reserve(static_cast<std::size_t>(n_u_));
  if (spec_.sem)
    for (Index c = 0; c < C_; ++c)
      for (Index s = 0; s < S_; ++s) out.push_back({"omega", spec_.variables[static_cast<std::size_t>(c)], "", s});
  if (spec_.dsem)
    for (Index t = 0; t < T_; ++t)
      for (Index c = 0; c < C_; ++c)
        for (Index s = 0; s < S_; ++s)
          out.push_back({"epsilon", spec_.variables[static_cast<std::size_t>(c)], time_label(t), s});
  for (const auto& name : rows_.design.z_names) out.push_back({"gamma", name, "", 0});
  return out;
}

Eigen::VectorXd Model::structured_effects(const Eigen::VectorXd& u, const Assembled& a) const {
  Eigen::VectorXd out = u;
  auto map = [&](Index offset, Index inner_dim, const Eigen::MatrixXd& tr) {
    Eigen::Map<const Eigen::MatrixXd> white(u.data() + offset, S_, inner_dim);
    Eigen::MatrixXd structured = white * tr.transpose();
    out.segment(offset, S_ * inner_dim) = Eigen::Map<const Eigen::VectorXd>(structured.data(), S_ * inner_dim);
  };
  if (spec_.sem && sem_projected_) map(omega_offset_, C_, a.sem_transform);
  if (spec_.dsem && dsem_projected_) map(epsilon_offset_, C_ * T_, a.dsem_transform);
  return out;
}

}  // namespace stgm
