#include "stgm/simulate.hpp"

#include <cmath>

#include "stgm/format.hpp"
#include "stgm/gmrf.hpp"

namespace stgm {

std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

Simulation simulate(const ModelSpec& spec, const DataTable& design, const std::map<std::string, double>& truth,
                    std::uint64_t seed) {
  ModelSpec s = spec;
  for (const auto& [name, v] : truth) s.fixed[name] = v;
  Model model(s, design, false);
  Assembled a = model.assemble(model.layout().start());
  const Index S = model.num_sites(), C = model.num_vars(), T = model.num_times();

  Simulation out;
  out.u = Eigen::VectorXd::Zero(model.num_random());
  auto field = [&](Index offset, Index inner_dim, bool projected, const SparseSymMatrix& inner, std::uint64_t stream) {
    auto rng = substream(seed, stream);
    Eigen::MatrixXd v = projected ? gmrf_sample(SparseSymMatrix::identity(inner_dim), a.spatial, rng)
                                  : gmrf_sample(inner, a.spatial, rng);
    out.u.segment(offset, S * inner_dim) = Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
  };
  if (model.has_omega()) field(model.omega_offset(), C, model.sem_projected(), a.sem_precision, 1);
  if (model.has_epsilon()) field(model.epsilon_offset(), C * T, model.dsem_projected(), a.dsem_precision, 2);
  {
    auto rng = substream(seed, 3);
    const Index k = model.num_random() - model.gamma_offset();
    if (k > 0) {
      Eigen::MatrixXd z = standard_normal(k, 1, rng);
      for (Index j = 0; j < k; ++j) {
        const Index idx = model.gamma_offset() + j;
        out.u[idx] = z(j, 0) / std::sqrt(a.Q.coeff(idx, idx));
      }
    }
  }
  SparseMatrix m = model.loading(model.rows(), a);
  out.eta = model.fixed_predictor(model.rows(), a) + m * out.u;
  out.mu.resize(out.eta.size());
  std::vector<double> y(static_cast<std::size_t>(out.eta.size()));
  auto rng = substream(seed, 4);
  for (Index i = 0; i < out.eta.size(); ++i) {
    const Index c = model.rows().var[static_cast<std::size_t>(i)];
    const Family& f = model.family(c);
    out.mu[i] = f.inverse_link(out.eta[i]);
    const double disp = a.dispersion[c];
    if (f.has_dispersion() && disp == 0.0)
      y[static_cast<std::size_t>(i)] = out.mu[i];
    else
      y[static_cast<std::size_t>(i)] = draw_response(f, out.mu[i], disp, rng);
  }
  out.data = design;
  out.data.set_numeric_column(model.design().formula().response, y);
  return out;
}

DataTable generate_design(const ModelSpec& spec, int per_cell, std::uint64_t seed) {
  if (per_cell < 1) throw ModelError("samples per variable and time must be positive");
  if (spec.variables.empty()) throw ModelError("variables must be declared to generate a design");
  auto rng = substream(seed, 5);
  const SpatialDomain& d = spec.domain;
  std::vector<double> times = spec.times.empty() ? std::vector<double>{0.0} : spec.times;
  std::vector<std::string> var, time, c1, c2;
  double x0 = 0, x1 = 0, y0 = 0, y1 = 0;
  if (d.kind() == DomainKind::Mesh) {
    const auto& v = d.mesh_payload().vertices;
    x0 = x1 = v[0].x;
    y0 = y1 = v[0].y;
    for (const auto& p : v) {
      x0 = std::min(x0, p.x), x1 = std::max(x1, p.x);
      y0 = std::min(y0, p.y), y1 = std::max(y1, p.y);
    }
  }
  std::uniform_real_distribution<double> ux(x0, x1), uy(y0, y1);
  std::uniform_int_distribution<Index> un(0, d.num_nodes() - 1);
  for (const auto& name : spec.variables)
    for (double t : times)
      for (int k = 0; k < per_cell; ++k) {
        var.push_back(name);
        time.push_back(format_double(t));
        if (d.kind() == DomainKind::Mesh) {
          Point2 p;
          int tries = 0;
          do {
            p = {ux(rng), uy(rng)};
            if (++tries > 100000) throw ModelError("cannot place samples inside the mesh");
          } while (!d.locate(p));
          c1.push_back(format_double(p.x));
          c2.push_back(format_double(p.y));
        } else if (d.kind() != DomainKind::SingleSite) {
          c1.push_back(std::to_string(un(rng)));
        }
      }
  DataTable out;
  out.add_text_column(spec.variable_column, var);
  out.add_text_column(spec.time_column, time);
  std::vector<std::string> cols = spec.space_columns;
  if (cols.empty()) {
    if (d.kind() == DomainKind::Mesh) cols = {"x", "y"};
    else if (d.kind() != DomainKind::SingleSite) cols = {"node"};
  }
  if (d.kind() == DomainKind::Mesh) {
    out.add_text_column(cols.at(0), c1);
    out.add_text_column(cols.at(1), c2);
  } else if (d.kind() != DomainKind::SingleSite) {
    out.add_text_column(cols.at(0), c1);
  }
  return out;
}

}  // namespace stgm
