#include "support.hpp"

#include <filesystem>
#include <sstream>

#include "stgm/format.hpp"

namespace support {

stgm::SpatialDomain grid_mesh(int nx, int ny, double x0, double x1, double y0, double y1) {
  std::vector<stgm::Point2> v;
  std::vector<std::array<stgm::Index, 3>> t;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i)
      v.push_back({x0 + (x1 - x0) * i / (nx - 1.0), y0 + (y1 - y0) * j / (ny - 1.0)});
  auto id = [nx](int i, int j) { return static_cast<stgm::Index>(j * nx + i); };
  for (int j = 0; j + 1 < ny; ++j)
    for (int i = 0; i + 1 < nx; ++i) {
      t.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      t.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  return stgm::SpatialDomain::mesh(std::move(v), std::move(t));
}

stgm::SpatialDomain lattice_graph(int nx, int ny) {
  std::vector<std::array<stgm::Index, 2>> e;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      if (i + 1 < nx) e.push_back({j * nx + i, j * nx + i + 1});
      if (j + 1 < ny) e.push_back({j * nx + i, (j + 1) * nx + i});
    }
  return stgm::SpatialDomain::areal(e, static_cast<stgm::Index>(nx * ny));
}

DenseRam dense_ram(const stgm::RamModel& ram, const std::vector<double>& values, int times) {
  const int C = static_cast<int>(ram.variables.size());
  const int n = C * times;
  DenseRam d{Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n)};
  auto index = [&](const std::string& name) {
    for (int c = 0; c < C; ++c)
      if (ram.variables[static_cast<std::size_t>(c)] == name) return c;
    return -1;
  };
  for (const auto& term : ram.terms) {
    double v = term.value;
    if (term.param)
      for (std::size_t k = 0; k < ram.params.size(); ++k)
        if (ram.params[k].label == *term.param) v = values[k];
    const int from = index(term.from), to = index(term.to);
    for (int t = term.lag; t < times; ++t) {
      const int r = t * C + to, c = (t - term.lag) * C + from;
      if (term.heads == 1) {
        d.P(r, c) += v;
      } else if (term.lag == 0) {
        d.G(t * C + std::max(from, to), t * C + std::min(from, to)) = v;
      } else {
        d.G(r, c) = v;
      }
    }
  }
  return d;
}

Eigen::MatrixXd dense_covariance(const DenseRam& d) {
  const auto n = d.P.rows();
  Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n) - d.P;
  Eigen::MatrixXd t = a.fullPivLu().solve(d.G);
  return t * t.transpose();
}

double dense_mvn_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  Eigen::VectorXd r = x - mean;
  Eigen::VectorXd z = llt.matrixL().solve(r);
  double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * (static_cast<double>(x.size()) * std::log(2.0 * M_PI) + logdet + z.squaredNorm());
}

std::vector<std::string> var_names(int C) {
  std::vector<std::string> v;
  for (int c = 0; c < C; ++c) v.push_back("V" + std::to_string(c));
  return v;
}

RandomRam random_ram(std::mt19937_64& rng, int C, int max_lag, bool dynamic) {
  std::uniform_real_distribution<double> coef(-0.6, 0.6), sd(0.5, 1.5), u(0.0, 1.0);
  auto names = var_names(C);
  std::ostringstream text;
  int label = 0;
  auto lag_field = [&](int lag) { return dynamic ? std::to_string(lag) + ", " : std::string(); };
  for (int to = 0; to < C; ++to)
    for (int from = 0; from < C; ++from)
      for (int lag = 0; lag <= (dynamic ? max_lag : 0); ++lag) {
        if (lag == 0 && from >= to) continue;  // acyclic contemporaneous paths
        if (u(rng) > 0.5) continue;
        text << names[static_cast<std::size_t>(from)] << " -> " << names[static_cast<std::size_t>(to)] << ", "
             << lag_field(lag) << "b" << label++ << ", " << stgm::format_double(coef(rng)) << "\n";
      }
  for (int c = 0; c < C; ++c)
    text << names[static_cast<std::size_t>(c)] << " <-> " << names[static_cast<std::size_t>(c)] << ", " << lag_field(0)
         << "s" << c << ", " << stgm::format_double(sd(rng)) << "\n";
  if (C >= 2 && u(rng) < 0.5)
    text << names[0] << " <-> " << names[1] << ", " << lag_field(0) << "cov01, " << stgm::format_double(coef(rng))
         << "\n";
  RandomRam r;
  r.ram = dynamic ? stgm::parse_dsem(text.str(), names) : stgm::parse_sem(text.str(), names);
  for (const auto& p : r.ram.params) r.values.push_back(p.start);
  return r;
}

std::string csv(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream out;
  for (std::size_t j = 0; j < header.size(); ++j) out << (j ? "," : "") << header[j];
  out << "\n";
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < r.size(); ++j) out << (j ? "," : "") << r[j];
    out << "\n";
  }
  return out.str();
}

std::string temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("stgm_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

}  // namespace support
