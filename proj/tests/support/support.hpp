#pragma once

// Test-side oracles and generators. Everything here is computed with
// dense linear algebra directly from model definitions, independently of
// the sparse library paths under test.

#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stgm/notation.hpp"
#include "stgm/spatial_domain.hpp"

namespace support {

/// Regular triangulation of [x0, x1] x [y0, y1] with nx x ny vertices.
stgm::SpatialDomain grid_mesh(int nx, int ny, double x0 = 0.0, double x1 = 1.0, double y0 = 0.0, double y1 = 1.0);

/// Rook-adjacency lattice of nx x ny cells, node id = j * nx + i.
stgm::SpatialDomain lattice_graph(int nx, int ny);

/// Dense P (to, from) and G unrolled over `times` straight from the terms.
struct DenseRam {
  Eigen::MatrixXd P;
  Eigen::MatrixXd G;
};
DenseRam dense_ram(const stgm::RamModel& ram, const std::vector<double>& values, int times);

/// (I - P)^{-1} G G^T (I - P)^{-T}.
Eigen::MatrixXd dense_covariance(const DenseRam& d);

/// Log density of N(0, cov) at x via dense Cholesky / eigen decomposition.
double dense_mvn_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov);

/// Random full-rank arrow-and-lag model over C variables with lags <= max_lag.
struct RandomRam {
  stgm::RamModel ram;
  std::vector<double> values;
};
RandomRam random_ram(std::mt19937_64& rng, int C, int max_lag, bool dynamic);

std::vector<std::string> var_names(int C);

/// Row-major numeric CSV text from columns.
std::string csv(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows);

/// Fresh empty directory under the system temp dir.
std::string temp_dir(const std::string& name);

}  // namespace support
