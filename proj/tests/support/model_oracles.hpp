#pragma once

// Dense model-level oracles: marginal Gaussian likelihoods built from
// dense RAM covariances and inverse spatial precisions, plus small data
// generators shared by unit and acceptance tests.

#include <map>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "stgm/model.hpp"
#include "support.hpp"

namespace support {

struct Sample {
  std::string var;
  double time = 0;
  double x = 0, y = 0;
  double z = 0;
  double off = 0;
  double obs = 0;
};

/// Columns var, time, x, y, z, o, obs.
stgm::DataTable make_table(const std::vector<Sample>& rows);

/// `per` samples for every variable and time (times 2000, 2001, ...) at
/// uniform locations in the unit square, standard normal `obs`.
std::vector<Sample> random_samples(std::mt19937_64& rng, const std::vector<std::string>& vars, int times, int per);

/// Start values with the named natural values substituted, on the
/// unconstrained scale.
Eigen::VectorXd theta_for(const stgm::Model& m, const std::map<std::string, double>& values);
double natural_of(const stgm::Model& m, const Eigen::VectorXd& theta, const std::string& name);
std::vector<double> ram_values(const stgm::Model& m, const Eigen::VectorXd& theta, const stgm::RamModel& ram,
                               const std::string& prefix);

/// Barycentric weights of each row spread over the S nodes.
Eigen::MatrixXd dense_projector(const stgm::SpatialDomain& d, const stgm::DataTable& data);

/// Covariance of the random part of the linear predictor at the rows of
/// `data`.
Eigen::MatrixXd dense_eta_covariance(const stgm::Model& m, const Eigen::VectorXd& theta, const stgm::DataTable& data);

/// Exact marginal negative log-likelihood of an all-Gaussian model.
double dense_gaussian_nll(const stgm::Model& m, const Eigen::VectorXd& theta, const stgm::DataTable& data);

/// Formula and variables on a 3 x 3 unit-square mesh.
stgm::ModelSpec mesh_spec(const std::string& formula, const std::vector<std::string>& vars);

/// n-node Gauss-Hermite rule (weight exp(-x^2)) by Golub-Welsch.
void gauss_hermite(int n, Eigen::VectorXd& x, Eigen::VectorXd& w);

}  // namespace support
