#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>

#include "stgm/model.hpp"

namespace stgm {

/// Independent generator for sub-stream `stream` of a run seeded by `seed`.
std::mt19937_64 substream(std::uint64_t seed, std::uint64_t stream);

struct Simulation {
  DataTable data;
  Eigen::VectorXd u;
  Eigen::VectorXd eta;
  Eigen::VectorXd mu;
};

/// Draws random effects and responses at the rows of `design`. Parameters
/// named in `truth` are set to the given natural values; the others keep
/// their start values. Throws ModelError for unknown names.
Simulation simulate(const ModelSpec& spec, const DataTable& design, const std::map<std::string, double>& truth,
                    std::uint64_t seed);

/// Sampling rows (variable, time, location) placed uniformly on the
/// domain: `per_cell` samples for every variable and time.
DataTable generate_design(const ModelSpec& spec, int per_cell, std::uint64_t seed);

}  // namespace stgm
