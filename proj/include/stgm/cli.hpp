#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "stgm/fit.hpp"
#include "stgm/model.hpp"

namespace stgm {

inline constexpr const char* kVersion = "stgm 0.1.0";

/// Exit codes of the command-line front end.
enum ExitCode : int { kExitOk = 0, kExitConfigError = 1, kExitNotConverged = 2, kExitAllRowsFailed = 3 };

/// Parsed JSON run configuration. Relative paths are resolved against the
/// directory holding the configuration file.
struct RunConfig {
  std::filesystem::path base_dir;
  std::string data_path;
  std::string formula = "y ~ 1";
  std::optional<std::string> sem_text;
  std::optional<std::string> dsem_text;
  std::string spatial_type = "none";
  std::string spatial_path;
  std::optional<Index> spatial_nodes;
  ModelSpec spec;  // everything except the parsed domain and RAMs
  std::string output_dir = "out";
  std::uint64_t seed = 1;
  FitOptions fit_options;
  // simulate
  std::string truth_path;
  std::string design_path;
  int samples_per_cell = 0;
  // predict / integrate
  std::string fit_path;
  std::string predict_path;
  std::string grid_path;
  std::string weight_column = "weight";
};

struct CliOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
};

RunConfig load_config(const std::string& path, const CliOverrides& overrides = {});
RunConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir,
                       const CliOverrides& overrides = {});

/// Reads the spatial file and the path models named by the config.
ModelSpec build_spec(const RunConfig& config);

int cmd_fit(const RunConfig& config, std::ostream& log);
int cmd_simulate(const RunConfig& config, std::ostream& log);
int cmd_predict(const RunConfig& config, std::ostream& log);
int cmd_integrate(const RunConfig& config, std::ostream& log);

/// Full front end: `stgm fit|simulate|predict|integrate --config path
/// [--seed n] [--out dir] [--threads n]`. Errors print one `error: ...`
/// line to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace stgm
