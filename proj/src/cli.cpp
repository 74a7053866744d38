#include "stgm/cli.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include <CLI11.hpp>
#include <json.hpp>

#include "stgm/format.hpp"
#include "stgm/simulate.hpp"

namespace stgm {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ModelError("cannot open file: " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return p;
  fs::path q(p);
  return q.is_absolute() ? q.string() : (base / q).string();
}

std::string num(double v) {
  if (std::isnan(v)) return "NA";
  return format_double(v);
}

template <class T>
T get(const json& j, const char* key, const T& fallback) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  try {
    return j[key].get<T>();
  } catch (const json::exception&) {
    throw ModelError(std::string("config: key '") + key + "' has the wrong type");
  }
}

Family family_from(const json& j) {
  if (!j.is_object() || !j.contains("distribution")) throw ModelError("config: family needs a 'distribution'");
  return Family::parse(get<std::string>(j, "distribution", ""), get<std::string>(j, "link", ""));
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw ModelError("config: unknown key '" + it.key() + "' in " + where);
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ModelError("cannot write file: " + p.string());
  return out;
}

struct LoadedFit {
  std::vector<std::string> names;
  Eigen::VectorXd theta;
  Eigen::MatrixXd covariance;
};

LoadedFit load_fit(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    throw ModelError("cannot parse fit file " + path + ": " + e.what());
  }
  LoadedFit f;
  f.names = get<std::vector<std::string>>(j, "parameter_names", {});
  auto theta = get<std::vector<double>>(j, "theta", {});
  if (theta.size() != f.names.size()) throw ModelError("fit file: theta and parameter_names differ in length");
  f.theta = Eigen::Map<const Eigen::VectorXd>(theta.data(), static_cast<Index>(theta.size()));
  if (j.contains("covariance") && j["covariance"].is_array()) {
    auto rows = j["covariance"].get<std::vector<std::vector<double>>>();
    const Index n = static_cast<Index>(rows.size());
    f.covariance.resize(n, n);
    for (Index r = 0; r < n; ++r) {
      if (static_cast<Index>(rows[static_cast<std::size_t>(r)].size()) != n)
        throw ModelError("fit file: covariance is not square");
      for (Index c = 0; c < n; ++c) f.covariance(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
    }
  }
  return f;
}

FitResult restore_from_file(const RunConfig& config, const Model& model) {
  std::string path = config.fit_path.empty() ? (fs::path(config.output_dir) / "fit.json").string() : config.fit_path;
  LoadedFit lf = load_fit(path);
  if (lf.names != model.layout().free_names())
    throw ModelError("fit file parameters do not match the configured model");
  return restore_fit(model, lf.theta, lf.covariance, config.fit_options.laplace);
}

void write_paths(std::ostream& out, const Model& model, const FitResult& fit) {
  out << "model,from,to,heads,lag,parameter,estimate,se\n";
  const auto& layout = model.layout();
  auto emit = [&](const RamModel& ram, const std::string& kind) {
    for (const auto& t : ram.terms) {
      std::string param = t.param ? *t.param : "NA";
      double est = t.value;
      double se = std::numeric_limits<double>::quiet_NaN();
      if (t.param) {
        const std::string name = kind + ":" + *t.param;
        auto idx = layout.find(name);
        if (idx) est = fit.natural[static_cast<Index>(*idx)];
        for (std::size_t k = 0; k < fit.names.size(); ++k)
          if (fit.names[k] == name) se = fit.se[static_cast<Index>(k)];
      }
      out << kind << ',' << csv_escape(t.from) << ',' << csv_escape(t.to) << ',' << t.heads << ',' << t.lag << ','
          << csv_escape(param) << ',' << num(est) << ',' << num(se) << '\n';
    }
  };
  if (model.spec().sem) emit(*model.spec().sem, "sem");
  if (model.spec().dsem) emit(*model.spec().dsem, "dsem");
}

}  // namespace

RunConfig parse_config(const std::string& json_text, const fs::path& base_dir, const CliOverrides& overrides) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ModelError(std::string("config: invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ModelError("config: top level must be an object");
  check_keys(j,
             {"data", "formula", "sem", "sem_text", "dsem", "dsem_text", "spatial", "variables", "times", "family",
              "variable_column", "time_column", "space_columns", "fixed", "start", "bounded", "control", "output",
              "seed", "simulate", "predict", "integrate", "fit"},
             "configuration");
  RunConfig c;
  c.base_dir = base_dir;
  c.data_path = resolve(base_dir, get<std::string>(j, "data", ""));
  c.formula = get<std::string>(j, "formula", "y ~ 1");
  if (j.contains("sem") && j.contains("sem_text")) throw ModelError("config: give either 'sem' or 'sem_text'");
  if (j.contains("dsem") && j.contains("dsem_text")) throw ModelError("config: give either 'dsem' or 'dsem_text'");
  if (j.contains("sem")) c.sem_text = read_text(resolve(base_dir, get<std::string>(j, "sem", "")));
  if (j.contains("sem_text")) c.sem_text = get<std::string>(j, "sem_text", "");
  if (j.contains("dsem")) c.dsem_text = read_text(resolve(base_dir, get<std::string>(j, "dsem", "")));
  if (j.contains("dsem_text")) c.dsem_text = get<std::string>(j, "dsem_text", "");
  if (j.contains("spatial")) {
    const json& s = j["spatial"];
    check_keys(s, {"type", "file", "nodes"}, "spatial");
    c.spatial_type = get<std::string>(s, "type", "none");
    c.spatial_path = resolve(base_dir, get<std::string>(s, "file", ""));
    if (s.contains("nodes")) c.spatial_nodes = get<Index>(s, "nodes", 0);
    if (c.spatial_type != "none" && c.spatial_type != "single" && c.spatial_path.empty())
      throw ModelError("config: spatial." + c.spatial_type + " needs a 'file'");
  }
  ModelSpec& spec = c.spec;
  spec.formula = c.formula;
  spec.variables = get<std::vector<std::string>>(j, "variables", {});
  spec.times = get<std::vector<double>>(j, "times", {});
  spec.variable_column = get<std::string>(j, "variable_column", spec.variable_column);
  spec.time_column = get<std::string>(j, "time_column", spec.time_column);
  spec.space_columns = get<std::vector<std::string>>(j, "space_columns", {});
  spec.fixed = get<std::map<std::string, double>>(j, "fixed", {});
  spec.starts = get<std::map<std::string, double>>(j, "start", {});
  auto bounded = get<std::vector<std::string>>(j, "bounded", {});
  spec.bounded = std::set<std::string>(bounded.begin(), bounded.end());
  if (j.contains("family")) {
    const json& f = j["family"];
    if (f.is_object() && f.contains("distribution")) {
      spec.families = {family_from(f)};
    } else if (f.is_object()) {
      if (spec.variables.empty()) throw ModelError("config: per-variable families need 'variables'");
      spec.families.clear();
      for (const auto& v : spec.variables) {
        if (!f.contains(v)) throw ModelError("config: no family for variable " + v);
        spec.families.push_back(family_from(f[v]));
      }
      for (auto it = f.begin(); it != f.end(); ++it)
        if (std::find(spec.variables.begin(), spec.variables.end(), it.key()) == spec.variables.end())
          throw ModelError("config: family given for undeclared variable " + it.key());
    } else {
      throw ModelError("config: 'family' must be an object");
    }
  }
  if (j.contains("control")) {
    const json& k = j["control"];
    check_keys(k, {"max_iterations", "gradient_tolerance", "threads", "compute_se", "inner_tolerance"}, "control");
    c.fit_options.optimizer.max_iterations = get<int>(k, "max_iterations", c.fit_options.optimizer.max_iterations);
    c.fit_options.optimizer.gradient_tolerance =
        get<double>(k, "gradient_tolerance", c.fit_options.optimizer.gradient_tolerance);
    c.fit_options.optimizer.threads = get<int>(k, "threads", c.fit_options.optimizer.threads);
    c.fit_options.compute_se = get<bool>(k, "compute_se", true);
    c.fit_options.laplace.tolerance = get<double>(k, "inner_tolerance", c.fit_options.laplace.tolerance);
  }
  c.output_dir = resolve(base_dir, get<std::string>(j, "output", "out"));
  c.seed = get<std::uint64_t>(j, "seed", 1);
  c.fit_path = resolve(base_dir, get<std::string>(j, "fit", ""));
  if (j.contains("simulate")) {
    const json& s = j["simulate"];
    check_keys(s, {"truth", "design", "samples_per_variable_time"}, "simulate");
    c.truth_path = resolve(base_dir, get<std::string>(s, "truth", ""));
    c.design_path = resolve(base_dir, get<std::string>(s, "design", ""));
    c.samples_per_cell = get<int>(s, "samples_per_variable_time", 0);
  }
  if (j.contains("predict")) {
    const json& s = j["predict"];
    check_keys(s, {"data"}, "predict");
    c.predict_path = resolve(base_dir, get<std::string>(s, "data", ""));
  }
  if (j.contains("integrate")) {
    const json& s = j["integrate"];
    check_keys(s, {"grid", "weight_column"}, "integrate");
    c.grid_path = resolve(base_dir, get<std::string>(s, "grid", ""));
    c.weight_column = get<std::string>(s, "weight_column", c.weight_column);
  }
  if (overrides.seed) c.seed = *overrides.seed;
  if (overrides.out) c.output_dir = *overrides.out;
  if (overrides.threads) c.fit_options.optimizer.threads = *overrides.threads;
  return c;
}

RunConfig load_config(const std::string& path, const CliOverrides& overrides) {
  fs::path p(path);
  return parse_config(read_text(p), p.has_parent_path() ? p.parent_path() : fs::path("."), overrides);
}

ModelSpec build_spec(const RunConfig& config) {
  ModelSpec spec = config.spec;
  const std::string& t = config.spatial_type;
  if (t == "mesh")
    spec.domain = read_mesh_file(config.spatial_path);
  else if (t == "areal")
    spec.domain = read_areal_file(config.spatial_path, config.spatial_nodes);
  else if (t == "stream")
    spec.domain = read_stream_file(config.spatial_path);
  else if (t == "none" || t == "single")
    spec.domain = SpatialDomain::single_site();
  else
    throw ModelError("config: unknown spatial type '" + t + "'");
  if ((config.sem_text || config.dsem_text) && spec.variables.empty())
    throw ModelError("config: 'variables' must be declared when a path model is given");
  if (config.sem_text) spec.sem = parse_sem(*config.sem_text, spec.variables);
  if (config.dsem_text) spec.dsem = parse_dsem(*config.dsem_text, spec.variables);
  return spec;
}

int cmd_fit(const RunConfig& config, std::ostream& log) {
  if (config.data_path.empty()) throw ModelError("config: 'data' is required for fit");
  ModelSpec spec = build_spec(config);
  DataTable data = DataTable::read_csv(config.data_path);
  Model model(spec, data);
  FitResult fit = fit_model(model, config.fit_options);
  const fs::path out(config.output_dir);
  fs::create_directories(out);

  const auto& layout = model.layout();
  {
    auto f = open_out(out / "estimates.csv");
    f << "name,estimate,se,transform\n";
    std::size_t k = 0;
    for (std::size_t i = 0; i < layout.size(); ++i) {
      const auto& p = layout.params()[i];
      if (p.fixed) {
        f << csv_escape(p.name) << ',' << num(p.start) << ",NA,fixed\n";
        continue;
      }
      f << csv_escape(p.name) << ',' << num(fit.estimate[static_cast<Index>(k)]) << ','
        << num(fit.se[static_cast<Index>(k)]) << ',' << transform_name(p.transform) << '\n';
      ++k;
    }
  }
  {
    auto f = open_out(out / "paths.csv");
    write_paths(f, model, fit);
  }
  {
    Assembled a = model.assemble(fit.theta);
    Eigen::VectorXd v = model.structured_effects(fit.mode, a);
    auto labels = model.random_effect_labels();
    auto f = open_out(out / "random_effects.csv");
    f << "block,variable,time,node,value\n";
    for (std::size_t i = 0; i < labels.size(); ++i)
      f << labels[i].block << ',' << csv_escape(labels[i].variable) << ',' << labels[i].time << ',' << labels[i].node
        << ',' << num(v[static_cast<Index>(i)]) << '\n';
  }
  {
    Prediction p = fitted(model, fit);
    Eigen::VectorXd rr = residuals(model, fit, ResidualKind::Response);
    Eigen::VectorXd rd = residuals(model, fit, ResidualKind::Deviance);
    auto f = open_out(out / "fitted.csv");
    f << "row,link,response,residual_response,residual_deviance\n";
    for (Index i = 0; i < p.link.size(); ++i)
      f << i + 1 << ',' << num(p.link[i]) << ',' << num(p.response[i]) << ',' << num(rr[i]) << ',' << num(rd[i])
        << '\n';
  }
  {
    json j;
    j["version"] = kVersion;
    j["logLik"] = fit.log_lik;
    j["AIC"] = fit.aic;
    j["k"] = fit.k;
    j["converged"] = fit.converged;
    j["gradient_max_abs"] = fit.gradient_max;
    j["iterations"] = fit.iterations;
    j["message"] = fit.message;
    j["dims"] = {{"rows", model.num_rows()},
                 {"sites", model.num_sites()},
                 {"variables", model.num_vars()},
                 {"times", model.num_times()},
                 {"random_effects", model.num_random()},
                 {"parameters", fit.k}};
    j["parameter_names"] = fit.names;
    j["theta"] = std::vector<double>(fit.theta.data(), fit.theta.data() + fit.theta.size());
    if (fit.has_covariance) {
      std::vector<std::vector<double>> cov;
      for (Index r = 0; r < fit.covariance.rows(); ++r) {
        Eigen::VectorXd row = fit.covariance.row(r).transpose();
        cov.emplace_back(row.data(), row.data() + row.size());
      }
      j["covariance"] = cov;
    } else {
      j["covariance"] = nullptr;
    }
    j["warnings"] = fit.warnings;
    j["bias_correction"] = false;
    auto f = open_out(out / "fit.json");
    f << j.dump(2) << '\n';
  }
  for (const auto& w : fit.warnings) log << "warning: " << w << '\n';
  return fit.converged ? kExitOk : kExitNotConverged;
}

int cmd_simulate(const RunConfig& config, std::ostream& log) {
  ModelSpec spec = build_spec(config);
  DataTable design;
  if (!config.design_path.empty())
    design = DataTable::read_csv(config.design_path);
  else if (config.samples_per_cell > 0)
    design = generate_design(spec, config.samples_per_cell, config.seed);
  else if (!config.data_path.empty())
    design = DataTable::read_csv(config.data_path);
  else
    throw ModelError("config: simulate needs 'simulate.design', 'simulate.samples_per_variable_time' or 'data'");
  std::map<std::string, double> truth;
  if (!config.truth_path.empty()) {
    DataTable t = DataTable::read_csv(config.truth_path);
    const auto& names = t.text("name");
    const auto& values = t.numeric("value");
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (truth.count(names[i])) throw ModelError("truth file: duplicate parameter " + names[i]);
      truth[names[i]] = values[i];
    }
  }
  Simulation sim = simulate(spec, design, truth, config.seed);
  fs::create_directories(config.output_dir);
  sim.data.write_csv((fs::path(config.output_dir) / "data.csv").string());
  log << "simulated " << sim.data.rows() << " rows\n";
  return kExitOk;
}

int cmd_predict(const RunConfig& config, std::ostream& log) {
  if (config.data_path.empty()) throw ModelError("config: 'data' is required for predict");
  ModelSpec spec = build_spec(config);
  DataTable data = DataTable::read_csv(config.data_path);
  Model model(spec, data);
  FitResult fit = restore_from_file(config, model);
  DataTable rows = config.predict_path.empty() ? data : DataTable::read_csv(config.predict_path);
  Prediction p = predict(model, fit, rows);
  fs::create_directories(config.output_dir);
  auto f = open_out(fs::path(config.output_dir) / "predictions.csv");
  f << "row,link,response,fixed,smooth,omega,epsilon,offset,error\n";
  for (Index i = 0; i < p.link.size(); ++i)
    f << i + 1 << ',' << num(p.link[i]) << ',' << num(p.response[i]) << ',' << num(p.fixed[i]) << ','
      << num(p.smooth[i]) << ',' << num(p.omega[i]) << ',' << num(p.epsilon[i]) << ',' << num(p.offset[i]) << ','
      << csv_escape(p.errors[static_cast<std::size_t>(i)]) << '\n';
  if (p.failed > 0) log << "warning: " << p.failed << " of " << p.link.size() << " rows could not be predicted\n";
  return p.link.size() > 0 && p.failed == p.link.size() ? kExitAllRowsFailed : kExitOk;
}

int cmd_integrate(const RunConfig& config, std::ostream& log) {
  if (config.data_path.empty()) throw ModelError("config: 'data' is required for integrate");
  if (config.grid_path.empty()) throw ModelError("config: 'integrate.grid' is required");
  ModelSpec spec = build_spec(config);
  DataTable data = DataTable::read_csv(config.data_path);
  Model model(spec, data);
  FitResult fit = restore_from_file(config, model);
  DataTable grid = DataTable::read_csv(config.grid_path);
  const auto& w = grid.numeric(config.weight_column);
  const auto& mspec = model.spec();
  if (!grid.has(mspec.variable_column)) {
    if (mspec.variables.size() != 1)
      throw ModelError("grid needs a '" + mspec.variable_column + "' column when there are several variables");
    grid.add_text_column(mspec.variable_column, std::vector<std::string>(grid.rows(), mspec.variables[0]));
  }
  std::vector<std::string> labels;
  std::vector<std::pair<DataTable, std::vector<double>>> slices;
  if (grid.has(mspec.time_column)) {
    const Column& tc = grid.column(mspec.time_column);
    std::vector<std::string> seen;
    for (const auto& t : tc.text)
      if (std::find(seen.begin(), seen.end(), t) == seen.end()) seen.push_back(t);
    for (const auto& t : seen) {
      std::vector<std::size_t> idx;
      std::vector<double> ws;
      for (std::size_t i = 0; i < grid.rows(); ++i)
        if (tc.text[i] == t) {
          idx.push_back(i);
          ws.push_back(w[i]);
        }
      labels.push_back(t);
      slices.emplace_back(grid.select_rows(idx), ws);
    }
  } else {
    for (Index t = 0; t < model.num_times(); ++t) {
      DataTable g = grid;
      g.add_text_column(mspec.time_column, std::vector<std::string>(grid.rows(), model.time_label(t)));
      labels.push_back(model.time_label(t));
      slices.emplace_back(std::move(g), w);
    }
  }
  fs::create_directories(config.output_dir);
  auto f = open_out(fs::path(config.output_dir) / "index.csv");
  f << "time,estimate,se\n";
  std::size_t failed = 0;
  for (std::size_t k = 0; k < slices.size(); ++k) {
    try {
      IntegratedOutput io = integrate_output(model, fit, slices[k].first, slices[k].second, config.fit_options);
      f << csv_escape(labels[k]) << ',' << num(io.estimate) << ',' << num(io.se) << '\n';
      Index bad = static_cast<Index>(slices[k].first.rows()) - io.rows_used;
      if (bad > 0) log << "warning: time " << labels[k] << ": " << bad << " grid rows could not be evaluated\n";
    } catch (const ModelError& e) {
      ++failed;
      f << csv_escape(labels[k]) << ",NA,NA\n";
      log << "warning: time " << labels[k] << ": " << e.what() << '\n';
    }
  }
  return !slices.empty() && failed == slices.size() ? kExitAllRowsFailed : kExitOk;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sparse spatio-temporal structural equation models fitted by Laplace approximation", "stgm"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir;
  int threads = 0;
  const std::pair<const char*, const char*> commands[] = {
      {"fit", "estimate parameters and write fit outputs"},
      {"simulate", "draw a data set from the model at given parameter values"},
      {"predict", "predict at new locations from a previous fit"},
      {"integrate", "weighted sum of predictions over a grid"}};
  for (const auto& [name, help] : commands) {
    CLI::App* s = app.add_subcommand(name, help);
    s->add_option("--config", config_path, "JSON run configuration")->required();
    s->add_option("--seed", seed, "random seed override");
    s->add_option("--out", out_dir, "output directory override");
    s->add_option("--threads", threads, "thread count override");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e, out, err);
    err << "error: " << e.what() << '\n';
    return kExitConfigError;
  }
  CLI::App* used = app.get_subcommands().front();
  CliOverrides ov;
  if (used->count("--seed")) ov.seed = seed;
  if (used->count("--out")) ov.out = out_dir;
  if (used->count("--threads")) ov.threads = threads;
  try {
    RunConfig config = load_config(config_path, ov);
    const std::string name = used->get_name();
    if (name == "fit") return cmd_fit(config, err);
    if (name == "simulate") return cmd_simulate(config, err);
    if (name == "predict") return cmd_predict(config, err);
    return cmd_integrate(config, err);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error: " << msg << '\n';
  }
  return kExitConfigError;
}

}  // namespace stgm
