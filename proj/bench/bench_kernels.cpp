// Serial reference kernels against their OpenMP forms.
//
//   bench_kernels [--threads N] [--reps R] [--rows N]

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stgm/kernels.hpp"
#include "stgm/laplace.hpp"
#include "stgm/model.hpp"
#include "stgm/simulate.hpp"

using namespace stgm;

namespace {

double best_ms(const std::function<void()>& f, int reps) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

void row(const char* name, double serial, double parallel, bool identical) {
  std::printf("%-14s %12.3f %12.3f %8.2fx  %s\n", name, serial, parallel, serial / parallel,
              identical ? "identical" : "DIFFERENT");
}

SpatialDomain unit_square_mesh(int n) {
  std::vector<Point2> v;
  std::vector<std::array<Index, 3>> tri;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) v.push_back({i / (n - 1.0), j / (n - 1.0)});
  for (int j = 0; j + 1 < n; ++j)
    for (int i = 0; i + 1 < n; ++i) {
      const Index a = j * n + i;
      tri.push_back({a, a + 1, a + n + 1});
      tri.push_back({a, a + n + 1, a + n});
    }
  return SpatialDomain::mesh(std::move(v), std::move(tri));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"serial vs OpenMP kernel timings"};
  int threads = 0, reps = 3;
  long rows = 1000000;
  app.add_option("--threads", threads, "OpenMP threads (0: runtime default)");
  app.add_option("--reps", reps, "repetitions, best time reported")->check(CLI::PositiveNumber);
  app.add_option("--rows", rows, "rows for the family kernel")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  std::printf("threads %d\n%-14s %12s %12s %9s\n", kernels::resolve_threads(threads), "kernel", "serial ms",
              "parallel ms", "speedup");

  // family kernel on synthetic rows
  {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> normal;
    std::vector<Family> fams{Family::parse("poisson"), Family::parse("gaussian"), Family::parse("gamma")};
    std::vector<Index> var(static_cast<std::size_t>(rows));
    Eigen::VectorXd y(rows), eta(rows), disp(3);
    disp << 0, 1.3, 2.0;
    for (Index i = 0; i < rows; ++i) {
      var[static_cast<std::size_t>(i)] = i % 3;
      eta[i] = 0.5 * normal(rng);
      y[i] = i % 3 == 0 ? static_cast<double>(rng() % 5) : std::exp(normal(rng));
    }
    kernels::RowInputs in{&fams, &var, &y, &disp};
    kernels::RowTerms s, p;
    const double ts = best_ms([&] { s = kernels::family_rows_serial(in, eta); }, reps);
    const double tp = best_ms([&] { p = kernels::family_rows(in, eta, threads); }, reps);
    row("family_rows", ts, tp, s.total == p.total && s.d1 == p.d1 && s.d2 == p.d2);
  }

  // finite differences of a Laplace marginal likelihood
  {
    ModelSpec spec;
    spec.formula = "obs ~ 0 + factor(var)";
    spec.variables = {"A", "B"};
    spec.domain = unit_square_mesh(8);
    spec.families = {Family::parse("poisson")};
    spec.sem = parse_sem("A -> B, b, 0.5\n", spec.variables);
    const std::map<std::string, double> truth{{"sem:sd[A]", 15.0}, {"sem:sd[B]", 10.0}};
    auto sim = simulate(spec, generate_design(spec, 100, 1), truth, 2);
    Model model(spec, sim.data);
    kernels::Objective f = [&](const Eigen::VectorXd& x) { return laplace_value(model, x); };
    const Eigen::VectorXd x = model.layout().start();
    Eigen::VectorXd gs, gp;
    double ts = best_ms([&] { gs = kernels::fd_gradient_serial(f, x, 1e-5); }, reps);
    double tp = best_ms([&] { gp = kernels::fd_gradient(f, x, 1e-5, threads); }, reps);
    row("fd_gradient", ts, tp, gs == gp);
    const double f0 = f(x);
    Eigen::MatrixXd hs, hp;
    ts = best_ms([&] { hs = kernels::fd_hessian_serial(f, x, f0, 1e-4); }, reps);
    tp = best_ms([&] { hp = kernels::fd_hessian(f, x, f0, 1e-4, threads); }, reps);
    row("fd_hessian", ts, tp, hs == hp);
  }
  return 0;
}
