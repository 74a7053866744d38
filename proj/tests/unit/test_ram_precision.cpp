#include <doctest.h>

#include <random>
#include <sstream>

#include "stgm/ram_precision.hpp"
#include "support.hpp"

using namespace stgm;

namespace {

Eigen::MatrixXd covariance_of(const RamMatrices& m) { return precision_from_ram(m).dense().inverse(); }

double max_abs(const Eigen::MatrixXd& a) { return a.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_SUITE("ram_precision") {
  TEST_CASE("simple regression: P and G entries") {
    auto ram = parse_sem("X -> Y, b, 0.5\nX <-> X, sx, 1\nY <-> Y, sy, 1\n", {"X", "Y"});
    std::vector<double> v{0.5, 1.0, 1.0};
    auto m = assemble_ram(ram, v);
    CHECK(m.P.nonZeros() == 1);
    CHECK(m.P.coeff(1, 0) == 0.5);
    CHECK(m.G.coeff(0, 0) == 1.0);
    CHECK(m.G.coeff(1, 1) == 1.0);
    CHECK_FALSE(m.rank_deficient);
  }

  TEST_CASE("simple regression implied covariance") {
    auto ram = parse_sem("X -> Y, b, 0.5\nX <-> X, sx, 1\nY <-> Y, sy, 1\n", {"X", "Y"});
    std::vector<double> v{0.5, 1.0, 1.0};
    Eigen::MatrixXd cov = covariance_of(assemble_ram(ram, v));
    Eigen::Matrix2d expected;
    expected << 1.0, 0.5, 0.5, 1.25;
    CHECK(max_abs(cov - expected) < 1e-12);
  }

  TEST_CASE("no paths gives inverse variances") {
    auto ram = parse_sem("X <-> X, a, 2\nY <-> Y, b, 2\n", {"X", "Y"});
    std::vector<double> v{2.0, 2.0};
    auto q = precision_from_ram(assemble_ram(ram, v)).dense();
    CHECK(max_abs(q - 0.25 * Eigen::Matrix2d::Identity()) < 1e-15);
  }

  TEST_CASE("AR1 unrolled entries drop pre-initial edges") {
    auto ram = parse_dsem("X -> X, 1, rho, 0.4\n", {"X"});
    auto m = assemble_ram(ram, std::vector<double>{0.4, 1.0}, 4);
    CHECK(m.P.nonZeros() == 3);
    for (Index t = 1; t < 4; ++t) CHECK(m.P.coeff(t, t - 1) == 0.4);
    CHECK(m.P.row(0).sum() == 0.0);
  }

  TEST_CASE("AR1 precision is tridiagonal") {
    auto ram = parse_dsem("X -> X, 1, rho, 0.4\n", {"X"});
    auto q = precision_from_ram(assemble_ram(ram, std::vector<double>{0.4, 1.0}, 5)).dense();
    Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(5, 5);
    for (int t = 0; t < 5; ++t) expected(t, t) = t < 4 ? 1.16 : 1.0;
    for (int t = 0; t + 1 < 5; ++t) expected(t, t + 1) = expected(t + 1, t) = -0.4;
    CHECK(max_abs(q - expected) < 1e-12);
  }

  TEST_CASE("dimension errors") {
    auto ram = parse_dsem("X -> X, 1, rho\n", {"X"});
    CHECK_THROWS_AS(assemble_ram(ram, std::vector<double>{0.4}, 5), ModelError);
    CHECK_THROWS_AS(assemble_ram(ram, std::vector<double>{0.4, 1.0}, 1), ModelError);
    CHECK_THROWS_AS(assemble_ram(ram, std::vector<double>{0.4, 1.0}, 0), ModelError);
  }

  TEST_CASE("feedback loop with unit gain is singular") {
    auto ram = parse_sem("X -> Y, a, 1\nY -> X, b, 1\n", {"X", "Y"});
    CHECK_THROWS_AS(assemble_ram(ram, std::vector<double>{1.0, 1.0, 1.0, 1.0}), NumericalError);
  }

  TEST_CASE("feedback loop with small gain is accepted and matches dense") {
    auto ram = parse_sem("X -> Y, a, 0.3\nY -> X, b, -0.5\n", {"X", "Y"});
    std::vector<double> v{0.3, -0.5, 1.0, 1.0};
    auto m = assemble_ram(ram, v);
    Eigen::MatrixXd oracle = support::dense_covariance(support::dense_ram(ram, v, 1));
    CHECK(max_abs(covariance_of(m) - oracle) < 1e-10);
  }

  TEST_CASE("rank-deficient input is rejected by precision_from_ram") {
    auto ram = parse_sem("F -> X, l1, 1\nF -> Y, l2, 1\nX <-> X, NA, 0\nY <-> Y, NA, 0\n", {"F", "X", "Y"});
    std::vector<double> v(ram.params.size(), 1.0);
    auto m = assemble_ram(ram, v);
    CHECK(m.rank_deficient);
    CHECK_THROWS_AS(precision_from_ram(m), ModelError);
  }

  TEST_CASE("estimated SD at zero is a numerical error, not rank deficiency") {
    auto ram = parse_sem("X <-> X, s, 1\n", {"X"});
    auto m = assemble_ram(ram, std::vector<double>{0.0});
    CHECK_FALSE(m.rank_deficient);
    CHECK_THROWS_AS(precision_from_ram(m), NumericalError);
  }

  TEST_CASE("rank deficiency flag counts fixed zero variances") {
    std::mt19937_64 rng(11);
    for (int rep = 0; rep < 50; ++rep) {
      std::ostringstream text;
      int zeros = 0;
      for (int c = 0; c < 4; ++c) {
        std::string v = "V" + std::to_string(c);
        if (rng() % 3 == 0) {
          text << v << " <-> " << v << ", NA, 0\n";
          ++zeros;
        } else {
          text << v << " <-> " << v << ", s" << c << ", 1\n";
        }
      }
      auto ram = parse_sem(text.str(), support::var_names(4));
      CHECK(ram_is_rank_deficient(ram) == (zeros > 0));
    }
  }

  TEST_CASE("projection of a full-rank model reproduces the inverse precision") {
    std::mt19937_64 rng(20240601);
    for (int rep = 0; rep < 30; ++rep) {
      const bool dynamic = rep % 2 == 1;
      const int C = 2 + static_cast<int>(rng() % 3);
      const int T = dynamic ? 3 : 1;
      auto r = support::random_ram(rng, C, 1, dynamic);
      auto m = assemble_ram(r.ram, r.values, T);
      Eigen::MatrixXd t = projection_matrix(m);
      CHECK(max_abs(t * t.transpose() - covariance_of(m)) < 1e-10);
    }
  }

  TEST_CASE("identity RAM projects to the identity") {
    auto ram = parse_sem("X <-> X, NA, 1\nY <-> Y, NA, 1\nZ <-> Z, NA, 1\n", {"X", "Y", "Z"});
    auto m = assemble_ram(ram, std::vector<double>{});
    CHECK(max_abs(projection_matrix(m) - Eigen::MatrixXd::Identity(3, 3)) == 0.0);
  }

  TEST_CASE("dynamic factor model projection has rank T") {
    const int T = 6;
    auto ram = parse_dsem(
        "F -> F, 1, rho, 0.8\nF -> X, 0, lx, 1\nF -> Y, 0, ly, 0.5\nF <-> F, 0, NA, 1\n"
        "X <-> X, 0, NA, 0\nY <-> Y, 0, NA, 0\n",
        {"F", "X", "Y"});
    std::vector<double> v;
    for (const auto& p : ram.params) v.push_back(p.start);
    auto m = assemble_ram(ram, v, T);
    CHECK(m.rank_deficient);
    Eigen::MatrixXd t = projection_matrix(m);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t * t.transpose());
    int rank = 0;
    for (Index i = 0; i < es.eigenvalues().size(); ++i)
      if (es.eigenvalues()(i) > 1e-8) ++rank;
    CHECK(rank == T);
  }

  TEST_CASE("random full-rank models match the dense oracle") {
    std::mt19937_64 rng(77);
    for (int rep = 0; rep < 100; ++rep) {
      const bool dynamic = rep % 2 == 0;
      const int C = 1 + static_cast<int>(rng() % 4);
      const int lag = dynamic ? 1 + static_cast<int>(rng() % 2) : 0;
      const int T = dynamic ? std::max(lag + 1, 12 / C) : 1;
      auto r = support::random_ram(rng, C, lag, dynamic);
      if (r.ram.max_lag > 0 && T < 1 + r.ram.max_lag) continue;
      auto m = assemble_ram(r.ram, r.values, T);
      Eigen::MatrixXd oracle = support::dense_covariance(support::dense_ram(r.ram, r.values, T));
      CHECK(max_abs(covariance_of(m) - oracle) < 1e-10);
      CHECK(precision_from_ram(m).is_symmetric());
    }
  }

  TEST_CASE("forward simulation agrees with the implied covariance") {
    std::mt19937_64 rng(5150);
    std::normal_distribution<double> normal;
    const int reps = 1000000;
    for (int model = 0; model < 3; ++model) {
      const int C = 2 + model % 2;
      const int T = model == 2 ? 4 : 1;
      auto r = support::random_ram(rng, C, 1, model == 2);
      auto d = support::dense_ram(r.ram, r.values, T);
      const auto n = d.P.rows();
      Eigen::MatrixXd cov = covariance_of(assemble_ram(r.ram, r.values, T));
      // Lag-0 paths run from lower to higher index and lags look back, so
      // the flat order is topological.
      Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(n, n);
      Eigen::VectorXd x(n), z(n);
      for (int k = 0; k < reps; ++k) {
        for (Index i = 0; i < n; ++i) z(i) = normal(rng);
        for (Index i = 0; i < n; ++i) {
          double s = 0.0;
          for (Index j = 0; j < i; ++j) s += d.P(i, j) * x(j);
          for (Index j = 0; j <= i; ++j) s += d.G(i, j) * z(j);
          x(i) = s;
        }
        acc.selfadjointView<Eigen::Lower>().rankUpdate(x);
      }
      Eigen::MatrixXd emp = acc.selfadjointView<Eigen::Lower>();
      emp /= reps;
      for (Index i = 0; i < n; ++i)
        for (Index j = 0; j <= i; ++j) {
          const double se = std::sqrt((cov(i, i) * cov(j, j) + cov(i, j) * cov(i, j)) / reps);
          CHECK(std::abs(emp(i, j) - cov(i, j)) < 3.0 * se);
        }
    }
  }

  TEST_CASE("shared parameter moves all of its entries together") {
    auto ram = parse_sem("X -> Y, b, 0.2\nY -> Z, b, 0.2\n", {"X", "Y", "Z"});
    auto bi = *ram.param_index("b");
    std::vector<double> v(ram.params.size(), 1.0);
    v[bi] = 0.2;
    auto m1 = assemble_ram(ram, v);
    v[bi] = 0.7;
    auto m2 = assemble_ram(ram, v);
    SparseMatrix diff = m2.P - m1.P;
    CHECK(diff.coeff(1, 0) == doctest::Approx(0.5));
    CHECK(diff.coeff(2, 1) == doctest::Approx(0.5));
    CHECK(diff.coeff(1, 0) == diff.coeff(2, 1));
  }

  TEST_CASE("lag-1 dynamic precision is banded") {
    std::mt19937_64 rng(99);
    for (int rep = 0; rep < 20; ++rep) {
      const int C = 2 + static_cast<int>(rng() % 3);
      auto r = support::random_ram(rng, C, 1, true);
      auto q = precision_from_ram(assemble_ram(r.ram, r.values, 8)).matrix();
      const Index band = C * std::max(1, r.ram.max_lag) + (C - 1);
      for (Index k = 0; k < q.outerSize(); ++k)
        for (SparseMatrix::InnerIterator it(q, k); it; ++it) CHECK(std::abs(it.row() - it.col()) <= band);
    }
  }

  TEST_CASE("MatrixMarket export") {
    auto ram = parse_dsem("X -> X, 1, rho, 0.4\n", {"X"});
    auto q = precision_from_ram(assemble_ram(ram, std::vector<double>{0.4, 1.0}, 3));
    std::ostringstream out;
    q.write_matrix_market(out);
    std::istringstream in(out.str());
    std::string header;
    std::getline(in, header);
    CHECK(header == "%%MatrixMarket matrix coordinate real symmetric");
    int rows = 0, cols = 0, nnz = 0;
    in >> rows >> cols >> nnz;
    CHECK(rows == 3);
    CHECK(cols == 3);
    CHECK(nnz == 5);
    for (int k = 0; k < nnz; ++k) {
      int i = 0, j = 0;
      double v = 0;
      in >> i >> j >> v;
      CHECK(i >= j);
      CHECK(v == q.coeff(i - 1, j - 1));
    }
  }
}
