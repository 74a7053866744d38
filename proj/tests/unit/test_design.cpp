#include <doctest.h>

#include <cmath>
#include <random>

#include "stgm/design.hpp"
#include "stgm/format.hpp"
#include "support.hpp"

using namespace stgm;

namespace {

DataTable table(const std::vector<std::string>& header, const std::vector<std::vector<double>>& cols) {
  std::vector<std::vector<std::string>> rows(cols.front().size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (const auto& c : cols) rows[i].push_back(format_double(c[i]));
  return DataTable::parse_csv(support::csv(header, rows));
}

DataTable uniform_x(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::vector<double> x(n), y(n);
  for (int i = 0; i < n; ++i) {
    x[i] = u(rng);
    y[i] = std::sin(x[i]);
  }
  return table({"y", "x"}, {y, x});
}

}  // namespace

TEST_SUITE("design") {
  TEST_CASE("intercept only") {
    auto d = build_design("y ~ 1", table({"y"}, {{1, 2, 3, 4, 5}}));
    CHECK(d.X.rows() == 5);
    CHECK(d.X.cols() == 1);
    CHECK(d.X.col(0).isOnes());
    CHECK(d.Z.cols() == 0);
    CHECK(d.penalties.empty());
    CHECK(d.offset.isZero());
  }

  TEST_CASE("factor with intercept uses treatment contrasts") {
    auto data = DataTable::parse_csv("y,g\n1,b\n2,a\n3,c\n4,a\n");
    auto d = build_design("y ~ factor(g)", data);
    CHECK(d.X.cols() == 3);
    Eigen::MatrixXd expected(4, 3);
    expected << 1, 1, 0, 1, 0, 0, 1, 0, 1, 1, 0, 0;
    CHECK(d.X == expected);
    auto no_int = build_design("y ~ 0 + factor(g)", data);
    CHECK(no_int.X.cols() == 3);
    CHECK(no_int.X.rowwise().sum().isOnes());
  }

  TEST_CASE("numeric factor levels sort numerically") {
    auto data = DataTable::parse_csv("y,year\n1,10\n2,9\n3,100\n");
    Design d("y ~ 0 + factor(year)", data);
    CHECK(d.training().x_names[0] == "factor(year)9");
    CHECK(d.training().x_names[1] == "factor(year)10");
    CHECK(d.training().x_names[2] == "factor(year)100");
  }

  TEST_CASE("numeric columns and offsets") {
    auto d = build_design("y ~ x + offset(o)", table({"y", "x", "o"}, {{1, 2}, {0.5, -1.5}, {0.3, 0.7}}));
    CHECK(d.X.cols() == 2);
    CHECK(d.X(1, 1) == -1.5);
    CHECK(d.offset(0) == 0.3);
    CHECK(d.offset(1) == 0.7);
  }

  TEST_CASE("second-difference penalty of size 9 has rank 7") {
    Eigen::MatrixXd q = second_difference_penalty(9);
    Eigen::MatrixXd d = Eigen::MatrixXd::Zero(7, 9);
    for (int i = 0; i < 7; ++i) {
      d(i, i) = 1;
      d(i, i + 1) = -2;
      d(i, i + 2) = 1;
    }
    CHECK((q - d.transpose() * d).cwiseAbs().maxCoeff() == 0.0);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(q);
    int rank = 0;
    for (Index i = 0; i < 9; ++i)
      if (svd.singularValues()(i) > 1e-10) ++rank;
    CHECK(rank == 7);
  }

  TEST_CASE("penalty null space is constant plus linear") {
    for (int k : {3, 5, 9, 14}) {
      Eigen::MatrixXd q = second_difference_penalty(k);
      Eigen::VectorXd one = Eigen::VectorXd::Ones(k);
      Eigen::VectorXd lin = Eigen::VectorXd::LinSpaced(k, 0.0, k - 1.0);
      CHECK((q * one).norm() < 1e-12);
      CHECK((q * lin).norm() < 1e-12);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q);
      CHECK(es.eigenvalues()(1) < 1e-10);
      CHECK(es.eigenvalues()(2) > 1e-6);
    }
  }

  TEST_CASE("s(x, 9) design blocks") {
    auto data = uniform_x(200, 1);
    Design d("y ~ s(x, 9)", data);
    const auto& b = d.training();
    REQUIRE(b.smooths.size() == 1);
    CHECK(b.smooths[0].penalty.rows() == 9);
    CHECK((b.smooths[0].penalty - second_difference_penalty(9)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(b.X.cols() == 2);
    CHECK(b.Z.cols() == 7);
    REQUIRE(b.penalties.size() == 1);
    CHECK(b.penalties[0].start == 0);
    CHECK(b.penalties[0].size == 7);
    CHECK(b.penalties[0].rank == 7);
    // centered columns: the smooth is orthogonal to the intercept
    Eigen::MatrixXd z(b.Z);
    CHECK(z.colwise().sum().cwiseAbs().maxCoeff() < 1e-10);
    CHECK(std::abs(b.X.col(1).sum()) < 1e-10);
  }

  TEST_CASE("smooth reparameterization spans the centered spline space") {
    auto data = uniform_x(150, 2);
    Design d("y ~ s(x, 8)", data);
    const auto& b = d.training();
    const auto& sb = b.smooths[0];
    Eigen::MatrixXd raw = bspline_basis(data.numeric("x"), sb.knots, sb.degree);
    Eigen::MatrixXd centered = raw.rowwise() - raw.colwise().mean();
    Eigen::MatrixXd mixed(raw.rows(), 1 + b.Z.cols());
    mixed.col(0) = b.X.col(1);
    mixed.rightCols(b.Z.cols()) = Eigen::MatrixXd(b.Z);
    // the mixed-model columns reproduce every centered spline function
    // except the constant (absorbed by the intercept)
    Eigen::MatrixXd coef = mixed.colPivHouseholderQr().solve(centered);
    CHECK((mixed * coef - centered).cwiseAbs().maxCoeff() < 1e-8);
  }

  TEST_CASE("B-spline basis is a partition of unity") {
    std::vector<double> knots{0, 0, 0, 0, 1, 2, 3, 3, 3, 3};
    std::vector<double> x;
    for (int i = 0; i <= 30; ++i) x.push_back(0.1 * i);
    Eigen::MatrixXd b = bspline_basis(x, knots, 3);
    CHECK(b.cols() == 6);
    CHECK((b.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-14);
    CHECK(b.minCoeff() >= 0.0);
    CHECK(b(0, 0) == 1.0);
    CHECK(b(30, 5) == 1.0);
  }

  TEST_CASE("smoother log density") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> normal;
    Eigen::MatrixXd q = second_difference_penalty(9);
    Eigen::VectorXd g(9);
    for (int i = 0; i < 9; ++i) g(i) = normal(rng);
    const double base0 = smoother_logpdf(Eigen::VectorXd::Zero(9), q, 1.0);
    CHECK(smoother_logpdf(Eigen::VectorXd::Zero(9), q, 3.0) - base0 == doctest::Approx(3.5 * std::log(3.0)));
    const double l = 2.5;
    const double quad = g.dot(q * g);
    CHECK(smoother_logpdf(g, q, 2 * l) - smoother_logpdf(g, q, l) ==
          doctest::Approx(3.5 * std::log(2.0) - 0.5 * l * quad).epsilon(1e-12));
    // full-rank identity penalty is an ordinary normal density
    Eigen::VectorXd h = g.head(4);
    const double oracle = support::dense_mvn_logpdf(h, Eigen::VectorXd::Zero(4), Eigen::MatrixXd::Identity(4, 4) / l);
    CHECK(smoother_logpdf(h, Eigen::MatrixXd::Identity(4, 4), l) == doctest::Approx(oracle).epsilon(1e-12));
    CHECK_THROWS_AS(smoother_logpdf(g, q, 0.0), ModelError);
    CHECK_THROWS_AS(smoother_logpdf(g, q, -1.0), ModelError);
  }

  TEST_CASE("orthogonal polynomials") {
    auto data = uniform_x(60, 4);
    Design d("y ~ poly(x, 3)", data);
    Eigen::MatrixXd x = d.training().X;
    CHECK(x.cols() == 4);
    Eigen::MatrixXd gram = x.transpose() * x;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        if (i != j) CHECK(std::abs(gram(i, j)) < 1e-8 * std::sqrt(gram(i, i) * gram(j, j)));
    // re-application reproduces training columns
    CHECK((d.apply(data).X - x).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("apply reuses training encoding") {
    auto train = DataTable::parse_csv("y,g,x\n1,a,0\n2,b,1\n3,c,2\n4,a,3\n5,b,4\n");
    Design d("y ~ factor(g) + s(x, 5)", train);
    auto fresh = DataTable::parse_csv("g,x\nc,1.5\nb,4\n");
    auto blocks = d.apply(fresh);
    CHECK(blocks.X.rows() == 2);
    CHECK(blocks.X(0, 2) == 1.0);
    CHECK(blocks.X(1, 1) == 1.0);
    CHECK(blocks.Z.cols() == 3);
    auto bad = DataTable::parse_csv("g,x\nd,1\n");
    CHECK_THROWS_AS(d.apply(bad), ModelError);
    auto outside = DataTable::parse_csv("g,x\na,7\n");
    CHECK_THROWS_AS(d.apply(outside), ModelError);
  }

  TEST_CASE("deterministic construction") {
    auto data = uniform_x(80, 5);
    auto a = build_design("y ~ x + s(x, 6)", data);
    auto b = build_design("y ~ x + s(x, 6)", data);
    CHECK(a.X == b.X);
    CHECK(Eigen::MatrixXd(a.Z) == Eigen::MatrixXd(b.Z));
    CHECK(a.x_names == b.x_names);
  }

  TEST_CASE("formula errors") {
    auto data = DataTable::parse_csv("y,x,g\n1,2,a\n2,3,b\n");
    CHECK_THROWS_AS(build_design("y ~ z", data), ModelError);
    CHECK_THROWS_AS(build_design("y ~ s(x, 2)", data), ModelError);
    CHECK_THROWS_AS(build_design("y ~ g", data), ModelError);
    CHECK_THROWS_AS(build_design("y ~ x:g", data), ModelError);
    CHECK_THROWS_AS(build_design("y x", data), ModelError);
    CHECK_THROWS_AS(build_design("y ~ s(x", data), ModelError);
  }

  TEST_CASE("rank-deficient X warns without failing") {
    auto data = DataTable::parse_csv("y,a,b\n1,1,2\n2,2,4\n3,3,6\n");
    auto d = build_design("y ~ a + b", data);
    CHECK(d.X.cols() == 3);
    CHECK_FALSE(d.warnings.empty());
  }

  TEST_CASE("formula parse") {
    auto f = parse_formula("count ~ 0 + factor(year) + s(depth) + offset(log_area)");
    CHECK(f.response == "count");
    CHECK_FALSE(f.intercept);
    REQUIRE(f.terms.size() == 4);
    CHECK(f.terms[2].kind == FormulaTerm::Kind::Smooth);
    CHECK(f.terms[2].k == 10);
    CHECK(f.terms[3].kind == FormulaTerm::Kind::Offset);
  }
}
