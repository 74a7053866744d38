#include <doctest.h>

#include <cmath>
#include <random>

#include "stgm/family.hpp"
#include "stgm/sparse_sym.hpp"

using namespace stgm;

namespace {

// Log densities written directly from the textbook forms.
double log_density(const Family& f, double y, double mu, double disp) {
  switch (f.distribution) {
    case Distribution::Gaussian:
      return -0.5 * std::log(2 * M_PI * disp * disp) - (y - mu) * (y - mu) / (2 * disp * disp);
    case Distribution::Poisson: {
      double fact = 1.0;
      for (int k = 2; k <= static_cast<int>(y); ++k) fact *= k;
      return std::log(std::pow(mu, y) * std::exp(-mu) / fact);
    }
    case Distribution::Bernoulli:
      return std::log(y > 0.5 ? mu : 1.0 - mu);
    case Distribution::Gamma: {
      const double scale = mu / disp;
      return std::log(std::pow(y, disp - 1) * std::exp(-y / scale) / (std::tgamma(disp) * std::pow(scale, disp)));
    }
  }
  return 0.0;
}

std::vector<Family> all_families() {
  return {Family::parse("gaussian"), Family::parse("gaussian", "log"), Family::parse("poisson"),
          Family::parse("bernoulli"), Family::parse("gamma")};
}

double draw_y(const Family& f, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.1, 3.0);
  switch (f.distribution) {
    case Distribution::Poisson: return static_cast<double>(rng() % 7);
    case Distribution::Bernoulli: return static_cast<double>(rng() % 2);
    default: return u(rng);
  }
}

}  // namespace

TEST_SUITE("family") {
  TEST_CASE("Poisson single observation") {
    auto t = family_terms(Family::parse("poisson"), 2.0, 0.0, 0.0);
    CHECK(t.nll == doctest::Approx(1.0 + std::log(2.0)).epsilon(1e-14));
    CHECK(t.nll == doctest::Approx(1.6931471805599454).epsilon(1e-14));
    CHECK_FALSE(t.invalid);
  }

  TEST_CASE("Gaussian at the mean") {
    auto t = family_terms(Family::parse("gaussian"), 1.3, 1.3, 2.0);
    CHECK(t.nll == doctest::Approx(0.5 * std::log(2 * M_PI * 4.0)).epsilon(1e-15));
    CHECK(t.d1 == 0.0);
  }

  TEST_CASE("negative log densities match direct evaluation") {
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> eta_u(-1.5, 1.5), disp_u(0.5, 3.0);
    for (const auto& f : all_families())
      for (int rep = 0; rep < 50; ++rep) {
        const double y = draw_y(f, rng), eta = eta_u(rng), disp = disp_u(rng);
        auto t = family_terms(f, y, eta, disp);
        CHECK(t.nll == doctest::Approx(-log_density(f, y, f.inverse_link(eta), disp)).epsilon(1e-10));
      }
  }

  TEST_CASE("eta derivatives match finite differences") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> eta_u(-1.5, 1.5), disp_u(0.5, 3.0);
    const double h = 1e-5;
    for (const auto& f : all_families())
      for (int rep = 0; rep < 30; ++rep) {
        const double y = draw_y(f, rng), eta = eta_u(rng), disp = disp_u(rng);
        auto t = family_terms(f, y, eta, disp);
        auto up = family_terms(f, y, eta + h, disp), dn = family_terms(f, y, eta - h, disp);
        CHECK(t.d1 == doctest::Approx((up.nll - dn.nll) / (2 * h)).epsilon(1e-6));
        CHECK(t.d2 == doctest::Approx((up.d1 - dn.d1) / (2 * h)).epsilon(1e-6));
      }
  }

  TEST_CASE("invalid mean gives a finite barrier") {
    auto t = family_terms(Family::parse("poisson"), 3.0, 800.0, 0.0);
    CHECK(t.invalid);
    CHECK(t.nll == kBarrierNll);
    auto g = family_terms(Family::parse("gaussian"), 1.0, 1.0, 0.0);
    CHECK(g.invalid);
  }

  TEST_CASE("unit deviances") {
    auto pois = Family::parse("poisson");
    CHECK(unit_deviance(pois, 4.0, 4.0) == 0.0);
    const double d = unit_deviance(pois, 0.0, 1.0);
    CHECK(d == doctest::Approx(2.0));
    CHECK(-std::sqrt(d) == doctest::Approx(-std::sqrt(2.0)));
    CHECK(unit_deviance(Family::parse("gaussian"), 3.0, 1.0) == 4.0);
    CHECK(unit_deviance(Family::parse("gamma"), 2.0, 2.0) == 0.0);
    CHECK(unit_deviance(Family::parse("bernoulli"), 1.0, 0.5) == doctest::Approx(2 * std::log(2.0)));
  }

  TEST_CASE("deviance is twice the saturated log-likelihood gap") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> mu_u(0.2, 4.0);
    for (auto f : {Family::parse("poisson"), Family::parse("gamma")})
      for (int rep = 0; rep < 20; ++rep) {
        const double y = f.distribution == Distribution::Poisson ? static_cast<double>(1 + rng() % 6) : mu_u(rng);
        const double mu = mu_u(rng);
        const double k = 1.7;
        const double gap = log_density(f, y, y, k) - log_density(f, y, mu, k);
        const double scale = f.distribution == Distribution::Gamma ? k : 1.0;
        CHECK(unit_deviance(f, y, mu) * scale == doctest::Approx(2.0 * gap).epsilon(1e-10));
      }
  }

  TEST_CASE("parsing and support") {
    CHECK(Family::parse("normal").link == Link::Identity);
    CHECK(Family::parse("binomial").distribution == Distribution::Bernoulli);
    CHECK_THROWS_AS(Family::parse("poisson", "identity"), ModelError);
    CHECK_THROWS_AS(Family::parse("tweedie"), ModelError);
    CHECK_THROWS_AS(Family::parse("gamma", "probit"), ModelError);
    CHECK_THROWS_AS(Family::parse("poisson").check_response(1.5), ModelError);
    CHECK_THROWS_AS(Family::parse("bernoulli").check_response(2.0), ModelError);
    CHECK_THROWS_AS(Family::parse("gamma").check_response(0.0), ModelError);
    CHECK_NOTHROW(Family::parse("gaussian").check_response(-5.0));
    CHECK(Family::parse("gamma").has_dispersion());
    CHECK_FALSE(Family::parse("poisson").has_dispersion());
  }

  TEST_CASE("links invert") {
    for (const auto& f : all_families())
      for (double eta : {-2.0, -0.3, 0.0, 0.8, 2.5})
        CHECK(f.link_function(f.inverse_link(eta)) == doctest::Approx(eta).epsilon(1e-12));
  }

  TEST_CASE("draws have the requested mean") {
    std::mt19937_64 rng(13);
    const int n = 40000;
    for (const auto& f : all_families()) {
      const double mu = f.distribution == Distribution::Bernoulli ? 0.3 : 2.0;
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += draw_response(f, mu, 1.5, rng);
      const double var = f.distribution == Distribution::Gaussian ? 2.25
                         : f.distribution == Distribution::Poisson ? mu
                         : f.distribution == Distribution::Bernoulli ? mu * (1 - mu)
                                                                     : mu * mu / 1.5;
      CHECK(std::abs(s / n - mu) < 4.0 * std::sqrt(var / n));
    }
  }
}
