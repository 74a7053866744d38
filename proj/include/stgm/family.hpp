#pragma once

#include <random>
#include <string>
#include <string_view>

namespace stgm {

enum class Distribution { Gaussian, Poisson, Bernoulli, Gamma };
enum class Link { Identity, Log, Logit };

/// Observation family. The dispersion slot is the Gaussian SD or the Gamma
/// shape; Poisson and Bernoulli have none.
struct Family {
  Distribution distribution = Distribution::Gaussian;
  Link link = Link::Identity;

  /// Accepts gaussian/normal, poisson, bernoulli/binomial, gamma and
  /// identity/log/logit; an empty link picks the family default.
  static Family parse(std::string_view distribution, std::string_view link = {});

  bool has_dispersion() const;
  std::string distribution_name() const;
  std::string link_name() const;
  double inverse_link(double eta) const;
  double link_function(double mu) const;
  /// Throws ModelError when y lies outside the support.
  void check_response(double y) const;
  bool operator==(const Family&) const = default;
};

/// Negative log density and its first two derivatives in eta.
struct FamilyTerms {
  double nll = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
  /// Mean was numerically invalid; nll holds a finite barrier value.
  bool invalid = false;
};

inline constexpr double kBarrierNll = 1e10;

FamilyTerms family_terms(const Family& f, double y, double eta, double dispersion);

/// Standard unit deviance d(y, mu), not scaled by dispersion.
double unit_deviance(const Family& f, double y, double mu);

double draw_response(const Family& f, double mu, double dispersion, std::mt19937_64& rng);

}  // namespace stgm
