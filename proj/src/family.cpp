#include "stgm/family.hpp"

#include <cmath>
#include <numbers>

#include "stgm/sparse_sym.hpp"

namespace stgm {

namespace {

double log1pexp(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

}  // namespace

Family Family::parse(std::string_view distribution, std::string_view link) {
  Family f;
  if (distribution == "gaussian" || distribution == "normal") {
    f.distribution = Distribution::Gaussian;
    f.link = Link::Identity;
  } else if (distribution == "poisson") {
    f.distribution = Distribution::Poisson;
    f.link = Link::Log;
  } else if (distribution == "bernoulli" || distribution == "binomial") {
    f.distribution = Distribution::Bernoulli;
    f.link = Link::Logit;
  } else if (distribution == "gamma") {
    f.distribution = Distribution::Gamma;
    f.link = Link::Log;
  } else {
    throw ModelError("unknown family: " + std::string(distribution));
  }
  if (!link.empty()) {
    if (link == "identity")
      f.link = Link::Identity;
    else if (link == "log")
      f.link = Link::Log;
    else if (link == "logit")
      f.link = Link::Logit;
    else
      throw ModelError("unknown link: " + std::string(link));
  }
  bool ok = (f.distribution == Distribution::Gaussian && (f.link == Link::Identity || f.link == Link::Log)) ||
            (f.distribution == Distribution::Poisson && f.link == Link::Log) ||
            (f.distribution == Distribution::Bernoulli && f.link == Link::Logit) ||
            (f.distribution == Distribution::Gamma && f.link == Link::Log);
  if (!ok)
    throw ModelError("unsupported family/link combination: " + std::string(distribution) + "/" + std::string(link));
  return f;
}

bool Family::has_dispersion() const {
  return distribution == Distribution::Gaussian || distribution == Distribution::Gamma;
}

std::string Family::distribution_name() const {
  switch (distribution) {
    case Distribution::Gaussian: return "gaussian";
    case Distribution::Poisson: return "poisson";
    case Distribution::Bernoulli: return "bernoulli";
    case Distribution::Gamma: return "gamma";
  }
  return "";
}

std::string Family::link_name() const {
  switch (link) {
    case Link::Identity: return "identity";
    case Link::Log: return "log";
    case Link::Logit: return "logit";
  }
  return "";
}

double Family::inverse_link(double eta) const {
  switch (link) {
    case Link::Identity: return eta;
    case Link::Log: return std::exp(eta);
    case Link::Logit: return 1.0 / (1.0 + std::exp(-eta));
  }
  return eta;
}

double Family::link_function(double mu) const {
  switch (link) {
    case Link::Identity: return mu;
    case Link::Log: return std::log(mu);
    case Link::Logit: return std::log(mu / (1.0 - mu));
  }
  return mu;
}

void Family::check_response(double y) const {
  bool ok = std::isfinite(y);
  switch (distribution) {
    case Distribution::Gaussian: break;
    case Distribution::Poisson: ok = ok && y >= 0.0 && y == std::floor(y); break;
    case Distribution::Bernoulli: ok = ok && (y == 0.0 || y == 1.0); break;
    case Distribution::Gamma: ok = ok && y > 0.0; break;
  }
  if (!ok) throw ModelError("response value " + std::to_string(y) + " outside the support of the " +
                            distribution_name() + " family");
}

FamilyTerms family_terms(const Family& f, double y, double eta, double dispersion) {
  FamilyTerms r;
  switch (f.distribution) {
    case Distribution::Gaussian: {
      const double s2 = dispersion * dispersion;
      const double base = 0.5 * std::log(2.0 * std::numbers::pi * s2);
      if (f.link == Link::Identity) {
        const double e = y - eta;
        r.nll = base + 0.5 * e * e / s2;
        r.d1 = -e / s2;
        r.d2 = 1.0 / s2;
      } else {
        const double mu = std::exp(eta);
        const double e = y - mu;
        r.nll = base + 0.5 * e * e / s2;
        r.d1 = -e * mu / s2;
        r.d2 = mu * (2.0 * mu - y) / s2;
      }
      break;
    }
    case Distribution::Poisson: {
      const double mu = std::exp(eta);
      r.nll = mu - y * eta + std::lgamma(y + 1.0);
      r.d1 = mu - y;
      r.d2 = mu;
      break;
    }
    case Distribution::Bernoulli: {
      const double p = 1.0 / (1.0 + std::exp(-eta));
      r.nll = log1pexp(eta) - y * eta;
      r.d1 = p - y;
      r.d2 = p * (1.0 - p);
      break;
    }
    case Distribution::Gamma: {
      const double k = dispersion;
      const double ratio = y * std::exp(-eta);
      r.nll = -(k * std::log(k) - k * eta + (k - 1.0) * std::log(y) - k * ratio - std::lgamma(k));
      r.d1 = k - k * ratio;
      r.d2 = k * ratio;
      break;
    }
  }
  if (!std::isfinite(r.nll) || !std::isfinite(r.d1) || !std::isfinite(r.d2)) {
    r.nll = kBarrierNll;
    r.d1 = 0.0;
    r.d2 = 0.0;
    r.invalid = true;
  }
  return r;
}

double unit_deviance(const Family& f, double y, double mu) {
  switch (f.distribution) {
    case Distribution::Gaussian: return (y - mu) * (y - mu);
    case Distribution::Poisson: return 2.0 * ((y > 0.0 ? y * std::log(y / mu) : 0.0) - (y - mu));
    case Distribution::Bernoulli: return y > 0.5 ? -2.0 * std::log(mu) : -2.0 * std::log1p(-mu);
    case Distribution::Gamma: return 2.0 * ((y - mu) / mu - std::log(y / mu));
  }
  return 0.0;
}

double draw_response(const Family& f, double mu, double dispersion, std::mt19937_64& rng) {
  switch (f.distribution) {
    case Distribution::Gaussian: return std::normal_distribution<double>(mu, dispersion)(rng);
    case Distribution::Poisson: return static_cast<double>(std::poisson_distribution<long long>(mu)(rng));
    case Distribution::Bernoulli: return std::bernoulli_distribution(mu)(rng) ? 1.0 : 0.0;
    case Distribution::Gamma: return std::gamma_distribution<double>(dispersion, mu / dispersion)(rng);
  }
  return mu;
}

}  // namespace stgm
