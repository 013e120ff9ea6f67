#include "fpca/expfam.hpp"

#include <cmath>
#include <limits>

#include "fpca/error.hpp"

namespace fpca {

namespace {

void require_positive_phi(const FamilySpec& spec, double phi) {
  if (spec.has_dispersion() && !(phi > 0.0 && std::isfinite(phi))) {
    throw InvalidArgument("dispersion must be positive and finite, got " + std::to_string(phi));
  }
}

std::string describe(double v) { return std::to_string(v); }

}  // namespace

FamilySpec FamilySpec::make(Family family) {
  switch (family) {
    case Family::Gaussian:
    case Family::QuasiPoisson:
      return {family, DispersionStructure::Scalar};
    case Family::Poisson:
    case Family::Bernoulli:
      return {family, DispersionStructure::None};
  }
  throw InvalidArgument("unknown family");
}

FamilySpec FamilySpec::make(Family family, DispersionStructure dispersion) {
  bool ok = false;
  switch (family) {
    case Family::Gaussian:
      ok = dispersion == DispersionStructure::Scalar || dispersion == DispersionStructure::PerColumn;
      break;
    case Family::QuasiPoisson:
      ok = dispersion == DispersionStructure::Scalar;
      break;
    case Family::Poisson:
    case Family::Bernoulli:
      ok = dispersion == DispersionStructure::None;
      break;
  }
  if (!ok) throw InvalidArgument("dispersion structure not allowed for family " + to_string(family));
  return {family, dispersion};
}

Link FamilySpec::link() const noexcept {
  switch (family) {
    case Family::Gaussian:
      return Link::Identity;
    case Family::Poisson:
    case Family::QuasiPoisson:
      return Link::Log;
    case Family::Bernoulli:
      return Link::Logit;
  }
  return Link::Identity;
}

Family parse_family(std::string_view name) {
  if (name == "gaussian") return Family::Gaussian;
  if (name == "poisson") return Family::Poisson;
  if (name == "bernoulli") return Family::Bernoulli;
  if (name == "quasipoisson") return Family::QuasiPoisson;
  throw InvalidArgument("unknown family '" + std::string(name) + "'");
}

std::string to_string(Family family) {
  switch (family) {
    case Family::Gaussian:
      return "gaussian";
    case Family::Poisson:
      return "poisson";
    case Family::Bernoulli:
      return "bernoulli";
    case Family::QuasiPoisson:
      return "quasipoisson";
  }
  return "unknown";
}

bool in_support(const FamilySpec& spec, double x) noexcept {
  if (!std::isfinite(x)) return false;
  switch (spec.family) {
    case Family::Gaussian:
      return true;
    case Family::Poisson:
    case Family::QuasiPoisson:
      return x >= 0.0 && x == std::floor(x);
    case Family::Bernoulli:
      return x == 0.0 || x == 1.0;
  }
  return false;
}

void check_support(const FamilySpec& spec, double x) {
  if (!in_support(spec, x)) {
    throw DomainError("observation " + describe(x) + " outside the support of family " +
                      to_string(spec.family));
  }
}

double link(const FamilySpec& spec, double mu) {
  switch (spec.family) {
    case Family::Gaussian:
      if (!std::isfinite(mu)) break;
      return mu;
    case Family::Poisson:
    case Family::QuasiPoisson:
      if (!(mu > 0.0) || !std::isfinite(mu)) break;
      return std::log(mu);
    case Family::Bernoulli:
      if (!(mu > 0.0 && mu < 1.0)) break;
      return std::log(mu) - std::log1p(-mu);
  }
  throw DomainError("mean " + describe(mu) + " outside the mean domain of " + to_string(spec.family));
}

double inv_link(const FamilySpec& spec, double eta) {
  if (!std::isfinite(eta)) throw InvalidArgument("linear predictor must be finite");
  return detail::inv_link(spec.family, eta);
}

double loglik_term(const FamilySpec& spec, double x, double eta, double phi) {
  check_support(spec, x);
  require_positive_phi(spec, phi);
  switch (spec.family) {
    case Family::Gaussian: {
      const double r = x - eta;
      return -0.5 * r * r / phi - 0.5 * std::log(2.0 * M_PI * phi);
    }
    case Family::Poisson:
    case Family::Bernoulli:
      return detail::loglik_unit(spec.family, x, eta);
    case Family::QuasiPoisson:
      return detail::loglik_unit(Family::Poisson, x, eta) / phi;
  }
  return 0.0;
}

double saturated_loglik_term(const FamilySpec& spec, double x, double phi) {
  check_support(spec, x);
  require_positive_phi(spec, phi);
  switch (spec.family) {
    case Family::Gaussian:
      return -0.5 * std::log(2.0 * M_PI * phi);
    case Family::Poisson:
      return x > 0.0 ? x * std::log(x) - x - std::lgamma(x + 1.0) : 0.0;
    case Family::QuasiPoisson:
      return (x > 0.0 ? x * std::log(x) - x - std::lgamma(x + 1.0) : 0.0) / phi;
    case Family::Bernoulli:
      return 0.0;
  }
  return 0.0;
}

double deviance_term(const FamilySpec& spec, double x, double mu) {
  check_support(spec, x);
  switch (spec.family) {
    case Family::Gaussian: {
      if (!std::isfinite(mu)) break;
      const double r = x - mu;
      return r * r;
    }
    case Family::Poisson:
    case Family::QuasiPoisson: {
      if (!(mu >= 0.0) || !std::isfinite(mu)) break;
      if (x == 0.0) return 2.0 * mu;
      if (mu == 0.0) break;
      const double d = 2.0 * (x * std::log(x / mu) - (x - mu));
      return d < 0.0 ? 0.0 : d;
    }
    case Family::Bernoulli: {
      if (!(mu >= 0.0 && mu <= 1.0)) break;
      if (x == 1.0) {
        if (mu == 0.0) break;
        return -2.0 * std::log(mu);
      }
      if (mu == 1.0) break;
      return -2.0 * std::log1p(-mu);
    }
  }
  throw DomainError("mean " + describe(mu) + " incompatible with observation " + describe(x) +
                    " for family " + to_string(spec.family));
}

double variance_function(const FamilySpec& spec, double mu) {
  switch (spec.family) {
    case Family::Gaussian:
      if (!std::isfinite(mu)) break;
      return 1.0;
    case Family::Poisson:
    case Family::QuasiPoisson:
      if (!(mu > 0.0) || !std::isfinite(mu)) break;
      return mu;
    case Family::Bernoulli:
      if (!(mu > 0.0 && mu < 1.0)) break;
      return mu * (1.0 - mu);
  }
  throw DomainError("mean " + describe(mu) + " outside the mean domain of " + to_string(spec.family));
}

}  // namespace fpca
