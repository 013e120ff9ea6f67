#pragma once

#include <cmath>
#include <string>
#include <string_view>

namespace fpca {

enum class Family { Gaussian, Poisson, Bernoulli, QuasiPoisson };
enum class Link { Identity, Log, Logit };
enum class DispersionStructure { None, Scalar, PerColumn };

/// Distribution family with its canonical link and dispersion layout.
///
/// Poisson and Bernoulli carry no dispersion, QuasiPoisson a scalar one,
/// Gaussian either a scalar or one value per column.
struct FamilySpec {
  Family family = Family::Gaussian;
  DispersionStructure dispersion = DispersionStructure::Scalar;

  /// Family with its default dispersion structure.
  static FamilySpec make(Family family);
  /// Throws InvalidArgument when the structure is not allowed for the family.
  static FamilySpec make(Family family, DispersionStructure dispersion);

  static FamilySpec gaussian() { return make(Family::Gaussian); }
  static FamilySpec poisson() { return make(Family::Poisson); }
  static FamilySpec bernoulli() { return make(Family::Bernoulli); }
  static FamilySpec quasi_poisson() { return make(Family::QuasiPoisson); }

  Link link() const noexcept;
  bool has_dispersion() const noexcept { return dispersion != DispersionStructure::None; }

  friend bool operator==(const FamilySpec&, const FamilySpec&) = default;
};

Family parse_family(std::string_view name);
std::string to_string(Family family);

/// True when x is a possible observation (Poisson: nonnegative integer,
/// Bernoulli: 0 or 1, Gaussian: finite).
bool in_support(const FamilySpec& spec, double x) noexcept;
/// Throws DomainError when !in_support.
void check_support(const FamilySpec& spec, double x);

double link(const FamilySpec& spec, double mu);
double inv_link(const FamilySpec& spec, double eta);

/// Per-cell log-likelihood [x*w - b(w)]/a(phi) + c(x, phi) at linear predictor eta.
/// QuasiPoisson returns the Poisson term divided by phi.
double loglik_term(const FamilySpec& spec, double x, double eta, double phi = 1.0);
/// Log-likelihood of the saturated model (mu = x) for a single cell.
double saturated_loglik_term(const FamilySpec& spec, double x, double phi = 1.0);
/// Unit deviance, twice the saturated-minus-model gap at phi = 1.
double deviance_term(const FamilySpec& spec, double x, double mu);
double variance_function(const FamilySpec& spec, double mu);

// Means closer than this to a boundary of the mean domain are clamped before
// logs or variance weights are taken during iteration.
inline constexpr double kBoundaryEps = 1e-10;

namespace detail {

inline double softplus(double eta) noexcept {
  return eta > 0.0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
}

inline double inv_link(Family f, double eta) noexcept {
  switch (f) {
    case Family::Gaussian:
      return eta;
    case Family::Poisson:
    case Family::QuasiPoisson:
      return std::exp(eta);
    case Family::Bernoulli:
      return eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
  }
  return eta;
}

// Unchecked log-likelihood at phi = 1 (QuasiPoisson uses the Poisson term).
inline double loglik_unit(Family f, double x, double eta) noexcept {
  switch (f) {
    case Family::Gaussian: {
      const double r = x - eta;
      return -0.5 * r * r - 0.5 * std::log(2.0 * M_PI);
    }
    case Family::Poisson:
    case Family::QuasiPoisson:
      return x * eta - std::exp(eta) - std::lgamma(x + 1.0);
    case Family::Bernoulli:
      return x * eta - softplus(eta);
  }
  return 0.0;
}

// Data-dependent part of loglik_unit; loglik_unit = kernel + constant.
inline double loglik_kernel(Family f, double x, double eta) noexcept {
  switch (f) {
    case Family::Gaussian: {
      const double r = x - eta;
      return -0.5 * r * r;
    }
    case Family::Poisson:
    case Family::QuasiPoisson:
      return x * eta - std::exp(eta);
    case Family::Bernoulli:
      return x * eta - softplus(eta);
  }
  return 0.0;
}

inline double loglik_constant(Family f, double x) noexcept {
  switch (f) {
    case Family::Gaussian:
      return -0.5 * std::log(2.0 * M_PI);
    case Family::Poisson:
    case Family::QuasiPoisson:
      return -std::lgamma(x + 1.0);
    case Family::Bernoulli:
      return 0.0;
  }
  return 0.0;
}

// Kernel of the saturated model (mu = x).
inline double saturated_kernel(Family f, double x) noexcept {
  switch (f) {
    case Family::Gaussian:
      return 0.0;
    case Family::Poisson:
    case Family::QuasiPoisson:
      return x > 0.0 ? x * std::log(x) - x : 0.0;
    case Family::Bernoulli:
      return 0.0;
  }
  return 0.0;
}

// Unchecked IRLS working weight b''(w) with the mean clamped off the boundary.
inline double working_weight(Family f, double mu) noexcept {
  switch (f) {
    case Family::Gaussian:
      return 1.0;
    case Family::Poisson:
    case Family::QuasiPoisson:
      return mu < kBoundaryEps ? kBoundaryEps : mu;
    case Family::Bernoulli: {
      const double v = mu * (1.0 - mu);
      return v < kBoundaryEps ? kBoundaryEps : v;
    }
  }
  return 1.0;
}

}  // namespace detail
}  // namespace fpca
