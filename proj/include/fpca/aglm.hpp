#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "fpca/dataset.hpp"
#include "fpca/expfam.hpp"
#include "fpca/glm.hpp"

namespace fpca {

/// Simple: no column offset, scalar dispersion. Covariance: per-column offset
/// gamma_j, scalar dispersion. Correlation: per-column offset and dispersion.
enum class Variant { Simple, Covariance, Correlation };

Variant parse_variant(std::string_view name);
std::string to_string(Variant v);
inline bool has_gamma(Variant v) noexcept { return v != Variant::Simple; }

struct FpcaConfig {
  int k = 1;
  int n_starts = 5;
  double tol = 1e-7;  // relative log-likelihood change between outer iterations
  // When positive, convergence also requires the relative Frobenius change of
  // the n x p linear predictor to fall below eta_tol. The objective is
  // quadratic near its maximum, so the objective test alone pins the fitted
  // means only to about the square root of its own tolerance.
  double eta_tol = 0.0;
  int max_outer_iter = 500;
  std::uint64_t seed = 0;
  GlmOptions glm{};
};

/// Scalar (one value) or per-column dispersion estimate.
struct Dispersion {
  DispersionStructure structure = DispersionStructure::None;
  Eigen::VectorXd values;  // size 1 for None/Scalar, p for PerColumn

  static Dispersion unit() { return {DispersionStructure::None, Eigen::VectorXd::Ones(1)}; }
  double at(Index col) const { return structure == DispersionStructure::PerColumn ? values[col] : values[0]; }
};

struct FpcaFit {
  Eigen::MatrixXd alpha;  // n x k
  Eigen::MatrixXd beta;   // p x k
  Eigen::VectorXd gamma;  // p, zero for Simple
  Dispersion phi;
  double loglik = 0.0;    // at (theta, phi)
  double deviance = 0.0;  // sum of unit deviances over S
  // Objective maximized by the alternating fit (log-likelihood at the fitting
  // dispersion: 1, or the fixed column variances for Correlation).
  double objective = 0.0;
  std::vector<double> loglik_trace;    // objective after each outer iteration
  std::vector<double> halfstep_trace;  // objective after each row and column step
  std::vector<double> start_objectives;
  int start_index = 0;
  int iterations = 0;
  bool converged = false;

  Variant variant = Variant::Simple;
  FamilySpec family;
  int k = 0;

  Index n_rows() const noexcept { return alpha.rows(); }
  Index n_cols() const noexcept { return beta.rows(); }
  double eta(Index row, Index col) const { return gamma[col] + alpha.row(row).dot(beta.row(col)); }
  Eigen::MatrixXd eta_matrix() const;
};

/// p x k matrix of i.i.d. standard normals, determined by seed.
Eigen::MatrixXd init_beta(Index p, int k, std::uint64_t seed);

/// Rows and columns each need k+1 observations, k+2 when the variant has gamma.
CoverageRequirement coverage_for(int k, Variant variant);
/// Largest k the coverage of s supports for this variant (0 if none).
int max_supported_k(const ObservationSet& s, Variant variant);

/// Per-row GLMs with beta fixed: responses x_ij, covariates beta_j, offsets gamma_j.
/// column_weights are prior weights per column (empty means unit); warm_start
/// (n x k) seeds each row's IRLS.
Eigen::MatrixXd row_step(const ObservationSet& s, const Eigen::MatrixXd& beta, const Eigen::VectorXd& gamma,
                         const FamilySpec& family, const Eigen::VectorXd& column_weights = {},
                         const Eigen::MatrixXd* warm_start = nullptr, const GlmOptions& glm = {});

struct ColumnStepResult {
  Eigen::MatrixXd beta;
  Eigen::VectorXd gamma;
};

/// Per-column GLMs with alpha fixed; the intercept (gamma_j) is fitted iff the variant has gamma.
ColumnStepResult col_step(const ObservationSet& s, const Eigen::MatrixXd& alpha, Variant variant,
                          const FamilySpec& family, const Eigen::MatrixXd* warm_beta = nullptr,
                          const Eigen::VectorXd* warm_gamma = nullptr, const GlmOptions& glm = {});

/// Alternating GLM fit with n_starts random starts; keeps the start with the
/// highest objective (lowest index on ties).
FpcaFit fit_fpca(const ObservationSet& s, Variant variant, const FamilySpec& family, const FpcaConfig& config);

/// Residual-based dispersion after a fit, using the model degrees of freedom.
Dispersion estimate_dispersion(const ObservationSet& s, const FpcaFit& fit, Variant variant,
                               const FamilySpec& family);

/// Log-likelihood of the fit over s at the given dispersion. Dispersions are
/// floored at a tiny multiple of the data scale so that exact fits stay finite.
double fpca_loglik(const ObservationSet& s, const FpcaFit& fit, const Dispersion& phi);
double fpca_deviance(const ObservationSet& s, const FpcaFit& fit);

/// Dispersion structure used for a variant/family pair.
DispersionStructure resolve_dispersion(Variant variant, const FamilySpec& family);

}  // namespace fpca
