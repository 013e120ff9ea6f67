#pragma once

#include <Eigen/Core>

#include "fpca/expfam.hpp"

namespace fpca {

/// A single GLM with per-observation offsets: eta = offset + [1] X b.
struct GlmProblem {
  Eigen::VectorXd responses;
  Eigen::MatrixXd covariates;
  Eigen::VectorXd offsets;  // empty means zero
  FamilySpec family;
  bool include_intercept = false;
  Eigen::VectorXd weights;  // prior weights; empty means unit
};

struct GlmOptions {
  double tol = 1e-8;  // relative deviance change
  int max_iter = 100;
  // Take minimum-norm Newton steps on a rank-deficient design instead of
  // throwing SingularDesign. The coefficients are then one of many maximizers.
  bool minimum_norm = false;
};

struct GlmFit {
  // Intercept first when present, then one entry per covariate column.
  Eigen::VectorXd coefficients;
  double loglik = 0.0;    // at phi = 1, prior-weighted
  double deviance = 0.0;  // prior-weighted
  int n_iterations = 0;
  bool converged = false;
  bool has_intercept = false;
  bool boundary = false;  // Bernoulli fit stopped at |eta| > 30
};

/// Maximum likelihood by IRLS with step halving. Dispersion is not estimated:
/// for canonical links it only scales the likelihood.
///
/// Throws SingularDesign for a rank-deficient design (after intercept
/// augmentation) and NonConvergence when no damped step improves the
/// likelihood away from the optimum.
GlmFit fit_glm(const GlmProblem& problem, const GlmOptions& options = {});
/// Same, starting from `start` instead of zero. The result's log-likelihood is
/// never below the starting point's.
GlmFit fit_glm(const GlmProblem& problem, const GlmOptions& options, const Eigen::VectorXd& start);

/// offsets + X * coefficients, adding the intercept when the fit has one.
Eigen::VectorXd predict_eta(const GlmFit& fit, const Eigen::MatrixXd& covariates, const Eigen::VectorXd& offsets);

}  // namespace fpca
