#include "fpca/glm.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <cmath>
#include <limits>
#include <string>

#include "fpca/error.hpp"

namespace fpca {

namespace {

constexpr double kBernoulliBoundary = 30.0;
constexpr int kMaxHalvings = 20;
constexpr double kRankTolerance = 1e-12;

// Log-likelihood without the normalizing constants, which do not depend on eta.
double weighted_kernel(Family f, const Eigen::VectorXd& y, const Eigen::VectorXd& eta, const Eigen::VectorXd& w) {
  double ll = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) ll += w[i] * detail::loglik_kernel(f, y[i], eta[i]);
  return ll;
}

void check_rank(const Eigen::MatrixXd& x) {
  const auto d = x.cols();
  if (x.rows() < d) {
    throw SingularDesign("design has " + std::to_string(x.rows()) + " observations for " + std::to_string(d) +
                         " coefficients");
  }
  const Eigen::MatrixXd gram = x.transpose() * x;
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
  const Eigen::VectorXd diag = ldlt.vectorD();
  const double top = diag.cwiseAbs().maxCoeff();
  if (!(top > 0.0) || ldlt.info() != Eigen::Success || diag.minCoeff() <= kRankTolerance * top) {
    throw SingularDesign("design matrix is rank deficient");
  }
}

}  // namespace

GlmFit fit_glm(const GlmProblem& problem, const GlmOptions& options) {
  const Eigen::Index d = problem.covariates.cols() + (problem.include_intercept ? 1 : 0);
  return fit_glm(problem, options, Eigen::VectorXd::Zero(d));
}

GlmFit fit_glm(const GlmProblem& problem, const GlmOptions& options, const Eigen::VectorXd& start) {
  const auto& spec = problem.family;
  const Family fam = spec.family;
  const Eigen::Index m = problem.responses.size();
  if (problem.covariates.rows() != m) throw InvalidArgument("covariate rows must match responses");
  if (problem.offsets.size() != 0 && problem.offsets.size() != m) throw InvalidArgument("offset length mismatch");
  if (problem.weights.size() != 0 && problem.weights.size() != m) throw InvalidArgument("weight length mismatch");
  if (!(options.tol > 0.0) || options.max_iter < 1) throw InvalidArgument("tol must be positive and max_iter >= 1");

  const Eigen::Index d = problem.covariates.cols() + (problem.include_intercept ? 1 : 0);
  if (start.size() != d) throw InvalidArgument("start vector length mismatch");
  if (d == 0) throw SingularDesign("design has no columns");

  Eigen::MatrixXd x(m, d);
  if (problem.include_intercept) {
    x.col(0).setOnes();
    x.rightCols(d - 1) = problem.covariates;
  } else {
    x = problem.covariates;
  }
  bool singular = false;
  try {
    check_rank(x);
  } catch (const SingularDesign&) {
    if (!options.minimum_norm) throw;
    singular = true;
  }

  const Eigen::VectorXd offset = problem.offsets.size() ? problem.offsets : Eigen::VectorXd::Zero(m);
  const Eigen::VectorXd prior = problem.weights.size() ? problem.weights : Eigen::VectorXd::Ones(m);
  for (Eigen::Index i = 0; i < m; ++i) check_support(spec, problem.responses[i]);
  const Eigen::VectorXd& y = problem.responses;

  double saturated = 0.0;
  double constant = 0.0;
  for (Eigen::Index i = 0; i < m; ++i) {
    saturated += prior[i] * detail::saturated_kernel(fam, y[i]);
    constant += prior[i] * detail::loglik_constant(fam, y[i]);
  }

  GlmFit fit;
  fit.has_intercept = problem.include_intercept;
  Eigen::VectorXd beta = start;
  Eigen::VectorXd eta = offset + x * beta;
  double ll = weighted_kernel(fam, y, eta, prior);
  if (!std::isfinite(ll)) {
    beta.setZero();
    eta = offset;
    ll = weighted_kernel(fam, y, eta, prior);
  }
  double dev = 2.0 * (saturated - ll);

  Eigen::VectorXd mu(m), w(m), score(d);
  Eigen::MatrixXd xw(m, d);
  for (int it = 1; it <= options.max_iter; ++it) {
    fit.n_iterations = it;
    for (Eigen::Index i = 0; i < m; ++i) {
      mu[i] = detail::inv_link(fam, eta[i]);
      w[i] = prior[i] * detail::working_weight(fam, mu[i]);
    }
    score.noalias() = x.transpose() * (prior.array() * (y - mu).array()).matrix();
    xw = x.array().colwise() * w.array();
    const Eigen::MatrixXd info = x.transpose() * xw;
    Eigen::VectorXd delta;
    if (singular) {
      Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(d, d);
      cod.setThreshold(kRankTolerance);
      delta = cod.compute(info).solve(score);
    } else {
      delta = info.ldlt().solve(score);
    }

    if (fam == Family::Gaussian) {
      // Identity link: one weighted least-squares step is exact.
      const Eigen::VectorXd cand = beta + delta;
      const Eigen::VectorXd cand_eta = offset + x * cand;
      const double cand_ll = weighted_kernel(fam, y, cand_eta, prior);
      if (cand_ll >= ll) {
        beta = cand;
        eta = cand_eta;
        ll = cand_ll;
      }
      dev = 2.0 * (saturated - ll);
      fit.converged = true;
      break;
    }

    double step = 1.0;
    bool accepted = false;
    Eigen::VectorXd cand, cand_eta;
    double cand_ll = -std::numeric_limits<double>::infinity();
    for (int h = 0; h <= kMaxHalvings; ++h, step *= 0.5) {
      cand = beta + step * delta;
      cand_eta = offset + x * cand;
      cand_ll = weighted_kernel(fam, y, cand_eta, prior);
      if (std::isfinite(cand_ll) && cand_ll >= ll) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // The Newton direction no longer improves the likelihood at machine
      // precision. That is convergence when the predicted gain is negligible.
      const double predicted = 0.5 * delta.dot(score);
      if (predicted <= options.tol * (std::abs(dev) + 0.1)) {
        fit.converged = true;
        break;
      }
      throw NonConvergence("IRLS step halving failed to increase the likelihood", beta);
    }
    beta = cand;
    eta = cand_eta;
    const double new_dev = 2.0 * (saturated - cand_ll);
    ll = cand_ll;
    const double change = std::abs(dev - new_dev) / (std::abs(new_dev) + 0.1);
    dev = new_dev;
    if (fam == Family::Bernoulli && eta.cwiseAbs().maxCoeff() > kBernoulliBoundary) {
      fit.converged = true;
      fit.boundary = true;
      break;
    }
    if (change < options.tol) {
      fit.converged = true;
      break;
    }
  }

  fit.coefficients = beta;
  fit.loglik = ll + constant;
  fit.deviance = dev;
  return fit;
}

Eigen::VectorXd predict_eta(const GlmFit& fit, const Eigen::MatrixXd& covariates, const Eigen::VectorXd& offsets) {
  const Eigen::Index expected = fit.coefficients.size() - (fit.has_intercept ? 1 : 0);
  if (covariates.cols() != expected) {
    throw InvalidArgument("covariates have " + std::to_string(covariates.cols()) + " columns, fit expects " +
                          std::to_string(expected));
  }
  if (offsets.size() != covariates.rows()) throw InvalidArgument("offset length mismatch");
  Eigen::VectorXd eta = offsets + covariates * fit.coefficients.tail(expected);
  if (fit.has_intercept) eta.array() += fit.coefficients[0];
  return eta;
}

}  // namespace fpca
