#include <cmath>
#include <random>

#include <Eigen/QR>
#include <gtest/gtest.h>

#include "fpca/error.hpp"
#include "fpca/glm.hpp"

using namespace fpca;

namespace {

struct Design {
  Eigen::MatrixXd x;
  Eigen::VectorXd offsets;
};

Design random_design(int m, int d, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  Design out{Eigen::MatrixXd(m, d), Eigen::VectorXd(m)};
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < d; ++j) out.x(i, j) = 0.5 * z(rng);
    out.offsets[i] = 0.3 * z(rng);
  }
  return out;
}

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd a(x.rows(), x.cols() + 1);
  a.col(0).setOnes();
  a.rightCols(x.cols()) = x;
  return a;
}

// Gradient of the log-likelihood of a canonical-link GLM: A^T W (y - mu).
Eigen::VectorXd score(const GlmProblem& p, const GlmFit& fit) {
  const Eigen::MatrixXd a = p.include_intercept ? with_intercept(p.covariates) : p.covariates;
  const Eigen::VectorXd eta = predict_eta(fit, p.covariates, p.offsets);
  Eigen::VectorXd r(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double w = p.weights.size() ? p.weights[i] : 1.0;
    r[i] = w * (p.responses[i] - inv_link(p.family, eta[i]));
  }
  return a.transpose() * r;
}

}  // namespace

TEST(Glm, GaussianMatchesLeastSquares) {
  const auto d = random_design(40, 3, 1);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::VectorXd y(40);
  for (int i = 0; i < 40; ++i) y[i] = 1.0 + d.x.row(i).sum() + d.offsets[i] + 0.2 * z(rng);

  GlmProblem p{y, d.x, d.offsets, FamilySpec::gaussian(), true, {}};
  const auto fit = fit_glm(p);
  const Eigen::VectorXd oracle = with_intercept(d.x).colPivHouseholderQr().solve(y - d.offsets);
  EXPECT_TRUE(fit.converged);
  EXPECT_LT((fit.coefficients - oracle).norm(), 1e-10);
  EXPECT_LE(fit.n_iterations, 2);
  const Eigen::VectorXd resid = y - predict_eta(fit, d.x, d.offsets);
  EXPECT_NEAR(fit.deviance, resid.squaredNorm(), 1e-10);
  EXPECT_NEAR(fit.loglik, -0.5 * resid.squaredNorm() - 20.0 * std::log(2.0 * M_PI), 1e-9);
}

TEST(Glm, PoissonSatisfiesScoreEquations) {
  const auto d = random_design(60, 2, 3);
  std::mt19937_64 rng(4);
  Eigen::VectorXd y(60);
  for (int i = 0; i < 60; ++i) {
    std::poisson_distribution<int> pois(std::exp(0.5 + d.x(i, 0) - d.x(i, 1) + d.offsets[i]));
    y[i] = pois(rng);
  }
  GlmProblem p{y, d.x, d.offsets, FamilySpec::poisson(), true, {}};
  const auto fit = fit_glm(p, {1e-12, 100});
  EXPECT_TRUE(fit.converged);
  EXPECT_LT(score(p, fit).norm(), 1e-6);
  EXPECT_NEAR(fit.coefficients[1], 1.0, 0.5);
}

TEST(Glm, BernoulliSatisfiesScoreEquationsWithoutIntercept) {
  const auto d = random_design(200, 2, 5);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd y(200);
  for (int i = 0; i < 200; ++i) {
    const double eta = 2.0 * d.x(i, 0) - d.x(i, 1) + d.offsets[i];
    y[i] = u(rng) < 1.0 / (1.0 + std::exp(-eta)) ? 1.0 : 0.0;
  }
  GlmProblem p{y, d.x, d.offsets, FamilySpec::bernoulli(), false, {}};
  const auto fit = fit_glm(p, {1e-12, 100});
  EXPECT_LT(score(p, fit).norm(), 1e-6);
  EXPECT_FALSE(fit.boundary);
}

TEST(Glm, PriorWeightsActLikeReplication) {
  const auto d = random_design(10, 1, 7);
  Eigen::VectorXd y(10);
  for (int i = 0; i < 10; ++i) y[i] = d.x(i, 0) + (i % 3);
  Eigen::VectorXd w = Eigen::VectorXd::Ones(10);
  w[4] = 3.0;

  GlmProblem weighted{y, d.x, {}, FamilySpec::gaussian(), true, w};
  Eigen::MatrixXd xr(12, 1);
  Eigen::VectorXd yr(12);
  xr.topRows(10) = d.x;
  yr.head(10) = y;
  xr(10, 0) = xr(11, 0) = d.x(4, 0);
  yr[10] = yr[11] = y[4];
  GlmProblem replicated{yr, xr, {}, FamilySpec::gaussian(), true, {}};
  EXPECT_LT((fit_glm(weighted).coefficients - fit_glm(replicated).coefficients).norm(), 1e-10);
}

TEST(Glm, WarmStartNeverLowersLikelihood) {
  const auto d = random_design(30, 2, 8);
  Eigen::VectorXd y(30);
  for (int i = 0; i < 30; ++i) y[i] = static_cast<double>((i * 7) % 5);
  GlmProblem p{y, d.x, {}, FamilySpec::poisson(), true, {}};
  const auto best = fit_glm(p, {1e-12, 100});
  const auto again = fit_glm(p, {1e-12, 100}, best.coefficients);
  EXPECT_GE(again.loglik, best.loglik - 1e-12);
  const Eigen::VectorXd far = Eigen::VectorXd::Constant(3, 2.0);
  EXPECT_NEAR(fit_glm(p, {1e-12, 100}, far).loglik, best.loglik, 1e-8);
}

TEST(Glm, SeparableBernoulliStopsAtBoundary) {
  Eigen::MatrixXd x(6, 1);
  x << -3, -2, -1, 1, 2, 3;
  Eigen::VectorXd y(6);
  y << 0, 0, 0, 1, 1, 1;
  GlmProblem p{y, x, {}, FamilySpec::bernoulli(), false, {}};
  const auto fit = fit_glm(p);
  EXPECT_TRUE(fit.boundary);
  EXPECT_GT(fit.coefficients[0], 5.0);
}

TEST(Glm, RankDeficientDesignThrows) {
  Eigen::MatrixXd x(5, 2);
  x.col(0).setLinSpaced(5, 0.0, 1.0);
  x.col(1) = 2.0 * x.col(0);
  GlmProblem p{Eigen::VectorXd::LinSpaced(5, 0.0, 4.0), x, {}, FamilySpec::gaussian(), false, {}};
  EXPECT_THROW(fit_glm(p), SingularDesign);
  Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(5, 1);
  GlmProblem q{Eigen::VectorXd::LinSpaced(5, 0.0, 4.0), ones, {}, FamilySpec::gaussian(), true, {}};
  EXPECT_THROW(fit_glm(q), SingularDesign);
}

TEST(Glm, InputValidation) {
  GlmProblem p{Eigen::VectorXd::Ones(3), Eigen::MatrixXd::Ones(2, 1), {}, FamilySpec::gaussian(), false, {}};
  EXPECT_THROW(fit_glm(p), InvalidArgument);
  GlmProblem q{Eigen::VectorXd::Constant(3, 0.5), Eigen::MatrixXd::Identity(3, 1), {}, FamilySpec::poisson(), false,
               {}};
  EXPECT_THROW(fit_glm(q), DomainError);
}
