// Acceptance checks. Each test prints one line:
//   criterion N: PASS|FAIL (details)
#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>
#include <unsupported/Eigen/NonLinearOptimization>

#include "cli.hpp"
#include "fpca/aglm.hpp"
#include "fpca/csv.hpp"
#include "fpca/decomposition.hpp"
#include "fpca/error.hpp"
#include "fpca/random.hpp"
#include "fpca/selection.hpp"
#include "fpca/simulate.hpp"

using namespace fpca;
namespace fs = std::filesystem;

namespace {

void verdict(int n, bool pass, const std::string& detail) {
  std::cout << "criterion " << n << ": " << (pass ? "PASS" : "FAIL") << " (" << detail << ")" << std::endl;
  EXPECT_TRUE(pass) << detail;
}

std::string fixed(double v, int digits = 3) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Eigen::MatrixXd normal_matrix(Index n, Index p, Rng& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd m(n, p);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < p; ++j) m(i, j) = z(rng);
  return m;
}

ObservationSet from_matrix(const Eigen::MatrixXd& m) {
  std::vector<Cell> cells;
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) cells.push_back({i, j, m(i, j)});
  return {m.rows(), m.cols(), cells};
}

// Rank-k reconstruction through the eigenvectors of X^T X.
Eigen::MatrixXd eigen_truncation(const Eigen::MatrixXd& x, int k) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(x.transpose() * x);
  const Eigen::MatrixXd v = es.eigenvectors().rightCols(k);
  return x * v * v.transpose();
}

SimOptions table_options(int k_true) {
  SimOptions o;
  for (int k = 1; k <= k_true + 4; ++k) o.candidates.push_back(k);
  return o;
}

}  // namespace

TEST(Acceptance, Criterion1_KRecoveryByInformationCriteria) {
  const auto t0 = std::chrono::steady_clock::now();
  bool pass = true;
  std::ostringstream detail;
  for (int k_true : {2, 3, 4}) {
    for (double tau : {0.1, 0.2}) {
      SimDesign d;
      d.k_true = k_true;
      d.tau = tau;
      d.n_replications = 100;
      d.seed = 1000 + 10 * k_true + static_cast<int>(tau * 10);
      const auto rep = run_k_recovery(d, {SimRule::BIC, SimRule::AIC}, table_options(k_true).candidates,
                                      table_options(k_true));
      const double bic = rep.summaries[0].percent_correct;
      const double aic = rep.summaries[1].percent_correct;
      pass = pass && bic >= 99.0 && rep.n_failed == 0;
      if (k_true == 2 && tau == 0.1) pass = pass && aic < 60.0;
      detail << "k=" << k_true << ",tau=" << tau << ": bic " << bic << "% aic " << aic << "%; ";
    }
  }
  detail << "elapsed " << fixed(seconds_since(t0), 0) << "s";
  verdict(1, pass, detail.str());
}

TEST(Acceptance, Criterion2_KRecoveryByCrossValidation) {
  const auto t0 = std::chrono::steady_clock::now();
  SimDesign d;
  d.k_true = 2;
  d.tau = 0.1;
  d.n_replications = 100;
  d.seed = 2000;
  SimOptions o = table_options(2);
  o.cv_q = 0.2;
  o.cv_reps = 10;
  const auto rep = run_k_recovery(d, {SimRule::CV}, o.candidates, o);
  const double pc = rep.summaries[0].percent_correct;
  verdict(2, pc >= 99.0 && rep.n_failed == 0,
          "cv " + fixed(pc, 1) + "% correct, failed " + std::to_string(rep.n_failed) + ", elapsed " +
              fixed(seconds_since(t0), 0) + "s");
}

TEST(Acceptance, Criterion3_HiddenCellRmsep) {
  struct Cell3 {
    Index n;
    int k;
    double target;
  };
  bool pass = true;
  std::ostringstream detail;
  for (const auto& c : {Cell3{30, 2, 0.273}, Cell3{60, 4, 0.275}}) {
    SimDesign d;
    d.n = c.n;
    d.p = c.n;
    d.k_true = c.k;
    d.tau = 0.1;
    d.n_replications = 100;
    d.seed = 3000 + static_cast<std::uint64_t>(c.n);
    const auto rep = run_rmsep(d, SimRule::BIC, table_options(c.k));
    const double rmsep = rep.summaries[0].mean_rmsep;

    // Error of the generating means on the same hidden cells: no fitted
    // predictor can be expected to beat this by much.
    double truth_ss = 0.0;
    std::size_t cells = 0;
    for (int r = 0; r < d.n_replications; ++r) {
      const auto data = generate_dataset(d, r, coverage_for(c.k + 6, Variant::Covariance));
      for (const auto& h : data.hidden) {
        const double mean = data.truth.mu[h.col] + data.truth.alpha.row(h.row).dot(data.truth.beta.row(h.col));
        truth_ss += (h.value - mean) * (h.value - mean);
        ++cells;
      }
    }
    const double oracle = std::sqrt(truth_ss / static_cast<double>(cells));
    pass = pass && std::abs(rmsep - c.target) <= 0.03;
    detail << "n=" << c.n << ",k=" << c.k << ": rmsep " << fixed(rmsep) << " (target " << c.target
           << " +/- 0.03; true-mean rmsep " << fixed(oracle) << ", bic correct "
           << rep.summaries[0].percent_correct << "%); ";
  }
  verdict(3, pass, detail.str());
}

TEST(Acceptance, Criterion4_SvdOracle) {
  Rng rng(4000);
  double worst_simple = 0.0;
  double worst_cov = 0.0;
  for (int m = 0; m < 50; ++m) {
    const Eigen::MatrixXd x = normal_matrix(20, 15, rng);
    const auto s = from_matrix(x);
    const Eigen::RowVectorXd mean = x.colwise().mean();
    const Eigen::MatrixXd centered = x.rowwise() - mean;
    for (int k : {1, 2, 5}) {
      FpcaConfig c;
      c.k = k;
      c.tol = 1e-14;
      c.eta_tol = 1e-11;
      c.max_outer_iter = 50000;
      c.seed = static_cast<std::uint64_t>(100 * m + k);
      const auto simple = fit_fpca(s, Variant::Simple, FamilySpec::gaussian(), c);
      const Eigen::MatrixXd svd = eigen_truncation(x, k);
      worst_simple = std::max(worst_simple, (simple.eta_matrix() - svd).norm() / svd.norm());

      const auto cov = fit_fpca(s, Variant::Covariance, FamilySpec::gaussian(), c);
      const Eigen::MatrixXd pca = eigen_truncation(centered, k).rowwise() + mean;
      worst_cov = std::max(worst_cov, (cov.eta_matrix() - pca).norm() / pca.norm());
    }
  }
  std::ostringstream detail;
  detail << "max relative Frobenius error: simple " << std::scientific << std::setprecision(2) << worst_simple
         << ", covariance " << worst_cov << " (bound 1e-6)";
  verdict(4, worst_simple < 1e-6 && worst_cov < 1e-6, detail.str());
}

TEST(Acceptance, Criterion5_MonotoneAscent) {
  Rng rng(5000);
  std::uniform_int_distribution<int> pick(0, 5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  int violations = 0;
  int failures = 0;
  double worst = 0.0;
  std::size_t halfsteps = 0;
  const int n_fits = 1000;
  for (int f = 0; f < n_fits; ++f) {
    // Family/variant combinations: gaussian x3 variants, poisson, quasi-poisson, bernoulli.
    const int combo = pick(rng);
    FamilySpec family = FamilySpec::gaussian();
    Variant variant = u(rng) < 0.5 ? Variant::Simple : Variant::Covariance;
    if (combo == 1) variant = Variant::Correlation;
    if (combo == 2 || combo == 3) family = FamilySpec::poisson();
    if (combo == 4) family = FamilySpec::quasi_poisson();
    if (combo == 5) family = FamilySpec::bernoulli();

    const Index n = 6 + static_cast<Index>(u(rng) * 10);
    const Index p = 5 + static_cast<Index>(u(rng) * 8);
    const int k = 1 + static_cast<int>(u(rng) * 3);
    const double tau = u(rng) < 0.5 ? 0.0 : 0.2;
    const Eigen::MatrixXd a = normal_matrix(n, k, rng) * 0.7;
    const Eigen::MatrixXd b = normal_matrix(p, k, rng) * 0.7;
    const Eigen::MatrixXd eta = a * b.transpose();
    std::vector<Cell> cells;
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < p; ++j) {
        if (u(rng) < tau) continue;
        double x = 0.0;
        switch (family.family) {
          case Family::Gaussian:
            x = eta(i, j) + 0.5 * z(rng);
            break;
          case Family::Poisson:
          case Family::QuasiPoisson:
            x = std::poisson_distribution<int>(std::exp(1.0 + eta(i, j)))(rng);
            break;
          case Family::Bernoulli:
            x = u(rng) < 1.0 / (1.0 + std::exp(-eta(i, j))) ? 1.0 : 0.0;
            break;
        }
        cells.push_back({i, j, x});
      }
    }
    const ObservationSet s(n, p, cells);
    if (!check_coverage(s, coverage_for(k, variant)).ok()) {
      --f;  // redraw this fit
      continue;
    }
    FpcaConfig c;
    c.k = k;
    c.seed = static_cast<std::uint64_t>(f);
    try {
      const auto fit = fit_fpca(s, variant, family, c);
      for (std::size_t t = 1; t < fit.halfstep_trace.size(); ++t) {
        const double change = fit.halfstep_trace[t] - fit.halfstep_trace[t - 1];
        worst = std::min(worst, change);
        violations += change < -1e-9;
      }
      halfsteps += fit.halfstep_trace.size();
    } catch (const Error&) {
      ++failures;
    }
  }
  std::ostringstream detail;
  detail << n_fits << " fits, " << halfsteps << " half-steps, " << violations << " violations, most negative change "
         << std::scientific << std::setprecision(2) << worst << ", " << failures << " fits raised errors";
  verdict(5, violations == 0 && failures == 0, detail.str());
}

namespace {

// Residuals of the rank-1 model on observed cells: x_ij - a_i b_j.
struct RankOneResiduals {
  using Scalar = double;
  using InputType = Eigen::VectorXd;
  using ValueType = Eigen::VectorXd;
  using JacobianType = Eigen::MatrixXd;
  enum { InputsAtCompileTime = Eigen::Dynamic, ValuesAtCompileTime = Eigen::Dynamic };

  std::vector<Cell> cells;
  Index n = 0;
  Index p = 0;

  int inputs() const { return static_cast<int>(n + p); }
  int values() const { return static_cast<int>(cells.size()); }
  int operator()(const Eigen::VectorXd& theta, Eigen::VectorXd& r) const {
    for (std::size_t t = 0; t < cells.size(); ++t) {
      const auto& c = cells[t];
      r[static_cast<Index>(t)] = c.value - theta[c.row] * theta[n + c.col];
    }
    return 0;
  }
  int df(const Eigen::VectorXd& theta, Eigen::MatrixXd& jac) const {
    jac.setZero();
    for (std::size_t t = 0; t < cells.size(); ++t) {
      const auto& c = cells[t];
      jac(static_cast<Index>(t), c.row) = -theta[n + c.col];
      jac(static_cast<Index>(t), n + c.col) = -theta[c.row];
    }
    return 0;
  }
};

}  // namespace

TEST(Acceptance, Criterion6_MaskedBruteForceOracle) {
  Rng rng(6000);
  std::normal_distribution<double> z(0.0, 1.0);
  double worst = 0.0;
  int problems = 0;
  while (problems < 30) {
    const Eigen::MatrixXd a = normal_matrix(4, 1, rng), b = normal_matrix(4, 1, rng);
    std::vector<int> order(16);
    for (int t = 0; t < 16; ++t) order[static_cast<std::size_t>(t)] = t;
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<bool> hidden(16, false);
    for (int t = 0; t < 4; ++t) hidden[static_cast<std::size_t>(order[static_cast<std::size_t>(t)])] = true;
    std::vector<Cell> cells;
    for (Index i = 0; i < 4; ++i)
      for (Index j = 0; j < 4; ++j)
        if (!hidden[static_cast<std::size_t>(4 * i + j)]) cells.push_back({i, j, a(i, 0) * b(j, 0) + 0.3 * z(rng)});
    const ObservationSet s(4, 4, cells);
    if (!check_coverage(s, coverage_for(1, Variant::Simple)).ok()) continue;
    ++problems;

    FpcaConfig c;
    c.k = 1;
    c.tol = 1e-15;
    c.max_outer_iter = 20000;
    c.seed = static_cast<std::uint64_t>(problems);
    const auto fit = fit_fpca(s, Variant::Simple, FamilySpec::gaussian(), c);
    const double constant = -0.5 * static_cast<double>(cells.size()) * std::log(2.0 * M_PI);

    RankOneResiduals functor{cells, 4, 4};
    double best_rss = std::numeric_limits<double>::infinity();
    for (int start = 0; start < 20; ++start) {
      Eigen::VectorXd theta(8);
      for (Index t = 0; t < 8; ++t) theta[t] = z(rng);
      Eigen::LevenbergMarquardt<RankOneResiduals> lm(functor);
      lm.parameters.ftol = 1e-15;
      lm.parameters.xtol = 1e-15;
      lm.parameters.maxfev = 20000;
      lm.minimize(theta);
      Eigen::VectorXd r(static_cast<Index>(cells.size()));
      functor(theta, r);
      best_rss = std::min(best_rss, r.squaredNorm());
    }
    const double lm_loglik = constant - 0.5 * best_rss;
    worst = std::max(worst, std::abs(fit.objective - lm_loglik));
  }
  std::ostringstream detail;
  detail << "30 problems, max |loglik(AGLM) - loglik(LM multistart)| = " << std::scientific << std::setprecision(2)
         << worst << " (bound 1e-6)";
  verdict(6, worst <= 1e-6, detail.str());
}

TEST(Acceptance, Criterion7_DevianceIdentity) {
  Rng rng(7000);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> z(0.0, 1.0);
  double worst = 0.0;
  const FamilySpec families[] = {FamilySpec::gaussian(), FamilySpec::poisson(), FamilySpec::quasi_poisson(),
                                 FamilySpec::bernoulli()};
  for (const auto& spec : families) {
    for (int t = 0; t < 10000; ++t) {
      double x = 0.0, mu = 0.0;
      switch (spec.family) {
        case Family::Gaussian:
          x = 5.0 * z(rng);
          mu = 5.0 * z(rng);
          break;
        case Family::Poisson:
        case Family::QuasiPoisson:
          mu = std::exp(4.0 * z(rng));
          mu = std::min(mu, 1e4);
          x = std::poisson_distribution<int>(u(rng) < 0.5 ? mu : std::exp(2.0 * z(rng)))(rng);
          break;
        case Family::Bernoulli:
          mu = 1.0 / (1.0 + std::exp(-4.0 * z(rng)));
          x = u(rng) < 0.5 ? 1.0 : 0.0;
          break;
      }
      const double eta = link(spec, mu);
      const double identity = 2.0 * (saturated_loglik_term(spec, x) - loglik_term(spec, x, eta));
      worst = std::max(worst, std::abs(identity - deviance_term(spec, x, mu)));
    }
  }
  std::ostringstream detail;
  detail << "4 families x 10000 pairs, max |2(l_sat - l) - deviance| = " << std::scientific << std::setprecision(2)
         << worst << " (bound 1e-10)";
  verdict(7, worst <= 1e-10, detail.str());
}

TEST(Acceptance, Criterion8_CountWorkflow) {
  const auto t0 = std::chrono::steady_clock::now();
  const Index n = 110, p = 459;
  const int k_true = 9;
  const double phi = 3.0;
  Rng rng(8000);
  std::normal_distribution<double> z(0.0, 1.0);
  Eigen::MatrixXd a(n, k_true), b(p, k_true);
  for (Index i = 0; i < n; ++i) {
    a(i, 0) = 1.0;
    for (int r = 1; r < k_true; ++r) a(i, r) = z(rng);
  }
  for (Index j = 0; j < p; ++j) {
    b(j, 0) = 5.0 + 0.3 * z(rng);
    for (int r = 1; r < k_true; ++r) b(j, r) = (0.6 - 0.05 * (r - 1)) * z(rng);
  }
  std::vector<Cell> cells;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < p; ++j) {
      const double mu = std::exp(a.row(i).dot(b.row(j)));
      const double shape = mu / (phi - 1.0);
      const double xi = std::gamma_distribution<double>(shape, 1.0 / shape)(rng);
      cells.push_back({i, j, static_cast<double>(std::poisson_distribution<long>(mu * xi)(rng))});
    }
  }
  const ObservationSet s(n, p, cells);

  FpcaConfig c;
  c.seed = 8;
  const auto res = select_k_gic(s, Variant::Simple, FamilySpec::quasi_poisson(), {6, 7, 8, 9, 10, 11, 12},
                                Criterion::bic(), 14, c);
  ExplainedG2 ex;
  decompose(s, res.chosen_fit(), &ex);
  const double explained = ex.cumulative.back();
  const bool pass = res.chosen_k >= 8 && res.chosen_k <= 10 && explained > 0.95;
  std::ostringstream detail;
  detail << "chosen k " << res.chosen_k << ", phi_hat " << fixed(res.phi_reference.values[0], 2)
         << ", explained G^2 " << fixed(100.0 * explained, 2) << "% (first component " << fixed(100.0 * ex.cumulative[1], 2)
         << "%), elapsed " << fixed(seconds_since(t0), 0) << "s";
  verdict(8, pass, detail.str());
}

namespace {

std::map<std::string, std::string> outputs_of(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().filename() == "manifest.json") continue;
    out[fs::relative(e.path(), dir).string()] = read_text_file(e.path());
  }
  return out;
}

int run_quiet(std::vector<std::string> args) {
  std::ostringstream out, err;
  return cli::run(args, out, err);
}

}  // namespace

TEST(Acceptance, Criterion9_Determinism) {
  const fs::path root = fs::temp_directory_path() / "fpca_acceptance_determinism";
  fs::remove_all(root);
  const std::string data = (fs::path(FPCA_DATA_DIR) / "sim_k2" / "masked.csv").string();
  const std::string image = (fs::path(FPCA_DATA_DIR) / "image" / "image.csv").string();

  auto workflow = [&](const fs::path& dir, const std::string& threads) {
    const std::string t = threads;
    int rc = 0;
    rc |= run_quiet({"fit", "--input", data, "--variant", "covariance", "--k", "2", "--seed", "9", "--threads", t,
                     "--out", (dir / "fit").string()});
    rc |= run_quiet({"select", "--input", data, "--variant", "covariance", "--rule", "bic", "--seed", "9",
                     "--threads", t, "--out", (dir / "bic").string()});
    rc |= run_quiet({"select", "--input", data, "--variant", "covariance", "--rule", "cv", "--k-max", "4", "--seed",
                     "9", "--threads", t, "--out", (dir / "cv").string()});
    rc |= run_quiet({"decompose", "--fit", (dir / "fit").string(), "--threads", t, "--out", (dir / "dec").string()});
    rc |= run_quiet({"predict", "--fit", (dir / "fit").string(), "--difference", "--threads", t, "--out",
                     (dir / "pred").string()});
    rc |= run_quiet({"fit", "--input", image, "--window", "5,5,35,35", "--hole", "15,15,25,25", "--family",
                     "poisson", "--k", "3", "--seed", "9", "--threads", t, "--out", (dir / "image").string()});
    rc |= run_quiet({"simulate", "--n", "20", "--p", "20", "--k-true", "2", "--replications", "8", "--rules",
                     "bic,aic,cv", "--cv-reps", "2", "--seed", "9", "--threads", t, "--out",
                     (dir / "sim").string()});
    return rc;
  };

  bool pass = workflow(root / "a", "1") == 0 && workflow(root / "b", "0") == 0 && workflow(root / "c", "3") == 0;
  const auto a = outputs_of(root / "a");
  const auto b = outputs_of(root / "b");
  const auto c = outputs_of(root / "c");
  std::size_t differing = 0;
  for (const auto& [name, content] : a) {
    differing += !b.count(name) || b.at(name) != content;
    differing += !c.count(name) || c.at(name) != content;
  }
  pass = pass && !a.empty() && a.size() == b.size() && a.size() == c.size() && differing == 0;
  verdict(9, pass,
          std::to_string(a.size()) + " JSON/CSV outputs compared across 3 runs (threads 1, all, 3); " +
              std::to_string(differing) + " differ");
}
