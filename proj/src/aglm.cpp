#include "fpca/aglm.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <random>

#include "fpca/error.hpp"
#include "fpca/parallel.hpp"
#include "fpca/random.hpp"
#include "fpca/selection.hpp"

namespace fpca {

namespace {

// Below this many cells the per-row/per-column solves run serially.
constexpr std::size_t kParallelCells = 20000;
constexpr double kStartTieTolerance = 1e-10;
constexpr double kDispersionFloor = 1e-10;

// Row-major and column-major adjacency of the observed cells.
struct CellIndex {
  Index n_rows = 0;
  Index n_cols = 0;
  std::vector<std::size_t> row_ptr;
  std::vector<Index> row_col;
  std::vector<double> row_val;
  std::vector<std::size_t> col_ptr;
  std::vector<Index> col_row;
  std::vector<double> col_val;

  explicit CellIndex(const ObservationSet& s) : n_rows(s.n_rows()), n_cols(s.n_cols()) {
    const auto cells = s.cells();
    row_ptr.assign(static_cast<std::size_t>(n_rows) + 1, 0);
    col_ptr.assign(static_cast<std::size_t>(n_cols) + 1, 0);
    for (const auto& c : cells) {
      ++row_ptr[static_cast<std::size_t>(c.row) + 1];
      ++col_ptr[static_cast<std::size_t>(c.col) + 1];
    }
    for (std::size_t i = 1; i < row_ptr.size(); ++i) row_ptr[i] += row_ptr[i - 1];
    for (std::size_t j = 1; j < col_ptr.size(); ++j) col_ptr[j] += col_ptr[j - 1];
    row_col.resize(cells.size());
    row_val.resize(cells.size());
    col_row.resize(cells.size());
    col_val.resize(cells.size());
    auto row_fill = row_ptr;
    auto col_fill = col_ptr;
    for (const auto& c : cells) {
      const auto r = row_fill[static_cast<std::size_t>(c.row)]++;
      row_col[r] = c.col;
      row_val[r] = c.value;
      const auto q = col_fill[static_cast<std::size_t>(c.col)]++;
      col_row[q] = c.row;
      col_val[q] = c.value;
    }
  }

  std::size_t size() const noexcept { return row_col.size(); }
};

template <class F>
void for_each_block(std::size_t n, bool parallel, const char* what, F&& body) {
  std::vector<std::exception_ptr> errors;
  if (parallel) {
    errors = parallel_for_collect(n, body);
  } else {
    errors.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      try {
        body(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!errors[i]) continue;
    const std::string prefix = std::string(what) + " " + std::to_string(i) + ": ";
    try {
      std::rethrow_exception(errors[i]);
    } catch (const SingularDesign& e) {
      throw SingularDesign(prefix + e.what());
    } catch (const NonConvergence& e) {
      throw NonConvergence(prefix + e.what(), e.last_iterate());
    } catch (const DomainError& e) {
      throw DomainError(prefix + e.what());
    } catch (const Error& e) {
      throw ModelError(prefix + e.what());
    }
  }
}

Eigen::MatrixXd row_step_impl(const CellIndex& idx, const Eigen::MatrixXd& beta, const Eigen::VectorXd& gamma,
                              const FamilySpec& family, const Eigen::VectorXd& column_weights,
                              const Eigen::MatrixXd* warm, const GlmOptions& glm) {
  const Index k = beta.cols();
  Eigen::MatrixXd alpha(idx.n_rows, k);
  const bool weighted = column_weights.size() > 0;
  for_each_block(static_cast<std::size_t>(idx.n_rows), idx.size() >= kParallelCells, "row", [&](std::size_t i) {
    const auto begin = idx.row_ptr[i];
    const auto m = static_cast<Index>(idx.row_ptr[i + 1] - begin);
    GlmProblem problem;
    problem.family = family;
    problem.responses.resize(m);
    problem.covariates.resize(m, k);
    problem.offsets.resize(m);
    if (weighted) problem.weights.resize(m);
    for (Index t = 0; t < m; ++t) {
      const Index j = idx.row_col[begin + static_cast<std::size_t>(t)];
      problem.responses[t] = idx.row_val[begin + static_cast<std::size_t>(t)];
      problem.covariates.row(t) = beta.row(j);
      problem.offsets[t] = gamma[j];
      if (weighted) problem.weights[t] = column_weights[j];
    }
    const auto row = static_cast<Index>(i);
    const Eigen::VectorXd start = warm ? Eigen::VectorXd(warm->row(row).transpose()) : Eigen::VectorXd::Zero(k);
    alpha.row(row) = fit_glm(problem, glm, start).coefficients.transpose();
  });
  return alpha;
}

ColumnStepResult col_step_impl(const CellIndex& idx, const Eigen::MatrixXd& alpha, Variant variant,
                               const FamilySpec& family, const Eigen::MatrixXd* warm_beta,
                               const Eigen::VectorXd* warm_gamma, const GlmOptions& glm) {
  const Index k = alpha.cols();
  const bool intercept = has_gamma(variant);
  ColumnStepResult out{Eigen::MatrixXd(idx.n_cols, k), Eigen::VectorXd::Zero(idx.n_cols)};
  for_each_block(static_cast<std::size_t>(idx.n_cols), idx.size() >= kParallelCells, "column", [&](std::size_t j) {
    const auto begin = idx.col_ptr[j];
    const auto m = static_cast<Index>(idx.col_ptr[j + 1] - begin);
    GlmProblem problem;
    problem.family = family;
    problem.include_intercept = intercept;
    problem.responses.resize(m);
    problem.covariates.resize(m, k);
    for (Index t = 0; t < m; ++t) {
      const Index i = idx.col_row[begin + static_cast<std::size_t>(t)];
      problem.responses[t] = idx.col_val[begin + static_cast<std::size_t>(t)];
      problem.covariates.row(t) = alpha.row(i);
    }
    const auto col = static_cast<Index>(j);
    Eigen::VectorXd start = Eigen::VectorXd::Zero(k + (intercept ? 1 : 0));
    if (warm_beta) start.tail(k) = warm_beta->row(col).transpose();
    if (intercept && warm_gamma) start[0] = (*warm_gamma)[col];
    const auto coef = fit_glm(problem, glm, start).coefficients;
    out.beta.row(col) = coef.tail(k).transpose();
    if (intercept) out.gamma[col] = coef[0];
  });
  return out;
}

// Fitting objective: log-likelihood with phi = 1, except Gaussian cells use
// the fixed fitting dispersion of their column.
class Objective {
 public:
  Objective(const CellIndex& idx, const FamilySpec& family, const Eigen::VectorXd& fit_phi)
      : idx_(idx), family_(family.family), fit_phi_(fit_phi) {
    for (Index i = 0; i < idx.n_rows; ++i) {
      for (auto t = idx.row_ptr[static_cast<std::size_t>(i)]; t < idx.row_ptr[static_cast<std::size_t>(i) + 1]; ++t) {
        const double phi = phi_of(idx.row_col[t]);
        constant_ += family_ == Family::Gaussian ? -0.5 * std::log(2.0 * M_PI * phi)
                                                 : detail::loglik_constant(family_, idx.row_val[t]);
      }
    }
  }

  double operator()(const Eigen::MatrixXd& alpha, const Eigen::MatrixXd& beta, const Eigen::VectorXd& gamma) const {
    double kernel = 0.0;
    for (Index i = 0; i < idx_.n_rows; ++i) {
      double row_sum = 0.0;
      for (auto t = idx_.row_ptr[static_cast<std::size_t>(i)]; t < idx_.row_ptr[static_cast<std::size_t>(i) + 1];
           ++t) {
        const Index j = idx_.row_col[t];
        const double eta = gamma[j] + alpha.row(i).dot(beta.row(j));
        double term = detail::loglik_kernel(family_, idx_.row_val[t], eta);
        if (family_ == Family::Gaussian) term /= phi_of(j);
        row_sum += term;
      }
      kernel += row_sum;
    }
    return kernel + constant_;
  }

 private:
  double phi_of(Index j) const { return fit_phi_.size() ? fit_phi_[j] : 1.0; }

  const CellIndex& idx_;
  Family family_;
  Eigen::VectorXd fit_phi_;
  double constant_ = 0.0;
};

struct Chain {
  Eigen::MatrixXd alpha;
  Eigen::MatrixXd beta;
  Eigen::VectorXd gamma;
  std::vector<double> trace;
  std::vector<double> halfsteps;
  double objective = -std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
};

Chain run_chain(const CellIndex& idx, Variant variant, const FamilySpec& family, const FpcaConfig& config,
                const Eigen::VectorXd& fit_phi, std::uint64_t seed) {
  const Objective objective(idx, family, fit_phi);
  Eigen::VectorXd row_weights;
  if (fit_phi.size()) row_weights = fit_phi.cwiseInverse();

  Chain c;
  c.beta = init_beta(idx.n_cols, config.k, seed);
  c.gamma = Eigen::VectorXd::Zero(idx.n_cols);
  c.alpha = Eigen::MatrixXd::Zero(idx.n_rows, config.k);
  // Components beyond the data's rank make some row or column designs
  // singular; any maximizer of such a block keeps the ascent property.
  GlmOptions glm = config.glm;
  glm.minimum_norm = true;
  double previous = -std::numeric_limits<double>::infinity();
  Eigen::MatrixXd previous_eta;
  for (int it = 1; it <= config.max_outer_iter; ++it) {
    c.alpha = row_step_impl(idx, c.beta, c.gamma, family, row_weights, &c.alpha, glm);
    c.halfsteps.push_back(objective(c.alpha, c.beta, c.gamma));
    auto cols = col_step_impl(idx, c.alpha, variant, family, &c.beta, &c.gamma, glm);
    c.beta = std::move(cols.beta);
    c.gamma = std::move(cols.gamma);
    const double current = objective(c.alpha, c.beta, c.gamma);
    c.halfsteps.push_back(current);
    c.trace.push_back(current);
    c.iterations = it;
    c.objective = current;
    if (!std::isfinite(current)) throw ModelError("log-likelihood became non-finite");
    bool eta_settled = true;
    if (config.eta_tol > 0.0) {
      Eigen::MatrixXd eta = c.alpha * c.beta.transpose();
      eta.rowwise() += c.gamma.transpose();
      eta_settled = previous_eta.size() && (eta - previous_eta).norm() / (1.0 + eta.norm()) < config.eta_tol;
      previous_eta = std::move(eta);
    }
    if (it > 1 && eta_settled && std::abs(current - previous) / (1.0 + std::abs(previous)) < config.tol) {
      c.converged = true;
      break;
    }
    previous = current;
  }
  return c;
}

void validate(const ObservationSet& s, Variant variant, const FamilySpec& family, const FpcaConfig& config) {
  if (config.k < 1) throw InvalidArgument("k must be at least 1");
  if (config.k > std::min(s.n_rows(), s.n_cols())) throw InvalidArgument("k exceeds min(n, p)");
  if (config.n_starts < 1) throw InvalidArgument("n_starts must be at least 1");
  if (!(config.tol > 0.0)) throw InvalidArgument("tol must be positive");
  if (!(config.eta_tol >= 0.0)) throw InvalidArgument("eta_tol must be non-negative");
  if (config.max_outer_iter < 1) throw InvalidArgument("max_outer_iter must be at least 1");
  (void)resolve_dispersion(variant, family);
  for (const auto& c : s.cells()) check_support(family, c.value);
  require_coverage(s, coverage_for(config.k, variant));
}

// Column variances about the column means, the maximum-likelihood scale used
// to weight columns when fitting the Correlation variant.
Eigen::VectorXd column_ml_variances(const CellIndex& idx) {
  Eigen::VectorXd v(idx.n_cols);
  for (Index j = 0; j < idx.n_cols; ++j) {
    const auto b = idx.col_ptr[static_cast<std::size_t>(j)];
    const auto e = idx.col_ptr[static_cast<std::size_t>(j) + 1];
    double mean = 0.0;
    for (auto t = b; t < e; ++t) mean += idx.col_val[t];
    mean /= static_cast<double>(e - b);
    double ss = 0.0;
    for (auto t = b; t < e; ++t) ss += (idx.col_val[t] - mean) * (idx.col_val[t] - mean);
    v[j] = ss / static_cast<double>(e - b);
    if (!(v[j] > 0.0)) throw ModelError("column " + std::to_string(j) + " is constant; correlation scaling undefined");
  }
  return v;
}

double dispersion_floor(const ObservationSet& s) {
  double ms = 0.0;
  for (const auto& c : s.cells()) ms += c.value * c.value;
  return kDispersionFloor * (1.0 + ms / static_cast<double>(s.size()));
}

}  // namespace

Variant parse_variant(std::string_view name) {
  if (name == "simple") return Variant::Simple;
  if (name == "covariance") return Variant::Covariance;
  if (name == "correlation") return Variant::Correlation;
  throw InvalidArgument("unknown variant '" + std::string(name) + "'");
}

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Simple:
      return "simple";
    case Variant::Covariance:
      return "covariance";
    case Variant::Correlation:
      return "correlation";
  }
  return "unknown";
}

DispersionStructure resolve_dispersion(Variant variant, const FamilySpec& family) {
  if (variant == Variant::Correlation) {
    if (family.family != Family::Gaussian) {
      throw InvalidArgument("the correlation variant requires the gaussian family");
    }
    return DispersionStructure::PerColumn;
  }
  if (family.dispersion == DispersionStructure::PerColumn) {
    throw InvalidArgument("per-column dispersion is only available with the correlation variant");
  }
  return family.dispersion;
}

Eigen::MatrixXd FpcaFit::eta_matrix() const {
  Eigen::MatrixXd eta = alpha * beta.transpose();
  eta.rowwise() += gamma.transpose();
  return eta;
}

Eigen::MatrixXd init_beta(Index p, int k, std::uint64_t seed) {
  if (p < 1 || k < 1) throw InvalidArgument("init_beta needs p >= 1 and k >= 1");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd beta(p, k);
  for (Index j = 0; j < p; ++j)
    for (int r = 0; r < k; ++r) beta(j, r) = normal(rng);
  return beta;
}

CoverageRequirement coverage_for(int k, Variant variant) {
  const Index need = k + (has_gamma(variant) ? 2 : 1);
  return {need, need};
}

int max_supported_k(const ObservationSet& s, Variant variant) {
  const auto rows = s.row_coverage();
  const auto cols = s.col_coverage();
  const Index min_cover = std::min(*std::min_element(rows.begin(), rows.end()),
                                   *std::min_element(cols.begin(), cols.end()));
  const Index k = std::min(min_cover - (has_gamma(variant) ? 2 : 1), std::min(s.n_rows(), s.n_cols()));
  return static_cast<int>(std::max<Index>(k, 0));
}

Eigen::MatrixXd row_step(const ObservationSet& s, const Eigen::MatrixXd& beta, const Eigen::VectorXd& gamma,
                         const FamilySpec& family, const Eigen::VectorXd& column_weights,
                         const Eigen::MatrixXd* warm_start, const GlmOptions& glm) {
  if (beta.rows() != s.n_cols() || gamma.size() != s.n_cols()) throw InvalidArgument("beta/gamma size mismatch");
  if (!beta.allFinite() || !gamma.allFinite()) throw InvalidArgument("beta and gamma must be finite");
  const CellIndex idx(s);
  return row_step_impl(idx, beta, gamma, family, column_weights, warm_start, glm);
}

ColumnStepResult col_step(const ObservationSet& s, const Eigen::MatrixXd& alpha, Variant variant,
                          const FamilySpec& family, const Eigen::MatrixXd* warm_beta,
                          const Eigen::VectorXd* warm_gamma, const GlmOptions& glm) {
  if (alpha.rows() != s.n_rows()) throw InvalidArgument("alpha size mismatch");
  if (!alpha.allFinite()) throw InvalidArgument("alpha must be finite");
  const CellIndex idx(s);
  return col_step_impl(idx, alpha, variant, family, warm_beta, warm_gamma, glm);
}

FpcaFit fit_fpca(const ObservationSet& s, Variant variant, const FamilySpec& family, const FpcaConfig& config) {
  validate(s, variant, family, config);
  const CellIndex idx(s);
  const Eigen::VectorXd fit_phi = variant == Variant::Correlation ? column_ml_variances(idx) : Eigen::VectorXd();

  const auto n_starts = static_cast<std::size_t>(config.n_starts);
  std::vector<Chain> chains(n_starts);
  const auto errors = parallel_for_collect(n_starts, [&](std::size_t t) {
    chains[t] = run_chain(idx, variant, family, config, fit_phi, config.seed + t);
  });

  int best = -1;
  std::string failures;
  for (std::size_t t = 0; t < n_starts; ++t) {
    if (errors[t]) {
      try {
        std::rethrow_exception(errors[t]);
      } catch (const std::exception& e) {
        failures += "\n  start " + std::to_string(t) + ": " + e.what();
      }
      continue;
    }
    if (best < 0 || chains[t].objective > chains[static_cast<std::size_t>(best)].objective + kStartTieTolerance) {
      best = static_cast<int>(t);
    }
  }
  if (best < 0) throw ModelError("all " + std::to_string(config.n_starts) + " starts failed:" + failures);

  auto& win = chains[static_cast<std::size_t>(best)];
  FpcaFit fit;
  fit.alpha = std::move(win.alpha);
  fit.beta = std::move(win.beta);
  fit.gamma = std::move(win.gamma);
  if (has_gamma(variant)) {
    // Shifting alpha by a constant row is absorbed by gamma; pick the
    // representative whose alpha columns have zero mean.
    const Eigen::RowVectorXd center = fit.alpha.colwise().mean();
    fit.gamma += fit.beta * center.transpose();
    fit.alpha.rowwise() -= center;
  }
  fit.objective = win.objective;
  fit.loglik_trace = std::move(win.trace);
  fit.halfstep_trace = std::move(win.halfsteps);
  fit.iterations = win.iterations;
  fit.converged = win.converged;
  fit.start_index = best;
  fit.variant = variant;
  fit.family = family;
  fit.k = config.k;
  for (std::size_t t = 0; t < n_starts; ++t) {
    fit.start_objectives.push_back(errors[t] ? std::numeric_limits<double>::quiet_NaN() : chains[t].objective);
  }
  if (!fit.alpha.allFinite() || !fit.beta.allFinite() || !fit.gamma.allFinite()) {
    throw ModelError("fit produced non-finite parameters");
  }
  fit.phi = estimate_dispersion(s, fit, variant, family);
  fit.loglik = fpca_loglik(s, fit, fit.phi);
  fit.deviance = fpca_deviance(s, fit);
  return fit;
}

Dispersion estimate_dispersion(const ObservationSet& s, const FpcaFit& fit, Variant variant,
                               const FamilySpec& family) {
  const auto structure = resolve_dispersion(variant, family);
  if (structure == DispersionStructure::None) return Dispersion::unit();
  if (fit.alpha.rows() != s.n_rows() || fit.beta.rows() != s.n_cols()) throw InvalidArgument("fit/data size mismatch");
  if (!fit.alpha.allFinite() || !fit.beta.allFinite()) throw InvalidArgument("fit must be finite");

  const auto total = static_cast<double>(s.size());
  const auto df = static_cast<double>(degrees_of_freedom(fit.k, s.n_rows(), s.n_cols(), variant));
  if (structure == DispersionStructure::PerColumn) {
    Eigen::VectorXd ss = Eigen::VectorXd::Zero(s.n_cols());
    Eigen::VectorXd count = Eigen::VectorXd::Zero(s.n_cols());
    for (const auto& c : s.cells()) {
      const double r = c.value - fit.eta(c.row, c.col);
      ss[c.col] += r * r;
      count[c.col] += 1.0;
    }
    Eigen::VectorXd phi(s.n_cols());
    for (Index j = 0; j < s.n_cols(); ++j) {
      const double denom = count[j] - df * count[j] / total;
      if (!(denom > 0.0)) throw ModelError("model saturated: no residual degrees of freedom");
      phi[j] = ss[j] / denom;
    }
    return {structure, phi};
  }

  const double denom = total - df;
  if (!(denom > 0.0)) throw ModelError("model saturated: no residual degrees of freedom");
  double acc = 0.0;
  for (const auto& c : s.cells()) {
    const double eta = fit.eta(c.row, c.col);
    if (family.family == Family::Gaussian) {
      const double r = c.value - eta;
      acc += r * r;
    } else {
      const double mu = std::max(detail::inv_link(family.family, eta), kBoundaryEps);
      const double v = family.family == Family::Bernoulli ? std::max(mu * (1.0 - mu), kBoundaryEps) : mu;
      acc += (c.value - mu) * (c.value - mu) / v;
    }
  }
  return {structure, Eigen::VectorXd::Constant(1, acc / denom)};
}

double fpca_loglik(const ObservationSet& s, const FpcaFit& fit, const Dispersion& phi) {
  const double floor = dispersion_floor(s);
  const bool dispersed = fit.family.has_dispersion() || phi.structure == DispersionStructure::PerColumn;
  double ll = 0.0;
  for (const auto& c : s.cells()) {
    const double ph = dispersed ? std::max(phi.at(c.col), floor) : 1.0;
    ll += loglik_term(fit.family, c.value, fit.eta(c.row, c.col), ph);
  }
  return ll;
}

double fpca_deviance(const ObservationSet& s, const FpcaFit& fit) {
  double dev = 0.0;
  for (const auto& c : s.cells()) {
    dev += deviance_term(fit.family, c.value, detail::inv_link(fit.family.family, fit.eta(c.row, c.col)));
  }
  return dev;
}

}  // namespace fpca
