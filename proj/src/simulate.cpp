#include "fpca/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "fpca/error.hpp"
#include "fpca/parallel.hpp"
#include "fpca/random.hpp"
#include "fpca/selection.hpp"

namespace fpca {

namespace {

constexpr int kMaskAttempts = 100;

std::vector<int> resolve_candidates(const SimDesign& design, const SimOptions& options) {
  if (!options.candidates.empty()) {
    auto c = options.candidates;
    std::sort(c.begin(), c.end());
    c.erase(std::unique(c.begin(), c.end()), c.end());
    return c;
  }
  int top = static_cast<int>(std::min<Index>(design.k_true + 4, std::min(design.n, design.p) - 3));
  // Every candidate must leave residual degrees of freedom in a CV training set.
  const double training_cells =
      (1.0 - design.tau) * (1.0 - options.cv_q) * static_cast<double>(design.n * design.p);
  while (top > design.k_true &&
         static_cast<double>(degrees_of_freedom(top, design.n, design.p, Variant::Covariance)) >= training_cells) {
    --top;
  }
  std::vector<int> c;
  for (int k = 1; k <= top; ++k) c.push_back(k);
  return c;
}

double hidden_rmsep(const FpcaFit& fit, const std::vector<Cell>& hidden) {
  if (hidden.empty()) return 0.0;
  double ss = 0.0;
  for (const auto& c : hidden) {
    const double r = c.value - fit.eta(c.row, c.col);
    ss += r * r;
  }
  return std::sqrt(ss / static_cast<double>(hidden.size()));
}

ReplicationRecord run_replication(const SimDesign& design, int replication, const std::vector<SimRule>& rules,
                                  const std::vector<int>& candidates, const SimOptions& options) {
  constexpr Variant variant = Variant::Covariance;
  const auto family = FamilySpec::gaussian();
  const int k_max = candidates.back();
  const int k_cover = options.k_ref ? std::max(k_max, *options.k_ref) : k_max;

  ReplicationRecord rec;
  rec.replication = replication;
  const auto data = generate_dataset(design, replication, coverage_for(k_cover, variant));
  rec.seed = data.seed;
  rec.n_hidden = data.hidden.size();

  FpcaConfig config;
  config.n_starts = options.n_starts;
  config.tol = options.tol;
  config.max_outer_iter = options.max_outer_iter;
  config.seed = data.seed;

  const bool need_gic = std::any_of(rules.begin(), rules.end(), [](SimRule r) { return r != SimRule::CV; });
  std::optional<GicResult> bic;
  if (need_gic) bic = select_k_gic(data.masked, variant, family, candidates, Criterion::bic(), options.k_ref, config);

  auto fit_at = [&](int k) -> FpcaFit {
    if (bic) {
      for (std::size_t t = 0; t < bic->table.size(); ++t)
        if (bic->table[t].k == k) return bic->fits[t];
    }
    FpcaConfig c = config;
    c.k = k;
    return fit_fpca(data.masked, variant, family, c);
  };

  for (SimRule rule : rules) {
    RuleOutcome out;
    out.rule = rule;
    switch (rule) {
      case SimRule::BIC:
        out.chosen_k = bic->chosen_k;
        break;
      case SimRule::AIC:
        out.chosen_k = rescore(*bic, Criterion::aic(), data.masked.size()).chosen_k;
        break;
      case SimRule::CV: {
        const auto cv = select_k_cv(data.masked, variant, family, candidates, options.cv_q, options.cv_reps, config);
        out.chosen_k = cv.chosen_k;
        for (const auto& row : cv.table) {
          if (row.k != cv.chosen_k) continue;
          double g2 = 0.0;
          std::size_t cells = 0;
          for (std::size_t r = 0; r < row.per_repetition.size(); ++r) {
            g2 += row.per_repetition[r];
            cells += row.test_sizes[r];
          }
          out.cv_test_rmsep = cells > 0 ? std::sqrt(g2 / static_cast<double>(cells)) : 0.0;
        }
        break;
      }
    }
    out.rmsep = hidden_rmsep(fit_at(out.chosen_k), data.hidden);
    rec.outcomes.push_back(out);
  }
  return rec;
}

}  // namespace

void SimDesign::validate() const {
  if (n < 2 || p < 2) throw InvalidArgument("n and p must be at least 2");
  if (k_true < 1 || k_true > std::min(n, p)) throw InvalidArgument("k_true must lie in [1, min(n, p)]");
  if (!(tau >= 0.0 && tau < 1.0)) throw InvalidArgument("tau must lie in [0, 1)");
  if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd)) throw InvalidArgument("noise_sd must be nonnegative");
  if (!(mu_sd >= 0.0) || !std::isfinite(mu_sd) || !std::isfinite(mu_mean)) {
    throw InvalidArgument("mu_mean must be finite and mu_sd nonnegative");
  }
  if (n_replications < 1) throw InvalidArgument("n_replications must be at least 1");
}

SimDataset generate_dataset(const SimDesign& design, int replication, const CoverageRequirement& coverage) {
  design.validate();
  if (replication < 0) throw InvalidArgument("replication must be nonnegative");
  const std::uint64_t seed = derive_seed(design.seed, static_cast<std::uint64_t>(replication));
  Rng rng(seed);
  std::normal_distribution<double> std_normal(0.0, 1.0);

  SimTruth truth;
  truth.mu.resize(design.p);
  truth.alpha.resize(design.n, design.k_true);
  truth.beta.resize(design.p, design.k_true);
  for (Index j = 0; j < design.p; ++j) truth.mu[j] = design.mu_mean + design.mu_sd * std_normal(rng);
  for (Index i = 0; i < design.n; ++i)
    for (int r = 0; r < design.k_true; ++r) truth.alpha(i, r) = std_normal(rng);
  for (Index j = 0; j < design.p; ++j)
    for (int r = 0; r < design.k_true; ++r) truth.beta(j, r) = std_normal(rng);

  std::vector<Cell> cells;
  cells.reserve(static_cast<std::size_t>(design.n * design.p));
  for (Index i = 0; i < design.n; ++i) {
    for (Index j = 0; j < design.p; ++j) {
      const double mean = truth.mu[j] + truth.alpha.row(i).dot(truth.beta.row(j));
      cells.push_back({i, j, mean + design.noise_sd * std_normal(rng)});
    }
  }
  ObservationSet full(design.n, design.p, std::move(cells));

  for (int attempt = 0; attempt < kMaskAttempts; ++attempt) {
    ObservationSet masked = design.tau > 0.0
                                ? apply_missing_mechanism(full, design.tau, derive_seed(seed, attempt + 1))
                                : full;
    if (!check_coverage(masked, coverage).ok()) continue;
    std::vector<Cell> hidden;
    for (const auto& c : full.cells())
      if (!masked.contains(c.row, c.col)) hidden.push_back(c);
    return {std::move(full), std::move(masked), std::move(hidden), std::move(truth), seed};
  }
  throw ValidationError("no mask met the coverage requirement after " + std::to_string(kMaskAttempts) +
                        " draws (replication " + std::to_string(replication) + ")");
}

SimRule parse_sim_rule(std::string_view name) {
  if (name == "bic") return SimRule::BIC;
  if (name == "aic") return SimRule::AIC;
  if (name == "cv") return SimRule::CV;
  throw InvalidArgument("unknown rule '" + std::string(name) + "' (expected bic, aic or cv)");
}

std::string to_string(SimRule rule) {
  switch (rule) {
    case SimRule::BIC:
      return "bic";
    case SimRule::AIC:
      return "aic";
    case SimRule::CV:
      return "cv";
  }
  return "unknown";
}

SimReport run_simulation(const SimDesign& design, const std::vector<SimRule>& rules, const SimOptions& options) {
  design.validate();
  if (rules.empty()) throw InvalidArgument("no selection rules given");
  const auto candidates = resolve_candidates(design, options);
  if (candidates.empty() || candidates.front() < 1) throw InvalidArgument("candidates must be positive");
  if (std::find(candidates.begin(), candidates.end(), design.k_true) == candidates.end()) {
    throw InvalidArgument("candidates must include k_true=" + std::to_string(design.k_true));
  }

  SimReport report;
  report.design = design;
  report.options = options;
  report.options.candidates = candidates;
  report.rules = rules;
  const auto reps = static_cast<std::size_t>(design.n_replications);
  report.records.resize(reps);

  const auto errors = parallel_for_collect(reps, [&](std::size_t r) {
    report.records[r] = run_replication(design, static_cast<int>(r), rules, candidates, options);
  });
  for (std::size_t r = 0; r < reps; ++r) {
    if (!errors[r]) continue;
    auto& rec = report.records[r];
    rec = ReplicationRecord{};
    rec.replication = static_cast<int>(r);
    rec.seed = derive_seed(design.seed, r);
    rec.failed = true;
    try {
      std::rethrow_exception(errors[r]);
    } catch (const std::exception& e) {
      rec.error = e.what();
    }
    ++report.n_failed;
  }

  for (std::size_t q = 0; q < rules.size(); ++q) {
    RuleSummary sum;
    sum.rule = rules[q];
    sum.k_histogram.assign(static_cast<std::size_t>(candidates.back() - candidates.front() + 1), 0);
    int correct = 0;
    int scored = 0;
    double rmsep = 0.0;
    double cv_rmsep = 0.0;
    for (const auto& rec : report.records) {
      if (rec.failed) continue;
      const auto& o = rec.outcomes[q];
      correct += o.chosen_k == design.k_true;
      ++sum.k_histogram[static_cast<std::size_t>(o.chosen_k - candidates.front())];
      if (rec.n_hidden > 0) {
        rmsep += o.rmsep;
        ++scored;
      }
      cv_rmsep += o.cv_test_rmsep;
    }
    const int ok = design.n_replications - report.n_failed;
    sum.percent_correct = 100.0 * correct / design.n_replications;
    sum.mean_rmsep = scored > 0 ? rmsep / scored : 0.0;
    sum.mean_cv_test_rmsep = ok > 0 ? cv_rmsep / ok : 0.0;
    report.summaries.push_back(std::move(sum));
  }
  return report;
}

SimReport run_k_recovery(const SimDesign& design, const std::vector<SimRule>& rules,
                         const std::vector<int>& candidates, const SimOptions& options) {
  SimOptions o = options;
  o.candidates = candidates;
  return run_simulation(design, rules, o);
}

SimReport run_rmsep(const SimDesign& design, SimRule rule, const SimOptions& options) {
  return run_simulation(design, {rule}, options);
}

}  // namespace fpca
