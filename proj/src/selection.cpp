#include "fpca/selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "fpca/error.hpp"
#include "fpca/parallel.hpp"

namespace fpca {

namespace {

constexpr double kMonotoneSlack = 1e-6;

void normalize_candidates(std::vector<int>& candidates, const ObservationSet& s, Variant variant) {
  if (candidates.empty()) throw InvalidArgument("no candidate k values");
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  const int bound = max_supported_k(s, variant);
  for (int k : candidates) {
    if (k < 1) throw InvalidArgument("candidate k must be positive, got " + std::to_string(k));
    if (k > bound) {
      throw ValidationError("candidate k=" + std::to_string(k) + " exceeds the coverage bound " +
                            std::to_string(bound));
    }
  }
}

FpcaConfig with_k(FpcaConfig c, int k) {
  c.k = k;
  return c;
}

int argmin_first(const std::vector<double>& v) {
  int best = 0;
  for (std::size_t t = 1; t < v.size(); ++t)
    if (v[t] < v[static_cast<std::size_t>(best)]) best = static_cast<int>(t);
  return best;
}

// Rethrows the first failure with the candidate named.
void rethrow_named(const std::vector<std::exception_ptr>& errors, const std::vector<int>& ks) {
  for (std::size_t t = 0; t < errors.size(); ++t) {
    if (!errors[t]) continue;
    try {
      std::rethrow_exception(errors[t]);
    } catch (const Error& e) {
      throw ModelError("fit at k=" + std::to_string(ks[t % ks.size()]) + " failed: " + e.what());
    }
  }
}

}  // namespace

Index degrees_of_freedom(int k, Index n, Index p, Variant variant) {
  if (k < 0 || k > std::min(n, p)) throw InvalidArgument("k must lie in [0, min(n, p)]");
  return static_cast<Index>(k) * (n + p - k) + (has_gamma(variant) ? p : 0);
}

double gic(double loglik, double kappa, Index df) { return -2.0 * loglik + kappa * static_cast<double>(df); }

double Criterion::kappa(std::size_t n_observed) const {
  switch (kind) {
    case Kind::AIC:
      return 2.0;
    case Kind::BIC:
      return std::log(static_cast<double>(n_observed));
    case Kind::Custom:
      if (!(custom_kappa > 0.0)) throw InvalidArgument("kappa must be positive");
      return custom_kappa;
  }
  return 0.0;
}

std::string Criterion::name() const {
  switch (kind) {
    case Kind::AIC:
      return "aic";
    case Kind::BIC:
      return "bic";
    case Kind::Custom: {
      std::ostringstream os;
      os << "gic:" << custom_kappa;
      return os.str();
    }
  }
  return "unknown";
}

const FpcaFit& GicResult::chosen_fit() const {
  for (std::size_t t = 0; t < table.size(); ++t)
    if (table[t].k == chosen_k && t < fits.size()) return fits[t];
  throw InvalidArgument("chosen fit not retained");
}

std::vector<int> default_candidates(const ObservationSet& s, Variant variant) {
  const int bound = std::min(10, max_supported_k(s, variant));
  if (bound < 1) throw ValidationError("coverage too small for any k");
  std::vector<int> out;
  for (int k = 1; k <= bound; ++k) out.push_back(k);
  return out;
}

GicResult rescore(const GicResult& result, const Criterion& criterion, std::size_t n_observed) {
  GicResult out = result;
  out.criterion = criterion;
  out.kappa = criterion.kappa(n_observed);
  std::vector<double> values;
  for (auto& row : out.table) {
    row.gic = gic(row.loglik, out.kappa, row.df);
    values.push_back(row.gic);
  }
  out.chosen_k = out.table[static_cast<std::size_t>(argmin_first(values))].k;
  return out;
}

GicResult select_k_gic(const ObservationSet& s, Variant variant, const FamilySpec& family,
                       std::vector<int> candidates, const Criterion& criterion, std::optional<int> k_ref,
                       const FpcaConfig& config) {
  normalize_candidates(candidates, s, variant);
  const double kappa = criterion.kappa(s.size());
  const bool dispersed = resolve_dispersion(variant, family) != DispersionStructure::None;

  GicResult result;
  result.criterion = criterion;
  result.kappa = kappa;
  result.phi_reference = Dispersion::unit();

  std::optional<FpcaFit> reference;
  if (dispersed) {
    const int bound = max_supported_k(s, variant);
    int kr = k_ref ? *k_ref : std::min(candidates.back() + 2, bound);
    // The default backs off until the reference fit leaves residual degrees
    // of freedom for the dispersion estimate.
    while (!k_ref && kr > candidates.back() &&
           degrees_of_freedom(kr, s.n_rows(), s.n_cols(), variant) >= static_cast<Index>(s.size())) {
      --kr;
    }
    if (kr < candidates.back()) {
      throw InvalidArgument("k_ref=" + std::to_string(kr) + " is below the largest candidate " +
                            std::to_string(candidates.back()));
    }
    if (kr > bound) throw ValidationError("k_ref=" + std::to_string(kr) + " exceeds the coverage bound");
    result.k_ref = kr;
    if (std::find(candidates.begin(), candidates.end(), kr) == candidates.end()) {
      try {
        reference = fit_fpca(s, variant, family, with_k(config, kr));
      } catch (const Error& e) {
        throw ModelError("reference fit at k=" + std::to_string(kr) + " failed: " + e.what());
      }
    }
  }

  std::vector<FpcaFit> fits(candidates.size());
  rethrow_named(parallel_for_collect(candidates.size(),
                                     [&](std::size_t t) {
                                       fits[t] = fit_fpca(s, variant, family, with_k(config, candidates[t]));
                                     }),
                candidates);

  if (dispersed) {
    const FpcaFit& ref = reference ? *reference : fits[static_cast<std::size_t>(
                                                      std::find(candidates.begin(), candidates.end(), result.k_ref) -
                                                      candidates.begin())];
    result.phi_reference = ref.phi;
  }
  auto loglik_of = [&](const FpcaFit& f) { return dispersed ? fpca_loglik(s, f, result.phi_reference) : f.loglik; };

  std::vector<double> ll(candidates.size());
  for (std::size_t t = 0; t < candidates.size(); ++t) ll[t] = loglik_of(fits[t]);

  // A larger rank nests the smaller one, so a likelihood drop means the
  // larger fit is stuck at a poor local maximum.
  for (std::size_t t = 1; t < candidates.size(); ++t) {
    if (ll[t] >= ll[t - 1] - kMonotoneSlack) continue;
    std::ostringstream os;
    os << "log-likelihood at k=" << candidates[t] << " (" << ll[t] << ") below k=" << candidates[t - 1] << " ("
       << ll[t - 1] << "); refitting with " << 2 * config.n_starts << " starts";
    result.warnings.push_back(os.str());
    FpcaConfig retry = with_k(config, candidates[t]);
    retry.n_starts *= 2;
    FpcaFit refit = fit_fpca(s, variant, family, retry);
    const double refit_ll = loglik_of(refit);
    if (refit_ll > ll[t]) {
      fits[t] = std::move(refit);
      ll[t] = refit_ll;
    }
    if (ll[t] < ll[t - 1] - kMonotoneSlack) {
      result.warnings.push_back("log-likelihood still decreasing at k=" + std::to_string(candidates[t]));
    }
  }

  std::vector<double> values;
  for (std::size_t t = 0; t < candidates.size(); ++t) {
    const Index df = degrees_of_freedom(candidates[t], s.n_rows(), s.n_cols(), variant);
    const double g = gic(ll[t], kappa, df);
    result.table.push_back({candidates[t], ll[t], df, g});
    values.push_back(g);
  }
  result.chosen_k = candidates[static_cast<std::size_t>(argmin_first(values))];
  result.fits = std::move(fits);
  return result;
}

CvResult select_k_cv(const ObservationSet& s, Variant variant, const FamilySpec& family, std::vector<int> candidates,
                     double q, int n_repetitions, const FpcaConfig& config) {
  if (n_repetitions < 1) throw InvalidArgument("n_repetitions must be at least 1");
  if (!(q > 0.0 && q < 1.0)) throw InvalidArgument("q must lie in (0, 1)");
  normalize_candidates(candidates, s, variant);
  const auto reps = static_cast<std::size_t>(n_repetitions);
  const auto n_k = candidates.size();

  CvResult result;
  result.q = q;
  result.n_repetitions = n_repetitions;
  std::vector<SplitSet> splits;
  splits.reserve(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    const std::uint64_t seed = config.seed + r;
    result.split_seeds.push_back(seed);
    splits.push_back(random_split(s, q, seed, coverage_for(candidates.back(), variant)));
  }

  std::vector<double> g2(reps * n_k, 0.0);
  rethrow_named(parallel_for_collect(reps * n_k,
                                     [&](std::size_t task) {
                                       const auto r = task / n_k;
                                       const auto t = task % n_k;
                                       const auto fit = fit_fpca(splits[r].train, variant, family,
                                                                 with_k(config, candidates[t]));
                                       double acc = 0.0;
                                       for (const auto& c : splits[r].test.cells()) {
                                         const double mu = detail::inv_link(family.family, fit.eta(c.row, c.col));
                                         acc += deviance_term(family, c.value, mu);
                                       }
                                       g2[task] = acc;
                                     }),
                candidates);

  std::vector<double> means;
  for (std::size_t t = 0; t < n_k; ++t) {
    CvRow row;
    row.k = candidates[t];
    double sum = 0.0;
    for (std::size_t r = 0; r < reps; ++r) {
      row.per_repetition.push_back(g2[r * n_k + t]);
      row.test_sizes.push_back(splits[r].test.size());
      sum += g2[r * n_k + t];
    }
    row.mean_g2 = sum / static_cast<double>(reps);
    means.push_back(row.mean_g2);
    result.table.push_back(std::move(row));
  }
  result.chosen_k = candidates[static_cast<std::size_t>(argmin_first(means))];
  return result;
}

}  // namespace fpca
