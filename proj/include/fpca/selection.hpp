#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fpca/aglm.hpp"
#include "fpca/dataset.hpp"

namespace fpca {

/// k(n + p - k) parameters for the low-rank term, plus p for the column offsets
/// of the Covariance and Correlation variants.
Index degrees_of_freedom(int k, Index n, Index p, Variant variant);

/// -2 loglik + kappa * df.
double gic(double loglik, double kappa, Index df);

/// Penalty weight: AIC (2), BIC (log |S|) or a fixed kappa.
struct Criterion {
  enum class Kind { AIC, BIC, Custom };
  Kind kind = Kind::BIC;
  double custom_kappa = 0.0;

  static Criterion aic() { return {Kind::AIC, 0.0}; }
  static Criterion bic() { return {Kind::BIC, 0.0}; }
  static Criterion custom(double kappa) { return {Kind::Custom, kappa}; }

  double kappa(std::size_t n_observed) const;
  std::string name() const;
};

struct GicRow {
  int k = 0;
  double loglik = 0.0;  // at the shared dispersion
  Index df = 0;
  double gic = 0.0;
};

struct GicResult {
  std::vector<GicRow> table;  // ascending k
  int chosen_k = 0;
  double kappa = 0.0;
  Criterion criterion;
  Dispersion phi_reference;
  int k_ref = 0;  // 0 when the family has no dispersion
  std::vector<FpcaFit> fits;  // parallel to table
  std::vector<std::string> warnings;

  const FpcaFit& chosen_fit() const;
};

/// Penalized-likelihood rank selection. For families with dispersion the
/// dispersion is estimated once from a fit at k_ref (default max(candidates)+2,
/// capped by coverage) and shared by every candidate.
GicResult select_k_gic(const ObservationSet& s, Variant variant, const FamilySpec& family,
                       std::vector<int> candidates, const Criterion& criterion, std::optional<int> k_ref,
                       const FpcaConfig& config);

/// Same table scored under another criterion.
GicResult rescore(const GicResult& result, const Criterion& criterion, std::size_t n_observed);

struct CvRow {
  int k = 0;
  double mean_g2 = 0.0;
  std::vector<double> per_repetition;
  std::vector<std::size_t> test_sizes;
};

struct CvResult {
  std::vector<CvRow> table;  // ascending k
  int chosen_k = 0;
  double q = 0.0;
  int n_repetitions = 0;
  std::vector<std::uint64_t> split_seeds;
};

/// Train/test cross-validation: repetition r splits with seed config.seed + r,
/// fits every candidate on the training part and scores the test deviance.
CvResult select_k_cv(const ObservationSet& s, Variant variant, const FamilySpec& family, std::vector<int> candidates,
                     double q, int n_repetitions, const FpcaConfig& config);

/// 1..min(10, coverage bound).
std::vector<int> default_candidates(const ObservationSet& s, Variant variant);

}  // namespace fpca
