#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "fpca/aglm.hpp"
#include "fpca/dataset.hpp"

namespace fpca {

/// Covariance-model simulation design:
///   x_ij = mu_j + sum_r alpha_ir beta_jr + eps_ij,
///   mu_j ~ N(mu_mean, mu_sd^2), alpha, beta ~ N(0, 1), eps ~ N(0, noise_sd^2),
/// with each cell hidden independently with probability tau.
struct SimDesign {
  Index n = 30;
  Index p = 30;
  int k_true = 2;
  double tau = 0.1;
  double noise_sd = 0.1;
  double mu_mean = 0.5;
  double mu_sd = 2.0;
  int n_replications = 100;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SimTruth {
  Eigen::VectorXd mu;     // p
  Eigen::MatrixXd alpha;  // n x k_true
  Eigen::MatrixXd beta;   // p x k_true
};

struct SimDataset {
  ObservationSet full;
  ObservationSet masked;
  std::vector<Cell> hidden;  // full minus masked
  SimTruth truth;
  std::uint64_t seed = 0;
};

/// Replication r draws from derive_seed(design.seed, r). The mask is redrawn
/// (up to 100 times) until `masked` meets `coverage`.
SimDataset generate_dataset(const SimDesign& design, int replication, const CoverageRequirement& coverage = {});

enum class SimRule { BIC, AIC, CV };
SimRule parse_sim_rule(std::string_view name);
std::string to_string(SimRule rule);

struct SimOptions {
  std::vector<int> candidates;  // empty: 1..k_true+4, capped so CV training fits keep residual df
  std::optional<int> k_ref;     // default: chosen by select_k_gic
  double cv_q = 0.2;
  int cv_reps = 10;
  int n_starts = 5;
  double tol = 1e-7;
  int max_outer_iter = 500;
};

struct RuleOutcome {
  SimRule rule = SimRule::BIC;
  int chosen_k = 0;
  double rmsep = 0.0;          // on the hidden cells, fit at chosen_k on the masked set
  double cv_test_rmsep = 0.0;  // CV rule only: sqrt(mean test G^2 per cell) at chosen_k
};

struct ReplicationRecord {
  int replication = 0;
  std::uint64_t seed = 0;
  std::size_t n_hidden = 0;
  bool failed = false;
  std::string error;
  std::vector<RuleOutcome> outcomes;  // parallel to SimReport::rules
};

struct RuleSummary {
  SimRule rule = SimRule::BIC;
  double percent_correct = 0.0;  // over all replications; failures count as incorrect
  double mean_rmsep = 0.0;       // over successful replications with hidden cells
  double mean_cv_test_rmsep = 0.0;
  std::vector<int> k_histogram;  // index k - min candidate
};

struct SimReport {
  SimDesign design;
  SimOptions options;
  std::vector<SimRule> rules;
  std::vector<ReplicationRecord> records;
  std::vector<RuleSummary> summaries;
  int n_failed = 0;
};

/// Runs every replication of the design, applying each rule on the masked data.
SimReport run_simulation(const SimDesign& design, const std::vector<SimRule>& rules, const SimOptions& options = {});

/// Percent of replications whose chosen k equals k_true, per rule.
SimReport run_k_recovery(const SimDesign& design, const std::vector<SimRule>& rules,
                         const std::vector<int>& candidates, const SimOptions& options = {});

/// Hidden-cell RMSEP at the k chosen by `rule`.
SimReport run_rmsep(const SimDesign& design, SimRule rule, const SimOptions& options = {});

}  // namespace fpca
