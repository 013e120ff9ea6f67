#pragma once

#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "fpca/aglm.hpp"
#include "fpca/dataset.hpp"
#include "fpca/expfam.hpp"

namespace fpca {

/// Identifiable form of a fit: alpha beta^T = u diag(d) v^T with orthonormal
/// u, v and non-increasing positive d. The largest-magnitude entry of each
/// column of u is positive.
struct Decomposition {
  Eigen::MatrixXd u;      // n x k
  Eigen::MatrixXd v;      // p x k
  Eigen::VectorXd d;      // k
  Eigen::VectorXd gamma;  // p
  Variant variant = Variant::Simple;
  Eigen::VectorXd explained;  // per-component explained G^2, empty until computed

  int k() const noexcept { return static_cast<int>(d.size()); }
  /// u diag(d), the principal component scores.
  Eigen::MatrixXd scores() const { return u * d.asDiagonal(); }
  /// gamma_j + sum over the first m components.
  double eta(Index row, Index col, int m) const;
};

/// Throws ModelError("null decomposition") when alpha beta^T is zero.
Decomposition orthogonalize(const FpcaFit& fit);

struct ExplainedG2 {
  double null_deviance = 0.0;
  std::vector<double> deviance;    // m = 0..k; entry 0 is the null deviance
  std::vector<double> cumulative;  // 1 - D_m / D_0, entry 0 is 0
  std::vector<double> increments;  // cumulative[m] - cumulative[m - 1], m = 1..k
  bool monotone = true;
  std::vector<std::string> diagnostics;
};

/// Deviance explained by the leading m components relative to the null model
/// (grand mean for Simple, column means otherwise). Throws ModelError
/// ("degenerate null") when the null deviance is zero.
ExplainedG2 explained_g2(const ObservationSet& s, const Decomposition& decomp, const FamilySpec& family);

/// orthogonalize followed by explained_g2, with the increments stored in `explained`.
Decomposition decompose(const ObservationSet& s, const FpcaFit& fit, ExplainedG2* report = nullptr);

struct Prediction {
  Index row = 0;
  Index col = 0;
  double eta_hat = 0.0;
  double mu_hat = 0.0;
};

struct PredictionSet {
  std::vector<Prediction> cells;
};

using CellList = std::vector<std::pair<Index, Index>>;

/// Fitted linear predictor and mean for arbitrary grid cells, observed or not.
PredictionSet predict_cells(const FpcaFit& fit, const CellList& cells, const FamilySpec& family);

CellList all_cells(Index n_rows, Index n_cols);
CellList observed_cells(const ObservationSet& s);

/// Deviance of a single cell written through eta; finite for every finite eta.
double unit_deviance_at_eta(const FamilySpec& family, double x, double eta);

}  // namespace fpca
