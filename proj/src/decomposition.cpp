#include "fpca/decomposition.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "fpca/error.hpp"

namespace fpca {

namespace {

constexpr double kRankCutoff = 1e-12;
constexpr double kMonotoneSlack = 1e-9;

Eigen::MatrixXd thin_q(const Eigen::HouseholderQR<Eigen::MatrixXd>& qr, Index cols) {
  return qr.householderQ() * Eigen::MatrixXd::Identity(qr.rows(), cols);
}

Eigen::MatrixXd upper_r(const Eigen::HouseholderQR<Eigen::MatrixXd>& qr, Index cols) {
  return qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
}

}  // namespace

double Decomposition::eta(Index row, Index col, int m) const {
  double e = gamma[col];
  for (int r = 0; r < m; ++r) e += d[r] * u(row, r) * v(col, r);
  return e;
}

double unit_deviance_at_eta(const FamilySpec& family, double x, double eta) {
  check_support(family, x);
  if (!std::isfinite(eta)) throw DomainError("non-finite linear predictor");
  const double dev = 2.0 * (detail::saturated_kernel(family.family, x) - detail::loglik_kernel(family.family, x, eta));
  return dev < 0.0 ? 0.0 : dev;
}

Decomposition orthogonalize(const FpcaFit& fit) {
  const Index k = fit.alpha.cols();
  if (k < 1 || fit.beta.cols() != k) throw InvalidArgument("fit must have k >= 1");
  if (!fit.alpha.allFinite() || !fit.beta.allFinite() || !fit.gamma.allFinite()) {
    throw InvalidArgument("fit must be finite");
  }
  if (fit.alpha.rows() < k || fit.beta.rows() < k) throw InvalidArgument("k exceeds the grid size");

  const Eigen::HouseholderQR<Eigen::MatrixXd> qa(fit.alpha);
  const Eigen::HouseholderQR<Eigen::MatrixXd> qb(fit.beta);
  const Eigen::MatrixXd core = upper_r(qa, k) * upper_r(qb, k).transpose();
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(core, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::VectorXd& sv = svd.singularValues();
  if (!(sv[0] > 0.0)) throw ModelError("null decomposition");

  Index kept = 0;
  while (kept < k && sv[kept] >= kRankCutoff * sv[0]) ++kept;

  Decomposition out;
  out.u = thin_q(qa, k) * svd.matrixU().leftCols(kept);
  out.v = thin_q(qb, k) * svd.matrixV().leftCols(kept);
  out.d = sv.head(kept);
  out.gamma = fit.gamma;
  out.variant = fit.variant;

  for (Index r = 0; r < kept; ++r) {
    Index arg = 0;
    for (Index i = 1; i < out.u.rows(); ++i)
      if (std::abs(out.u(i, r)) > std::abs(out.u(arg, r))) arg = i;
    if (out.u(arg, r) < 0.0) {
      out.u.col(r) *= -1.0;
      out.v.col(r) *= -1.0;
    }
  }
  return out;
}

ExplainedG2 explained_g2(const ObservationSet& s, const Decomposition& decomp, const FamilySpec& family) {
  if (decomp.u.rows() != s.n_rows() || decomp.v.rows() != s.n_cols() || decomp.gamma.size() != s.n_cols()) {
    throw InvalidArgument("decomposition does not match the dataset dimensions");
  }
  const int k = decomp.k();

  // Null model: the intercept-only canonical GLM is solved by the mean.
  Eigen::VectorXd null_mu = Eigen::VectorXd::Zero(s.n_cols());
  if (has_gamma(decomp.variant)) {
    Eigen::VectorXd count = Eigen::VectorXd::Zero(s.n_cols());
    for (const auto& c : s.cells()) {
      null_mu[c.col] += c.value;
      count[c.col] += 1.0;
    }
    for (Index j = 0; j < s.n_cols(); ++j) null_mu[j] = count[j] > 0.0 ? null_mu[j] / count[j] : 0.0;
  } else {
    double total = 0.0;
    for (const auto& c : s.cells()) total += c.value;
    null_mu.setConstant(total / static_cast<double>(s.size()));
  }

  ExplainedG2 report;
  for (const auto& c : s.cells()) report.null_deviance += deviance_term(family, c.value, null_mu[c.col]);
  if (!(report.null_deviance > 0.0)) throw ModelError("degenerate null");

  report.deviance.assign(static_cast<std::size_t>(k) + 1, 0.0);
  report.deviance[0] = report.null_deviance;
  for (const auto& c : s.cells()) {
    double e = decomp.gamma[c.col];
    for (int r = 0; r < k; ++r) {
      e += decomp.d[r] * decomp.u(c.row, r) * decomp.v(c.col, r);
      report.deviance[static_cast<std::size_t>(r) + 1] += unit_deviance_at_eta(family, c.value, e);
    }
  }

  report.cumulative.push_back(0.0);
  for (int m = 1; m <= k; ++m) {
    const double frac = 1.0 - report.deviance[static_cast<std::size_t>(m)] / report.null_deviance;
    report.increments.push_back(frac - report.cumulative.back());
    report.cumulative.push_back(frac);
    if (report.increments.back() < -kMonotoneSlack) {
      report.monotone = false;
      std::ostringstream os;
      os << "explained G^2 decreases from " << report.cumulative[static_cast<std::size_t>(m) - 1] << " to " << frac
         << " at component " << m;
      report.diagnostics.push_back(os.str());
    }
  }
  if (report.cumulative[1] < -kMonotoneSlack) {
    report.diagnostics.push_back("first component fits worse than the null model");
  }
  return report;
}

Decomposition decompose(const ObservationSet& s, const FpcaFit& fit, ExplainedG2* report) {
  Decomposition d = orthogonalize(fit);
  ExplainedG2 r = explained_g2(s, d, fit.family);
  d.explained = Eigen::Map<const Eigen::VectorXd>(r.increments.data(), static_cast<Index>(r.increments.size()));
  if (report) *report = std::move(r);
  return d;
}

PredictionSet predict_cells(const FpcaFit& fit, const CellList& cells, const FamilySpec& family) {
  PredictionSet out;
  out.cells.reserve(cells.size());
  for (const auto& [row, col] : cells) {
    if (row < 0 || row >= fit.n_rows() || col < 0 || col >= fit.n_cols()) {
      throw InvalidArgument("cell (" + std::to_string(row) + ", " + std::to_string(col) + ") outside the " +
                            std::to_string(fit.n_rows()) + "x" + std::to_string(fit.n_cols()) + " grid");
    }
    const double eta = fit.eta(row, col);
    out.cells.push_back({row, col, eta, inv_link(family, eta)});
  }
  return out;
}

CellList all_cells(Index n_rows, Index n_cols) {
  CellList out;
  out.reserve(static_cast<std::size_t>(n_rows * n_cols));
  for (Index i = 0; i < n_rows; ++i)
    for (Index j = 0; j < n_cols; ++j) out.emplace_back(i, j);
  return out;
}

CellList observed_cells(const ObservationSet& s) {
  CellList out;
  out.reserve(s.size());
  for (const auto& c : s.cells()) out.emplace_back(c.row, c.col);
  return out;
}

}  // namespace fpca
