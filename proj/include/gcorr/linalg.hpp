#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gcorr/error.hpp"

namespace gcorr {

/// Relative pivot tolerance for rank decisions on Gram matrices.
inline constexpr double kRankTolerance = 1e-10;

/// Lower Cholesky factor of a symmetric matrix. A pivot below
/// kRankTolerance * max diagonal marks column j as linearly dependent on the
/// columns before it; the error names that column when labels are given.
inline Eigen::MatrixXd cholesky_lower(const Eigen::MatrixXd& a, const std::vector<std::string>& labels = {}) {
  const Eigen::Index n = a.rows();
  if (a.cols() != n) throw Error(ErrorCode::DimensionMismatch, "cholesky of a non-square matrix");
  const double tol = kRankTolerance * std::max(1e-300, a.diagonal().cwiseAbs().maxCoeff());
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = a(j, j) - l.row(j).head(j).squaredNorm();
    if (!(d > tol)) {
      std::string what = "column " + std::to_string(j);
      if (static_cast<std::size_t>(j) < labels.size()) what += " ('" + labels[static_cast<std::size_t>(j)] + "')";
      throw Error(ErrorCode::RankDeficient, what + " is linearly dependent on earlier columns");
    }
    d = std::sqrt(d);
    l(j, j) = d;
    for (Eigen::Index i = j + 1; i < n; ++i)
      l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / d;
  }
  return l;
}

/// Inverse of a symmetric positive-definite matrix via its Cholesky factor.
inline Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& a, const std::vector<std::string>& labels = {}) {
  const auto l = cholesky_lower(a, labels);
  const auto n = a.rows();
  Eigen::MatrixXd linv = l.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(n, n));
  Eigen::MatrixXd inv = linv.transpose() * linv;
  return 0.5 * (inv + inv.transpose());
}

/// (XᵀX)⁻¹ with column labels in the rank-deficiency message.
inline Eigen::MatrixXd gram_inverse(const Eigen::MatrixXd& x, const std::vector<std::string>& labels = {}) {
  return spd_inverse(x.transpose() * x, labels);
}

inline double log_det_spd(const Eigen::MatrixXd& a) {
  const auto l = cholesky_lower(a);
  return 2.0 * l.diagonal().array().log().sum();
}

/// Numerical rank by full-pivot LU, for test oracles and diagnostics.
inline Eigen::Index numerical_rank(const Eigen::MatrixXd& a) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  lu.setThreshold(1e-10);
  return lu.rank();
}

inline double max_abs(const Eigen::MatrixXd& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

/// max|a − b| / max|b|, the matrix-scale relative difference used by all
/// equality checks.
inline double relative_difference(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) return INFINITY;
  const double scale = max_abs(b);
  const double diff = max_abs(a - b);
  return scale > 0 ? diff / scale : diff;
}

}  // namespace gcorr
