#pragma once

// g-priors for log-linear and logistic models, the unit-information special
// case, Inverse-Gamma mixtures on g, and the flat-intercept variant.

#include <cmath>
#include <numbers>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "gcorr/error.hpp"
#include "gcorr/linalg.hpp"
#include "gcorr/models.hpp"
#include "gcorr/tables.hpp"

namespace gcorr {

struct FixedG {
  double g = 1.0;
};
struct UnitInformation {};
/// Shape–scale Inverse-Gamma: density ∝ g^{−a−1} exp(−b/g), mean b/(a−1).
struct InverseGammaMixture {
  double a = 0.0;
  double b = 0.0;
};

using GLaw = std::variant<FixedG, UnitInformation, InverseGammaMixture>;

/// N(mean, g·sigma) with a law on g. `n_obs` is N, which UnitInformation
/// resolves g to. With `intercept_flat` the intercept is excluded from mean and
/// sigma and carries an improper flat density.
struct GPriorSpec {
  Eigen::VectorXd mean;
  Eigen::MatrixXd sigma;
  GLaw g_law = UnitInformation{};
  bool intercept_flat = false;
  double n_obs = 0.0;
  std::vector<std::string> labels;

  Eigen::Index dim() const { return mean.size(); }
  bool is_mixture() const { return std::holds_alternative<InverseGammaMixture>(g_law); }

  /// g for fixed laws; the prior mean of g for the IG mixture.
  double g_point() const {
    if (const auto* f = std::get_if<FixedG>(&g_law)) return f->g;
    if (std::holds_alternative<UnitInformation>(g_law)) return n_obs;
    const auto& ig = std::get<InverseGammaMixture>(g_law);
    return ig.b / (ig.a - 1.0);
  }
};

inline GPriorSpec with_g_law(GPriorSpec spec, GLaw law) {
  spec.g_law = law;
  return spec;
}

/// log N(x; mean, g·sigma).
inline double log_density(const GPriorSpec& spec, const Eigen::VectorXd& x, double g) {
  const auto l = cholesky_lower(spec.sigma);
  const Eigen::VectorXd z = l.triangularView<Eigen::Lower>().solve(x - spec.mean);
  const double d = static_cast<double>(spec.dim());
  return -0.5 * z.squaredNorm() / g - 0.5 * d * std::log(2.0 * std::numbers::pi * g) - l.diagonal().array().log().sum();
}

/// Σ = V(m*)·g'(m*)²·[Xᵀ diag(1/φ) X]⁻¹ with mean (m1, 0, …, 0).
inline GPriorSpec gprior_generic(const DesignMatrix& x, double variance_value, double link_derivative,
                                 const Eigen::VectorXd& dispersions, double m1) {
  if (dispersions.size() != x.rows())
    throw Error(ErrorCode::DimensionMismatch, "one dispersion per design row is required");
  if ((dispersions.array() <= 0).any()) throw Error(ErrorCode::InvalidArgument, "dispersions must be positive");
  const Eigen::MatrixXd info = x.matrix.transpose() * dispersions.cwiseInverse().asDiagonal() * x.matrix;
  GPriorSpec spec;
  spec.sigma = variance_value * link_derivative * link_derivative * spd_inverse(info, x.names());
  spec.mean = Eigen::VectorXd::Zero(x.cols());
  if (x.cols() > 0) spec.mean(0) = m1;
  spec.labels = x.names();
  return spec;
}

/// Log-linear g-prior: mean (log n̄, 0, …), Σ = (n_ll/N)(XᵀX)⁻¹.
inline GPriorSpec gprior_loglinear(const DesignMatrix& x, const ContingencyTable& table) {
  if (table.total() <= 0) throw Error(ErrorCode::InvalidArgument, "log-linear g-prior needs N > 0");
  if (static_cast<std::size_t>(x.rows()) != table.num_cells())
    throw Error(ErrorCode::DimensionMismatch, "design rows do not match table cells");
  const double nbar = table.mean_count();
  GPriorSpec spec;
  spec.sigma = (1.0 / nbar) * gram_inverse(x.matrix, x.names());
  spec.mean = Eigen::VectorXd::Zero(x.cols());
  spec.mean(0) = std::log(nbar);
  spec.n_obs = static_cast<double>(table.total());
  spec.labels = x.names();
  return spec;
}

/// Logistic g-prior: mean 0, Σ = 4(n_lt/N)(XᵀX)⁻¹ (every t_i replaced by t̄).
/// `exact_weights` swaps in 4[Xᵀdiag(t)X]⁻¹ for sensitivity analysis; that
/// variant is not the prior the correspondence targets.
inline GPriorSpec gprior_logistic(const DesignMatrix& x, const BinomialData& data, bool exact_weights = false) {
  const auto n = data.total_trials();
  if (n <= 0) throw Error(ErrorCode::InvalidArgument, "logistic g-prior needs N = Σt > 0");
  if (static_cast<std::size_t>(x.rows()) != data.num_rows())
    throw Error(ErrorCode::DimensionMismatch, "design rows do not match binomial rows");
  GPriorSpec spec;
  if (exact_weights) {
    Eigen::VectorXd t(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) t(i) = static_cast<double>(data.rows[static_cast<std::size_t>(i)].trials);
    spec.sigma = 4.0 * spd_inverse(x.matrix.transpose() * t.asDiagonal() * x.matrix, x.names());
  } else {
    const double tbar = static_cast<double>(n) / static_cast<double>(data.num_rows());
    spec.sigma = (4.0 / tbar) * gram_inverse(x.matrix, x.names());
  }
  spec.mean = Eigen::VectorXd::Zero(x.cols());
  spec.n_obs = static_cast<double>(n);
  spec.labels = x.names();
  return spec;
}

/// IG(2 + N²/V, N + N³/V): prior mean N, variance → V as V/N² → 0.
inline InverseGammaMixture mixture_ig_params(double n, double var_g) {
  if (!(var_g > 0)) throw Error(ErrorCode::InvalidArgument, "Var(g) must be positive");
  if (!(n >= 1)) throw Error(ErrorCode::InvalidArgument, "N must be at least 1");
  return {2.0 + n * n / var_g, n + n * n * n / var_g};
}

inline double ig_mean(const InverseGammaMixture& ig) { return ig.b / (ig.a - 1.0); }

inline double ig_variance(const InverseGammaMixture& ig) {
  return ig.b * ig.b / ((ig.a - 1.0) * (ig.a - 1.0) * (ig.a - 2.0));
}

inline double ig_log_density(const InverseGammaMixture& ig, double g) {
  return ig.a * std::log(ig.b) - std::lgamma(ig.a) - (ig.a + 1.0) * std::log(g) - ig.b / g;
}

struct FlatInterceptPrior {
  GPriorSpec prior;           // over the non-intercept coordinates
  Eigen::MatrixXd centered;   // intercept column kept, others centered
};

/// Centers the non-intercept columns and reduces the prior to them. The
/// reduced covariance is the non-intercept block of `spec.sigma`, which equals
/// scale·(X_cᵀX_c)⁻¹ for the centered design.
inline FlatInterceptPrior apply_flat_intercept(const GPriorSpec& spec, const DesignMatrix& x) {
  if (spec.intercept_flat) throw Error(ErrorCode::InvalidArgument, "prior already has a flat intercept");
  if (x.cols() != spec.dim()) throw Error(ErrorCode::DimensionMismatch, "prior and design dimensions differ");
  FlatInterceptPrior out;
  out.centered = x.matrix;
  const Eigen::Index p = x.cols() - 1;
  if (p > 0) {
    const Eigen::RowVectorXd means = x.matrix.rightCols(p).colwise().mean();
    out.centered.rightCols(p).rowwise() -= means;
  }
  out.prior = spec;
  out.prior.intercept_flat = true;
  out.prior.mean = Eigen::VectorXd::Zero(p);
  out.prior.sigma = spec.sigma.bottomRightCorner(p, p);
  out.prior.labels.assign(spec.labels.begin() + (spec.labels.empty() ? 0 : 1), spec.labels.end());
  return out;
}

inline nlohmann::json to_json(const GPriorSpec& spec) {
  nlohmann::json j;
  j["mean"] = std::vector<double>(spec.mean.data(), spec.mean.data() + spec.mean.size());
  std::vector<double> rm;
  for (Eigen::Index i = 0; i < spec.sigma.rows(); ++i)
    for (Eigen::Index k = 0; k < spec.sigma.cols(); ++k) rm.push_back(spec.sigma(i, k));
  j["sigma"] = rm;
  j["dim"] = spec.dim();
  j["labels"] = spec.labels;
  j["intercept_flat"] = spec.intercept_flat;
  j["n_obs"] = spec.n_obs;
  if (const auto* f = std::get_if<FixedG>(&spec.g_law)) {
    j["g_law"] = {{"tag", "fixed"}, {"g", f->g}};
  } else if (std::holds_alternative<UnitInformation>(spec.g_law)) {
    j["g_law"] = {{"tag", "unit_information"}, {"g", spec.n_obs}};
  } else {
    const auto& ig = std::get<InverseGammaMixture>(spec.g_law);
    j["g_law"] = {{"tag", "inverse_gamma"}, {"a", ig.a}, {"b", ig.b}};
  }
  return j;
}

}  // namespace gcorr
