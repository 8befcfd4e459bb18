#pragma once

// Poisson log-linear and grouped-binomial logistic likelihoods, deviance,
// and a g-prior posterior with Newton mode finding.

#include <cmath>
#include <cstdint>
#include <iostream>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gcorr/error.hpp"
#include "gcorr/linalg.hpp"
#include "gcorr/models.hpp"
#include "gcorr/priors.hpp"
#include "gcorr/tables.hpp"

namespace gcorr {

enum class Family { Poisson, Binomial };

/// Linear predictors beyond ±kEtaClamp are clamped (with one warning per
/// process) to keep exp() finite.
inline constexpr double kEtaClamp = 500.0;

namespace detail {

inline double clamp_eta(double eta) {
  static bool warned = false;
  if (std::abs(eta) > kEtaClamp) {
    if (!warned) {
      std::cerr << "gcorr: warning: linear predictor " << eta << " clamped to ±" << kEtaClamp << '\n';
      warned = true;
    }
    return eta > 0 ? kEtaClamp : -kEtaClamp;
  }
  return eta;
}

// log(1 + e^x) without overflow
inline double log1p_exp(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

inline double log_choose(std::int64_t n, std::int64_t k) {
  return std::lgamma(static_cast<double>(n) + 1) - std::lgamma(static_cast<double>(k) + 1) -
         std::lgamma(static_cast<double>(n - k) + 1);
}

// x·log(x/y) with the 0·log 0 = 0 convention
inline double xlogx_over(double x, double y) { return x > 0 ? x * std::log(x / y) : 0.0; }

}  // namespace detail

/// Σ_i [n_i (Xλ)_i − exp((Xλ)_i) − log n_i!].
inline double loglik_poisson(const ContingencyTable& table, const Eigen::MatrixXd& x, const Eigen::VectorXd& lambda) {
  if (static_cast<std::size_t>(x.rows()) != table.num_cells() || x.cols() != lambda.size())
    throw Error(ErrorCode::DimensionMismatch, "loglik_poisson dimensions");
  const Eigen::VectorXd eta = x * lambda;
  double ll = 0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double e = detail::clamp_eta(eta(i));
    const auto n = static_cast<double>(table.counts()[static_cast<std::size_t>(i)]);
    ll += n * e - std::exp(e) - std::lgamma(n + 1);
  }
  return ll;
}

/// Σ_i [log C(t_i, s_i) + s_i η_i − t_i log(1 + e^{η_i})].
inline double loglik_binomial(const BinomialData& data, const Eigen::MatrixXd& x, const Eigen::VectorXd& beta) {
  if (static_cast<std::size_t>(x.rows()) != data.num_rows() || x.cols() != beta.size())
    throw Error(ErrorCode::DimensionMismatch, "loglik_binomial dimensions");
  const Eigen::VectorXd eta = x * beta;
  double ll = 0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const auto& r = data.rows[static_cast<std::size_t>(i)];
    const double e = detail::clamp_eta(eta(i));
    ll += detail::log_choose(r.trials, r.successes) + static_cast<double>(r.successes) * e -
          static_cast<double>(r.trials) * detail::log1p_exp(e);
  }
  return ll;
}

/// 2Σ[n log(n/μ) − (n − μ)].
inline double deviance_poisson(const ContingencyTable& table, const Eigen::VectorXd& mu) {
  double d = 0;
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    const auto n = static_cast<double>(table.counts()[static_cast<std::size_t>(i)]);
    d += detail::xlogx_over(n, mu(i)) - (n - mu(i));
  }
  return 2.0 * d;
}

/// 2Σ[s log(s/ŝ) + (t − s) log((t − s)/(t − ŝ))], ŝ = t·p.
inline double deviance_binomial(const BinomialData& data, const Eigen::VectorXd& p) {
  double d = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const auto& r = data.rows[static_cast<std::size_t>(i)];
    const double t = static_cast<double>(r.trials), s = static_cast<double>(r.successes);
    const double shat = t * p(i);
    d += detail::xlogx_over(s, shat) + detail::xlogx_over(t - s, t - shat);
  }
  return 2.0 * d;
}

/// Log posterior of a GLM under an optional g-prior. With a flat-intercept
/// prior the design is expected to be centered and coordinate 0 (the
/// intercept) carries an improper flat density.
class GlmPosterior {
 public:
  /// Log-linear model on a table.
  GlmPosterior(const ContingencyTable& table, Eigen::MatrixXd x) : family_(Family::Poisson), x_(std::move(x)) {
    if (static_cast<std::size_t>(x_.rows()) != table.num_cells())
      throw Error(ErrorCode::DimensionMismatch, "design rows do not match table cells");
    y_.resize(x_.rows());
    for (Eigen::Index i = 0; i < x_.rows(); ++i) y_(i) = static_cast<double>(table.counts()[static_cast<std::size_t>(i)]);
    for (Eigen::Index i = 0; i < x_.rows(); ++i) constant_ -= std::lgamma(y_(i) + 1);
    n_obs_ = y_.sum();
  }

  /// Logistic model on grouped binomial data.
  GlmPosterior(const BinomialData& data, Eigen::MatrixXd x) : family_(Family::Binomial), x_(std::move(x)) {
    if (static_cast<std::size_t>(x_.rows()) != data.num_rows())
      throw Error(ErrorCode::DimensionMismatch, "design rows do not match binomial rows");
    y_.resize(x_.rows());
    t_.resize(x_.rows());
    for (Eigen::Index i = 0; i < x_.rows(); ++i) {
      const auto& r = data.rows[static_cast<std::size_t>(i)];
      y_(i) = static_cast<double>(r.successes);
      t_(i) = static_cast<double>(r.trials);
      constant_ += detail::log_choose(r.trials, r.successes);
    }
    n_obs_ = t_.sum();
  }

  /// Attaches a g-prior; for flat-intercept priors `prior.dim()` is one less
  /// than the number of columns.
  void set_prior(const GPriorSpec& prior) {
    const Eigen::Index offset = prior.intercept_flat ? 1 : 0;
    if (prior.dim() + offset != x_.cols())
      throw Error(ErrorCode::DimensionMismatch, "prior dimension " + std::to_string(prior.dim()) +
                                                    " does not match " + std::to_string(x_.cols()) + " parameters");
    prior_offset_ = offset;
    prior_mean_ = prior.mean;
    const auto l = cholesky_lower(prior.sigma, prior.labels);
    const Eigen::Index p = prior.dim();
    const Eigen::MatrixXd linv = l.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(p, p));
    prior_precision_ = linv.transpose() * linv;
    prior_log_det_sigma_ = 2.0 * l.diagonal().array().log().sum();
    has_prior_ = true;
  }

  void set_use_likelihood(bool on) { use_likelihood_ = on; }

  Family family() const { return family_; }
  Eigen::Index dim() const { return x_.cols(); }
  const Eigen::MatrixXd& design() const { return x_; }
  double n_obs() const { return n_obs_; }
  bool has_prior() const { return has_prior_; }
  Eigen::Index prior_offset() const { return prior_offset_; }
  Eigen::Index prior_dim() const { return prior_mean_.size(); }
  const Eigen::VectorXd& prior_mean() const { return prior_mean_; }
  const Eigen::MatrixXd& prior_precision() const { return prior_precision_; }

  double log_likelihood(const Eigen::VectorXd& theta) const {
    const Eigen::VectorXd eta = x_ * theta;
    double ll = constant_;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      const double e = detail::clamp_eta(eta(i));
      ll += family_ == Family::Poisson ? y_(i) * e - std::exp(e) : y_(i) * e - t_(i) * detail::log1p_exp(e);
    }
    return ll;
  }

  /// (θ − m)ᵀ Σ⁻¹ (θ − m) over the prior coordinates.
  double prior_quadratic(const Eigen::VectorXd& theta) const {
    const Eigen::VectorXd d = theta.tail(prior_dim()) - prior_mean_;
    return d.dot(prior_precision_ * d);
  }

  double log_prior(const Eigen::VectorXd& theta, double g) const {
    if (!has_prior_) return 0.0;
    const double p = static_cast<double>(prior_dim());
    return -0.5 * prior_quadratic(theta) / g - 0.5 * p * std::log(2.0 * std::numbers::pi * g) - 0.5 * prior_log_det_sigma_;
  }

  double log_posterior(const Eigen::VectorXd& theta, double g) const {
    return (use_likelihood_ ? log_likelihood(theta) : 0.0) + log_prior(theta, g);
  }

  Eigen::VectorXd fitted_mean(const Eigen::VectorXd& theta) const {
    Eigen::VectorXd eta = x_ * theta;
    for (Eigen::Index i = 0; i < eta.size(); ++i) {
      const double e = detail::clamp_eta(eta(i));
      eta(i) = family_ == Family::Poisson ? std::exp(e) : 1.0 / (1.0 + std::exp(-e));
    }
    return eta;  // μ for Poisson, p for binomial
  }

  Eigen::VectorXd gradient(const Eigen::VectorXd& theta, double g) const {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(dim());
    if (use_likelihood_) {
      const Eigen::VectorXd m = fitted_mean(theta);
      const Eigen::VectorXd resid = family_ == Family::Poisson ? Eigen::VectorXd(y_ - m) : Eigen::VectorXd(y_ - t_.cwiseProduct(m));
      grad = x_.transpose() * resid;
    }
    if (has_prior_) grad.tail(prior_dim()) -= prior_precision_ * (theta.tail(prior_dim()) - prior_mean_) / g;
    return grad;
  }

  /// −∇² log posterior (observed = expected information for canonical links).
  Eigen::MatrixXd neg_hessian(const Eigen::VectorXd& theta, double g) const {
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim(), dim());
    if (use_likelihood_) {
      const Eigen::VectorXd m = fitted_mean(theta);
      Eigen::VectorXd w = family_ == Family::Poisson ? m : Eigen::VectorXd(t_.array() * m.array() * (1.0 - m.array()));
      h = x_.transpose() * w.asDiagonal() * x_;
    }
    if (has_prior_) h.bottomRightCorner(prior_dim(), prior_dim()) += prior_precision_ / g;
    return h;
  }

  double deviance(const Eigen::VectorXd& theta) const {
    const Eigen::VectorXd m = fitted_mean(theta);
    double d = 0;
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      if (family_ == Family::Poisson) {
        d += detail::xlogx_over(y_(i), m(i)) - (y_(i) - m(i));
      } else {
        const double shat = t_(i) * m(i);
        d += detail::xlogx_over(y_(i), shat) + detail::xlogx_over(t_(i) - y_(i), t_(i) - shat);
      }
    }
    return 2.0 * d;
  }

  /// Starting point: log n̄ in the intercept for Poisson, zeros otherwise.
  Eigen::VectorXd default_start() const {
    Eigen::VectorXd th = Eigen::VectorXd::Zero(dim());
    if (family_ == Family::Poisson && dim() > 0) th(0) = std::log(std::max(1e-3, n_obs_ / static_cast<double>(x_.rows())));
    return th;
  }

 private:
  Family family_;
  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;  // counts, or successes
  Eigen::VectorXd t_;  // trials (binomial)
  double constant_ = 0.0;
  double n_obs_ = 0.0;
  bool use_likelihood_ = true;

  bool has_prior_ = false;
  Eigen::Index prior_offset_ = 0;
  Eigen::VectorXd prior_mean_;
  Eigen::MatrixXd prior_precision_;
  double prior_log_det_sigma_ = 0.0;
};

struct ModeResult {
  Eigen::VectorXd theta;
  Eigen::MatrixXd neg_hessian;
  double log_posterior = 0.0;
  int iterations = 0;
  bool converged = false;
};

struct NewtonSettings {
  int max_iterations = 200;
  double tolerance = 1e-10;  // on max |step| and on objective change
  double ridge = 1e-8;       // added to the Hessian diagonal when it is not PD
};

/// Newton–Raphson with step halving on the log posterior (the likelihood
/// alone when no prior is attached, i.e. the MLE).
inline ModeResult find_mode(const GlmPosterior& post, double g, std::optional<Eigen::VectorXd> start = std::nullopt,
                            const NewtonSettings& settings = {}) {
  ModeResult res;
  res.theta = start ? *start : post.default_start();
  double f = post.log_posterior(res.theta, g);
  if (!std::isfinite(f)) throw Error(ErrorCode::NonFinitePosterior, "log posterior is not finite at the start point");
  for (res.iterations = 1; res.iterations <= settings.max_iterations; ++res.iterations) {
    const Eigen::VectorXd grad = post.gradient(res.theta, g);
    Eigen::MatrixXd h = post.neg_hessian(res.theta, g);
    Eigen::LLT<Eigen::MatrixXd> llt(h);
    if (llt.info() != Eigen::Success) {
      h.diagonal().array() += settings.ridge * std::max(1.0, h.diagonal().maxCoeff());
      llt.compute(h);
      if (llt.info() != Eigen::Success) break;
    }
    Eigen::VectorXd step = llt.solve(grad);
    double scale = 1.0;
    double f_new = post.log_posterior(res.theta + step, g);
    while ((!std::isfinite(f_new) || f_new < f - 1e-12 * std::abs(f)) && scale > 1e-10) {
      scale *= 0.5;
      f_new = post.log_posterior(res.theta + scale * step, g);
    }
    if (!std::isfinite(f_new)) break;
    res.theta += scale * step;
    const double change = std::abs(f_new - f);
    f = f_new;
    if ((scale * step).cwiseAbs().maxCoeff() < settings.tolerance ||
        (change < settings.tolerance * (1.0 + std::abs(f)) && grad.cwiseAbs().maxCoeff() < 1e-6 * (1.0 + std::abs(f)))) {
      res.converged = true;
      break;
    }
  }
  res.log_posterior = f;
  res.neg_hessian = post.neg_hessian(res.theta, g);
  return res;
}

/// Unpenalized maximum likelihood estimate.
inline ModeResult fit_mle(const ContingencyTable& table, const DesignMatrix& x, const NewtonSettings& s = {}) {
  GlmPosterior post(table, x.matrix);
  return find_mode(post, 1.0, std::nullopt, s);
}

inline ModeResult fit_mle(const BinomialData& data, const DesignMatrix& x, const NewtonSettings& s = {}) {
  GlmPosterior post(data, x.matrix);
  return find_mode(post, 1.0, std::nullopt, s);
}

inline double deviance(const ContingencyTable& table, const DesignMatrix& x, const Eigen::VectorXd& at) {
  GlmPosterior post(table, x.matrix);
  return post.deviance(at);
}

inline double deviance(const BinomialData& data, const DesignMatrix& x, const Eigen::VectorXd& at) {
  GlmPosterior post(data, x.matrix);
  return post.deviance(at);
}

}  // namespace gcorr
