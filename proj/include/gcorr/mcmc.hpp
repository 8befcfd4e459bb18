#pragma once

// Adaptive random-walk Metropolis for a fixed GLM under a g-prior, Gibbs
// updates for an Inverse-Gamma mixture on g, and chain summaries.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "gcorr/error.hpp"
#include "gcorr/glm.hpp"
#include "gcorr/priors.hpp"
#include "gcorr/tables.hpp"

namespace gcorr {

using Rng = std::mt19937_64;

struct McmcSettings {
  std::int64_t burn_in = 100000;
  std::int64_t iterations = 200000;
  std::uint64_t seed = 1;
  double target_acceptance = 0.234;
  double level = 0.95;
  bool use_likelihood = true;
};

struct Chain {
  Eigen::MatrixXd draws;            // kept × n_params
  std::vector<double> g_draws;      // mixture case only
  std::vector<std::string> labels;
  double acceptance_rate = 0.0;     // over the kept phase
  std::uint64_t seed = 0;
  std::int64_t burn_in = 0;
  std::int64_t kept = 0;
};

struct ParameterSummary {
  std::string label;
  double mean = 0, sd = 0, mcse = 0, lower = 0, upper = 0;
};

struct PosteriorSummary {
  std::vector<ParameterSummary> parameters;
  double level = 0.95;
  double deviance_at_posterior_mean = 0.0;
  double acceptance_rate = 0.0;
  std::int64_t kept = 0;
  std::optional<ParameterSummary> g;

  const ParameterSummary& at(const std::string& label) const {
    for (const auto& p : parameters)
      if (p.label == label) return p;
    throw Error(ErrorCode::InvalidArgument, "no parameter labelled '" + label + "'");
  }
};

/// Draw g | θ ~ IG(a + p/2, b + Q/2), Q = (θ − m)ᵀΣ⁻¹(θ − m) over the prior
/// coordinates (the flat intercept excluded).
inline double gibbs_update_g(const InverseGammaMixture& ig, double quadratic, Eigen::Index p, Rng& rng) {
  const double shape = ig.a + 0.5 * static_cast<double>(p);
  const double rate = ig.b + 0.5 * quadratic;
  std::gamma_distribution<double> gamma(shape, 1.0 / rate);
  return 1.0 / gamma(rng);
}

inline InverseGammaMixture g_conditional(const InverseGammaMixture& ig, double quadratic, Eigen::Index p) {
  return {ig.a + 0.5 * static_cast<double>(p), ig.b + 0.5 * quadratic};
}

namespace detail {

inline Eigen::VectorXd standard_normal(Eigen::Index n, Rng& rng) {
  std::normal_distribution<double> z;
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = z(rng);
  return v;
}

/// Batch-means MCSE with ⌊√n⌋ batches.
inline double batch_means_mcse(const Eigen::Ref<const Eigen::VectorXd>& x) {
  const auto n = x.size();
  const auto batches = static_cast<Eigen::Index>(std::floor(std::sqrt(static_cast<double>(n))));
  const Eigen::Index size = n / batches;
  if (batches < 2 || size < 1) return 0.0;
  Eigen::VectorXd means(batches);
  for (Eigen::Index b = 0; b < batches; ++b) means(b) = x.segment(b * size, size).mean();
  const double grand = means.mean();
  const double var = (means.array() - grand).square().sum() / static_cast<double>(batches - 1);
  return std::sqrt(var / static_cast<double>(batches));
}

inline ParameterSummary summarize_column(const std::string& label, const Eigen::Ref<const Eigen::VectorXd>& x,
                                         double level) {
  ParameterSummary s;
  s.label = label;
  const auto n = static_cast<double>(x.size());
  s.mean = x.mean();
  s.sd = n > 1 ? std::sqrt((x.array() - s.mean).square().sum() / (n - 1)) : 0.0;
  s.mcse = batch_means_mcse(x);
  std::vector<double> sorted(x.data(), x.data() + x.size());
  std::sort(sorted.begin(), sorted.end());
  s.lower = quantile_sorted(sorted, 0.5 * (1.0 - level));
  s.upper = quantile_sorted(sorted, 0.5 * (1.0 + level));
  return s;
}

}  // namespace detail

inline constexpr std::int64_t kMinSummaryDraws = 1000;

/// Equal-tailed intervals and batch-means MCSE for every column.
inline PosteriorSummary summarize(const Chain& chain, double level = 0.95) {
  if (chain.draws.rows() < kMinSummaryDraws)
    throw Error(ErrorCode::TooFewDraws, std::to_string(chain.draws.rows()) + " draws; at least " +
                                            std::to_string(kMinSummaryDraws) + " are needed");
  if (!(level > 0 && level < 1)) throw Error(ErrorCode::InvalidArgument, "credible level must lie in (0, 1)");
  PosteriorSummary out;
  out.level = level;
  out.kept = chain.draws.rows();
  out.acceptance_rate = chain.acceptance_rate;
  for (Eigen::Index j = 0; j < chain.draws.cols(); ++j) {
    const std::string label =
        static_cast<std::size_t>(j) < chain.labels.size() ? chain.labels[static_cast<std::size_t>(j)] : "p" + std::to_string(j);
    out.parameters.push_back(detail::summarize_column(label, chain.draws.col(j), level));
  }
  if (!chain.g_draws.empty()) {
    const Eigen::Map<const Eigen::VectorXd> g(chain.g_draws.data(), static_cast<Eigen::Index>(chain.g_draws.size()));
    out.g = detail::summarize_column("g", g, level);
  }
  return out;
}

struct FitResult {
  Chain chain;
  PosteriorSummary summary;
  ModeResult mode;
};

/// Adaptive random-walk Metropolis on the whole parameter block. The chain
/// starts at the posterior mode with the inverse Hessian as proposal
/// covariance; during burn-in a Robbins–Monro scale targets the acceptance
/// rate and the covariance tracks the empirical one. Both freeze at the end of
/// burn-in.
inline FitResult fit_mcmc(const GlmPosterior& post_in, const GPriorSpec& prior, const McmcSettings& settings,
                          std::vector<std::string> labels = {}) {
  if (settings.burn_in < 0 || settings.iterations < 1)
    throw Error(ErrorCode::InvalidArgument, "burn-in must be >= 0 and iterations >= 1");
  GlmPosterior post = post_in;
  post.set_prior(prior);
  post.set_use_likelihood(settings.use_likelihood);
  if (!settings.use_likelihood && prior.intercept_flat)
    throw Error(ErrorCode::InvalidArgument, "a prior-only run with a flat intercept targets an improper density");

  Rng rng(settings.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const auto* ig = std::get_if<InverseGammaMixture>(&prior.g_law);
  double g = prior.g_point();

  FitResult res;
  res.mode = find_mode(post, g);
  Eigen::VectorXd theta = res.mode.theta;
  double lp = post.log_posterior(theta, g);
  if (!std::isfinite(lp)) throw Error(ErrorCode::NonFinitePosterior, "log posterior is not finite at the mode");

  const Eigen::Index d = post.dim();
  Eigen::MatrixXd laplace_cov = spd_inverse(res.mode.neg_hessian);
  Eigen::MatrixXd chol = cholesky_lower(laplace_cov);
  double log_scale = std::log(2.38 * 2.38 / static_cast<double>(d));

  // running moments over the last three quarters of burn-in
  Eigen::VectorXd run_mean = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd run_m2 = Eigen::MatrixXd::Zero(d, d);
  std::int64_t run_n = 0;
  const std::int64_t adapt_start = settings.burn_in / 4;

  Chain& chain = res.chain;
  chain.labels = labels.empty() ? prior.labels : std::move(labels);
  if (prior.intercept_flat && chain.labels.size() + 1 == static_cast<std::size_t>(d))
    chain.labels.insert(chain.labels.begin(), "Intercept");
  chain.seed = settings.seed;
  chain.burn_in = settings.burn_in;
  chain.kept = settings.iterations;
  chain.draws.resize(settings.iterations, d);
  if (ig) chain.g_draws.reserve(static_cast<std::size_t>(settings.iterations));

  std::int64_t accepted = 0;
  const std::int64_t total = settings.burn_in + settings.iterations;
  for (std::int64_t it = 0; it < total; ++it) {
    const bool adapting = it < settings.burn_in;
    const Eigen::VectorXd proposal = theta + std::exp(0.5 * log_scale) * (chol * detail::standard_normal(d, rng));
    const double lp_new = post.log_posterior(proposal, g);
    const double log_alpha = std::isfinite(lp_new) ? std::min(0.0, lp_new - lp) : -INFINITY;
    const bool accept = std::log(unif(rng)) < log_alpha;
    if (accept) {
      theta = proposal;
      lp = lp_new;
    }

    if (ig) {
      g = gibbs_update_g(*ig, post.prior_quadratic(theta), post.prior_dim(), rng);
      lp = post.log_posterior(theta, g);
    }

    if (adapting) {
      const double step = 1.0 / std::pow(static_cast<double>(it) + 10.0, 0.6);
      log_scale += step * (std::exp(log_alpha) - settings.target_acceptance);
      if (it >= adapt_start) {
        ++run_n;
        const Eigen::VectorXd delta = theta - run_mean;
        run_mean += delta / static_cast<double>(run_n);
        run_m2 += delta * (theta - run_mean).transpose();
        if (run_n >= 20 * d && run_n % 1000 == 0) {
          Eigen::MatrixXd emp = run_m2 / static_cast<double>(run_n - 1);
          emp = 0.95 * emp + 0.05 * laplace_cov;
          try {
            chol = cholesky_lower(0.5 * (emp + emp.transpose()));
          } catch (const Error&) {
            // keep the previous factor
          }
        }
      }
    } else {
      if (accept) ++accepted;
      const std::int64_t k = it - settings.burn_in;
      chain.draws.row(k) = theta.transpose();
      if (ig) chain.g_draws.push_back(g);
    }
  }
  chain.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(settings.iterations);
  if (accepted == 0) std::cerr << "gcorr: warning: no proposals accepted after adaptation\n";

  if (settings.iterations >= kMinSummaryDraws) {
    res.summary = summarize(chain, settings.level);
    Eigen::VectorXd pm(d);
    for (Eigen::Index j = 0; j < d; ++j) pm(j) = res.summary.parameters[static_cast<std::size_t>(j)].mean;
    res.summary.deviance_at_posterior_mean = post.deviance(pm);
  }
  return res;
}

inline void write_chain_csv(std::ostream& out, const Chain& chain) {
  for (std::size_t j = 0; j < chain.labels.size(); ++j) out << (j ? "," : "") << chain.labels[j];
  if (!chain.g_draws.empty()) out << ",g";
  out << '\n';
  out.precision(17);
  for (Eigen::Index i = 0; i < chain.draws.rows(); ++i) {
    for (Eigen::Index j = 0; j < chain.draws.cols(); ++j) out << (j ? "," : "") << chain.draws(i, j);
    if (!chain.g_draws.empty()) out << ',' << chain.g_draws[static_cast<std::size_t>(i)];
    out << '\n';
  }
}

inline nlohmann::json to_json(const ParameterSummary& p) {
  return {{"label", p.label}, {"mean", p.mean}, {"sd", p.sd}, {"mcse", p.mcse}, {"lower", p.lower}, {"upper", p.upper}};
}

inline nlohmann::json to_json(const PosteriorSummary& s) {
  nlohmann::json j;
  j["level"] = s.level;
  j["kept"] = s.kept;
  j["acceptance_rate"] = s.acceptance_rate;
  j["deviance_at_posterior_mean"] = s.deviance_at_posterior_mean;
  j["parameters"] = nlohmann::json::array();
  for (const auto& p : s.parameters) j["parameters"].push_back(to_json(p));
  if (s.g) j["g"] = to_json(*s.g);
  return j;
}

}  // namespace gcorr
