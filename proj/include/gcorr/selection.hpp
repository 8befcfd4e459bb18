#pragma once

// Posterior model probabilities over graphical model spaces: Laplace
// marginal likelihoods by exhaustive enumeration, and a reversible-jump
// sampler whose between-model moves toggle one edge and draw the new
// parameters from the proposed model's Laplace approximation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <map>
#include <memory>
#include <numbers>
#include <random>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "gcorr/error.hpp"
#include "gcorr/glm.hpp"
#include "gcorr/mcmc.hpp"
#include "gcorr/models.hpp"
#include "gcorr/priors.hpp"
#include "gcorr/problem.hpp"
#include "gcorr/tables.hpp"

namespace gcorr {

struct ModelProbability {
  std::uint64_t mask = 0;
  std::string formula;
  double probability = 0.0;
  std::int64_t visits = 0;
  double log_marginal = 0.0;  // enumeration mode only
};

struct ModelPosterior {
  std::vector<ModelProbability> models;  // sorted by probability, descending
  std::int64_t iterations = 0;
  double jump_acceptance = 0.0;
  std::int64_t failed_fits = 0;

  const ModelProbability& modal() const {
    if (models.empty()) throw Error(ErrorCode::InvalidArgument, "empty model posterior");
    return models.front();
  }

  double probability(std::uint64_t mask) const {
    for (const auto& m : models)
      if (m.mask == mask) return m.probability;
    return 0.0;
  }

  std::vector<ModelProbability> top(std::size_t k) const {
    return {models.begin(), models.begin() + static_cast<std::ptrdiff_t>(std::min(k, models.size()))};
  }
};

/// ½ Σ |p − q| over the union of supports.
inline double total_variation(const ModelPosterior& a, const ModelPosterior& b) {
  std::map<std::uint64_t, double> diff;
  for (const auto& m : a.models) diff[m.mask] += m.probability;
  for (const auto& m : b.models) diff[m.mask] -= m.probability;
  double tv = 0;
  for (const auto& [mask, d] : diff) tv += std::abs(d);
  return 0.5 * tv;
}

struct SelectionSettings {
  std::int64_t burn_in = 10000;
  std::int64_t iterations = 100000;
  std::uint64_t seed = 1;
  double jump_probability = 0.5;
  double proposal_scale = 1.2;  // Laplace covariance inflation (sd multiplier)
  int g_quadrature_points = 41;  // enumeration with an IG mixture on g
  std::optional<std::uint64_t> start_mask;
};

/// One candidate model prepared for selection: its posterior and the Laplace
/// approximation at g = prior point value.
struct CandidateModel {
  std::unique_ptr<ModelProblem> problem;
  ModeResult mode;
  Eigen::MatrixXd proposal_chol;     // of scale² · H⁻¹
  Eigen::MatrixXd proposal_precision;
  double proposal_log_norm = 0.0;    // log normalizing constant of the proposal density
  bool ok = false;
  std::string failure;

  double proposal_log_density(const Eigen::VectorXd& theta) const {
    const Eigen::VectorXd d = theta - mode.theta;
    return -0.5 * d.dot(proposal_precision * d) + proposal_log_norm;
  }
};

/// Graphical model space over a table, log-linear or logistic.
class SelectionProblem {
 public:
  SelectionProblem(ContingencyTable table, GraphicalSpace space, PriorChoice prior)
      : table_(std::move(table)), space_(std::move(space)), prior_(prior) {
    for (const auto& v : space_.vertices()) table_.factor_index(v);
    if (space_.role() == Role::Logistic) binomial_ = collapse_to_binomial(table_, space_.outcome(), space_.vertices());
  }

  const GraphicalSpace& space() const { return space_; }
  const PriorChoice& prior_choice() const { return prior_; }
  double n_obs() const { return static_cast<double>(table_.total()); }

  std::string formula(std::uint64_t mask) const {
    std::vector<std::string> order = space_.vertices();
    return formula_string(space_.model(mask), order);
  }

  std::unique_ptr<ModelProblem> make(std::uint64_t mask) const {
    const auto model = space_.model(mask);
    if (space_.role() == Role::LogLinear) return std::make_unique<ModelProblem>(table_, model, prior_);
    return std::make_unique<ModelProblem>(binomial_, model, prior_);
  }

  CandidateModel prepare(std::uint64_t mask, double proposal_scale) const {
    CandidateModel c;
    try {
      c.problem = make(mask);
      const auto& post = c.problem->posterior();
      c.mode = find_mode(post, c.problem->prior().g_point());
      if (!c.mode.converged) throw Error(ErrorCode::ModeNotFound, "Newton iterations did not converge");
      const Eigen::MatrixXd cov = proposal_scale * proposal_scale * spd_inverse(c.mode.neg_hessian);
      c.proposal_chol = cholesky_lower(cov);
      c.proposal_precision = c.mode.neg_hessian / (proposal_scale * proposal_scale);
      const double d = static_cast<double>(post.dim());
      c.proposal_log_norm = -0.5 * d * std::log(2.0 * std::numbers::pi) - c.proposal_chol.diagonal().array().log().sum();
      c.ok = true;
    } catch (const Error& e) {
      c.ok = false;
      c.failure = e.what();
    }
    return c;
  }

  /// Laplace log marginal likelihood; for an IG mixture on g, integrated over
  /// g by trapezoid quadrature on the IG's central range.
  double laplace_log_marginal(std::uint64_t mask, int g_points = 41) const {
    auto problem = make(mask);
    const auto& post = problem->posterior();
    const auto& prior = problem->prior();
    auto at_g = [&](double g, std::optional<Eigen::VectorXd> start) {
      auto mode = find_mode(post, g, std::move(start));
      if (!mode.converged) throw Error(ErrorCode::ModeNotFound, "Laplace mode for " + formula(mask));
      const double d = static_cast<double>(post.dim());
      return std::make_pair(mode.log_posterior + 0.5 * d * std::log(2.0 * std::numbers::pi) -
                                0.5 * log_det_spd(mode.neg_hessian),
                            mode.theta);
    };
    const auto* ig = std::get_if<InverseGammaMixture>(&prior.g_law);
    if (!ig) return at_g(prior.g_point(), std::nullopt).first;

    const double mean = ig_mean(*ig), sd = std::sqrt(ig_variance(*ig));
    const double lo = std::max(mean * 1e-3, mean - 8.0 * sd), hi = mean + 12.0 * sd;
    const double h = (hi - lo) / (g_points - 1);
    std::vector<double> terms;
    std::optional<Eigen::VectorXd> start;
    for (int k = 0; k < g_points; ++k) {
      const double g = lo + h * k;
      auto [lm, theta] = at_g(g, start);
      start = theta;
      const double w = (k == 0 || k == g_points - 1) ? 0.5 : 1.0;
      terms.push_back(lm + ig_log_density(*ig, g) + std::log(w * h));
    }
    const double mx = *std::max_element(terms.begin(), terms.end());
    double s = 0;
    for (double t : terms) s += std::exp(t - mx);
    return mx + std::log(s);
  }

 private:
  ContingencyTable table_;
  GraphicalSpace space_;
  PriorChoice prior_;
  BinomialData binomial_;
};

/// Exact enumeration of the space with Laplace marginal likelihoods and a
/// uniform model prior. Models whose mode cannot be found get probability 0.
inline ModelPosterior enumerate_models(const SelectionProblem& problem, const SelectionSettings& settings = {}) {
  const auto& space = problem.space();
  if (space.num_models() > (std::uint64_t{1} << 15))
    throw Error(ErrorCode::TooManyFactors, "enumeration is limited to 2^15 models");
  ModelPosterior out;
  std::vector<double> logm;
  for (std::uint64_t mask = 0; mask < space.num_models(); ++mask) {
    ModelProbability m;
    m.mask = mask;
    m.formula = problem.formula(mask);
    try {
      m.log_marginal = problem.laplace_log_marginal(mask, settings.g_quadrature_points);
    } catch (const Error&) {
      m.log_marginal = -INFINITY;
      ++out.failed_fits;
    }
    logm.push_back(m.log_marginal);
    out.models.push_back(std::move(m));
  }
  const double mx = *std::max_element(logm.begin(), logm.end());
  double s = 0;
  for (double l : logm) s += std::exp(l - mx);
  for (auto& m : out.models) m.probability = std::exp(m.log_marginal - mx) / s;
  std::stable_sort(out.models.begin(), out.models.end(),
                   [](const auto& a, const auto& b) { return a.probability > b.probability; });
  return out;
}

/// Reversible-jump sampler over the graphical space. State (model, θ, g).
/// Between-model move: toggle a uniformly chosen edge and draw θ' from the
/// new model's inflated Laplace normal, accepting with
///   [p(y|θ',M') p(θ'|M',g) q_M(θ)] / [p(y|θ,M) p(θ|M,g) q_M'(θ')].
/// Within-model move: independence proposal from q_M. g is Gibbs-updated
/// under an IG mixture.
inline ModelPosterior select_models(const SelectionProblem& problem, const SelectionSettings& settings = {}) {
  const auto& space = problem.space();
  Rng rng(settings.seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick_edge(0, space.num_edges() == 0 ? 0 : space.num_edges() - 1);

  std::unordered_map<std::uint64_t, std::unique_ptr<CandidateModel>> cache;
  std::int64_t failed = 0;
  auto candidate = [&](std::uint64_t mask) -> const CandidateModel& {
    auto it = cache.find(mask);
    if (it == cache.end()) {
      auto c = std::make_unique<CandidateModel>(problem.prepare(mask, settings.proposal_scale));
      if (!c->ok) {
        ++failed;
        std::cerr << "gcorr: model " << problem.formula(mask) << " rejected: " << c->failure << '\n';
      }
      it = cache.emplace(mask, std::move(c)).first;
    }
    return *it->second;
  };

  std::uint64_t mask = settings.start_mask.value_or(0);
  const CandidateModel* cur = &candidate(mask);
  if (!cur->ok) throw Error(ErrorCode::ModeNotFound, "start model " + problem.formula(mask) + ": " + cur->failure);
  double g = cur->problem->prior().g_point();
  const auto* ig = std::get_if<InverseGammaMixture>(&cur->problem->prior().g_law);

  Eigen::VectorXd theta = cur->mode.theta;
  double lp = cur->problem->posterior().log_posterior(theta, g);

  std::unordered_map<std::uint64_t, std::int64_t> visits;
  std::int64_t jumps = 0, jumps_accepted = 0;
  const std::int64_t total = settings.burn_in + settings.iterations;
  for (std::int64_t it = 0; it < total; ++it) {
    if (space.num_edges() > 0 && unif(rng) < settings.jump_probability) {
      ++jumps;
      const std::uint64_t next = mask ^ (std::uint64_t{1} << pick_edge(rng));
      const CandidateModel& cand = candidate(next);
      if (cand.ok) {
        const Eigen::VectorXd prop =
            cand.mode.theta + cand.proposal_chol * detail::standard_normal(cand.mode.theta.size(), rng);
        const double lp_new = cand.problem->posterior().log_posterior(prop, g);
        const double log_alpha =
            lp_new - cand.proposal_log_density(prop) - (lp - cur->proposal_log_density(theta));
        if (std::isfinite(lp_new) && std::log(unif(rng)) < log_alpha) {
          mask = next;
          cur = &cand;
          theta = prop;
          lp = lp_new;
          ++jumps_accepted;
        }
      }
    } else {
      const Eigen::VectorXd prop = cur->mode.theta + cur->proposal_chol * detail::standard_normal(theta.size(), rng);
      const double lp_new = cur->problem->posterior().log_posterior(prop, g);
      const double log_alpha = lp_new - cur->proposal_log_density(prop) - (lp - cur->proposal_log_density(theta));
      if (std::isfinite(lp_new) && std::log(unif(rng)) < log_alpha) {
        theta = prop;
        lp = lp_new;
      }
    }
    if (ig) {
      const auto& post = cur->problem->posterior();
      g = gibbs_update_g(*ig, post.prior_quadratic(theta), post.prior_dim(), rng);
      lp = post.log_posterior(theta, g);
    }
    if (it >= settings.burn_in) ++visits[mask];
  }

  ModelPosterior out;
  out.iterations = settings.iterations;
  out.jump_acceptance = jumps ? static_cast<double>(jumps_accepted) / static_cast<double>(jumps) : 0.0;
  out.failed_fits = failed;
  for (const auto& [m, v] : visits) {
    ModelProbability p;
    p.mask = m;
    p.formula = problem.formula(m);
    p.visits = v;
    p.probability = static_cast<double>(v) / static_cast<double>(settings.iterations);
    out.models.push_back(std::move(p));
  }
  std::sort(out.models.begin(), out.models.end(), [](const auto& a, const auto& b) {
    return a.probability != b.probability ? a.probability > b.probability : a.mask < b.mask;
  });
  return out;
}

inline nlohmann::json to_json(const ModelPosterior& mp, std::size_t top_k = 10) {
  nlohmann::json j;
  j["iterations"] = mp.iterations;
  j["jump_acceptance"] = mp.jump_acceptance;
  j["failed_fits"] = mp.failed_fits;
  j["models"] = nlohmann::json::array();
  for (const auto& m : mp.top(top_k)) {
    nlohmann::json e{{"formula", m.formula}, {"mask", m.mask}, {"probability", m.probability}, {"visits", m.visits}};
    if (mp.iterations == 0) e["log_marginal"] = m.log_marginal;
    j["models"].push_back(e);
  }
  return j;
}

}  // namespace gcorr
