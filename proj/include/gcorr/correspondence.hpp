#pragma once

// The λ → β map between a log-linear model and the logistic regression it
// implies for a binary outcome, the row/column rearrangement that exposes
// the block structure of the log-linear design, and the implied prior on β.

#include <cmath>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "gcorr/error.hpp"
#include "gcorr/linalg.hpp"
#include "gcorr/models.hpp"
#include "gcorr/priors.hpp"
#include "gcorr/tables.hpp"

namespace gcorr {

struct LambdaBetaMap {
  std::string outcome;
  std::vector<FactorSpec> factors;     // table factors
  std::vector<FactorSpec> covariates;  // factors kept by the logistic model (table order)
  std::vector<FactorSpec> dropped;     // non-outcome factors absent from it

  ModelFormula loglinear;
  ModelFormula logistic;
  DesignMatrix x_ll;
  DesignMatrix x_lt;

  Eigen::MatrixXd t;                    // n_β × n_λ, one-hot rows
  std::vector<Eigen::Index> selected;   // selected[j] = λ column of β_j
  std::vector<Eigen::Index> permutation;  // λ_r[k] = λ[permutation[k]]
  Eigen::MatrixXd t_r;                  // = [I | 0]

  std::size_t level_product = 1;  // ∏ levels of dropped factors
  std::size_t q = 1;              // 1 + number of dropped factors

  Eigen::Index n_beta() const { return t.rows(); }
  Eigen::Index n_lambda() const { return t.cols(); }
  std::size_t n_ll() const { return detail::level_product(factors); }
  std::size_t n_lt() const { return detail::level_product(covariates); }

  /// "β[X(1)] = λ[XY(1,1)]"-style identities, one per logistic parameter.
  std::vector<std::string> identities() const {
    std::vector<std::string> out;
    for (Eigen::Index j = 0; j < n_beta(); ++j)
      out.push_back("beta[" + x_lt.labels[static_cast<std::size_t>(j)].name + "] = lambda[" +
                    x_ll.labels[static_cast<std::size_t>(selected[static_cast<std::size_t>(j)])].name + "]");
    return out;
  }
};

inline LambdaBetaMap build_map(const ModelFormula& loglinear, const std::string& outcome,
                               const std::vector<FactorSpec>& factors) {
  auto corr = loglinear_to_logistic(loglinear, outcome, factors);  // checks Y binary and present
  LambdaBetaMap map;
  map.outcome = outcome;
  map.factors = factors;
  map.loglinear = loglinear;
  map.logistic = corr.logistic;

  const auto kept = map.logistic.factors();
  for (const auto& f : factors) {
    if (f.name == outcome) continue;
    (kept.count(f.name) ? map.covariates : map.dropped).push_back(f);
  }
  for (const auto& f : map.dropped) map.level_product *= static_cast<std::size_t>(f.levels);
  map.q = 1 + map.dropped.size();

  map.x_ll = design_matrix(factors, loglinear);
  map.x_lt = design_matrix(map.covariates, map.logistic);

  const auto order = detail::names_of(factors);
  const auto y_pos = static_cast<std::size_t>(
      std::find(order.begin(), order.end(), outcome) - order.begin());

  const Eigen::Index nb = map.x_lt.cols(), nl = map.x_ll.cols();
  map.t = Eigen::MatrixXd::Zero(nb, nl);
  std::vector<bool> used(static_cast<std::size_t>(nl), false);
  for (Eigen::Index j = 0; j < nb; ++j) {
    const auto& lab = map.x_lt.labels[static_cast<std::size_t>(j)];
    const Term full = lab.term.with(outcome);
    LevelTuple levels;
    std::size_t k = 0;
    for (auto p : detail::positions(full, order)) levels.push_back(p == y_pos ? 1 : lab.levels[k++]);
    const auto col = map.x_ll.find(full, levels);
    if (col < 0) throw Error(ErrorCode::BlockStructure, "no log-linear column for " + lab.name);
    map.t(j, col) = 1.0;
    map.selected.push_back(col);
    used[static_cast<std::size_t>(col)] = true;
  }
  map.permutation = map.selected;
  for (Eigen::Index c = 0; c < nl; ++c)
    if (!used[static_cast<std::size_t>(c)]) map.permutation.push_back(c);

  map.t_r = Eigen::MatrixXd::Zero(nb, nl);
  for (Eigen::Index j = 0; j < nb; ++j)
    for (Eigen::Index c = 0; c < nl; ++c) map.t_r(j, c) = map.t(j, map.permutation[static_cast<std::size_t>(c)]);
  return map;
}

struct RearrangedSystem {
  Eigen::MatrixXd x_rll;
  Eigen::MatrixXd x_lt_star;       // top-left block
  Eigen::MatrixXd x_ll_minus_lt;   // top-right (= bottom-right) block
  std::vector<std::size_t> row_permutation;   // x_rll row r = x_ll row row_permutation[r]
  std::vector<Eigen::Index> column_permutation;
  bool square = false;  // true iff the non-outcome terms saturate the covariates
};

/// Rows: outcome = 1 cells first, then outcome = 0 cells in the same order.
/// Within a block the dropped factors cycle slowest and the covariates follow
/// the logistic design's row order, so the top-left block is X_lt stacked
/// level_product times.
inline RearrangedSystem rearrange(const DesignMatrix& x_ll, const LambdaBetaMap& map) {
  const std::size_t n_ll = map.n_ll();
  if (static_cast<std::size_t>(x_ll.rows()) != n_ll || x_ll.cols() != map.n_lambda())
    throw Error(ErrorCode::DimensionMismatch, "design does not match the λ→β map");

  const auto order = detail::names_of(map.factors);
  auto pos_of = [&](const std::string& n) {
    return static_cast<std::size_t>(std::find(order.begin(), order.end(), n) - order.begin());
  };
  const auto y = pos_of(map.outcome);
  std::vector<std::size_t> cov_pos, drop_pos;
  for (const auto& f : map.covariates) cov_pos.push_back(pos_of(f.name));
  for (const auto& f : map.dropped) drop_pos.push_back(pos_of(f.name));

  RearrangedSystem sys;
  const std::size_t n_lt = map.n_lt();
  for (int ylev : {1, 0})
    for (std::size_t d = 0; d < map.level_product; ++d) {
      const auto dl = detail::unravel(d, map.dropped);
      for (std::size_t r = 0; r < n_lt; ++r) {
        const auto cl = detail::unravel(r, map.covariates);
        LevelTuple cell(order.size(), 0);
        cell[y] = ylev;
        for (std::size_t k = 0; k < cov_pos.size(); ++k) cell[cov_pos[k]] = cl[k];
        for (std::size_t k = 0; k < drop_pos.size(); ++k) cell[drop_pos[k]] = dl[k];
        sys.row_permutation.push_back(detail::ravel(cell, map.factors));
      }
    }
  sys.column_permutation = map.permutation;

  const Eigen::Index n = static_cast<Eigen::Index>(n_ll), p = x_ll.cols(), nb = map.n_beta();
  sys.x_rll.resize(n, p);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < p; ++c)
      sys.x_rll(r, c) = x_ll.matrix(static_cast<Eigen::Index>(sys.row_permutation[static_cast<std::size_t>(r)]),
                                    sys.column_permutation[static_cast<std::size_t>(c)]);

  const Eigen::Index half = n / 2;
  sys.x_lt_star = sys.x_rll.topLeftCorner(half, nb);
  sys.x_ll_minus_lt = sys.x_rll.topRightCorner(half, p - nb);
  sys.square = sys.x_ll_minus_lt.rows() == sys.x_ll_minus_lt.cols();

  if (!sys.x_rll.bottomLeftCorner(half, nb).isZero(0.0))
    throw Error(ErrorCode::BlockStructure, "outcome-containing columns are nonzero on outcome = 0 rows");
  if (sys.x_rll.bottomRightCorner(half, p - nb) != sys.x_ll_minus_lt)
    throw Error(ErrorCode::BlockStructure, "non-outcome columns differ between the two outcome blocks");
  for (std::size_t d = 0; d < map.level_product; ++d)
    if (sys.x_lt_star.middleRows(static_cast<Eigen::Index>(d * n_lt), static_cast<Eigen::Index>(n_lt)) !=
        map.x_lt.matrix)
      throw Error(ErrorCode::BlockStructure, "top-left block is not X_lt stacked");
  return sys;
}

/// Prior on β = Tλ: mean Tm, covariance g·TΣTᵀ (base covariance TΣTᵀ).
inline GPriorSpec implied_beta_prior(const GPriorSpec& lambda_prior, const LambdaBetaMap& map, double g) {
  if (lambda_prior.dim() != map.n_lambda())
    throw Error(ErrorCode::DimensionMismatch, "λ prior dimension does not match the map");
  if (lambda_prior.intercept_flat)
    throw Error(ErrorCode::InvalidArgument, "use implied_beta_prior_flat_intercept for flat-intercept priors");
  GPriorSpec out;
  out.mean = map.t * lambda_prior.mean;
  out.sigma = map.t * lambda_prior.sigma * map.t.transpose();
  out.g_law = FixedG{g};
  out.n_obs = lambda_prior.n_obs;
  out.labels = map.x_lt.names();
  return out;
}

/// Same map with the (always zero) intercept column of T dropped, applied to
/// a flat-intercept λ prior.
inline GPriorSpec implied_beta_prior_flat_intercept(const GPriorSpec& lambda_prior_flat, const LambdaBetaMap& map,
                                                    double g) {
  if (!lambda_prior_flat.intercept_flat) throw Error(ErrorCode::InvalidArgument, "expected a flat-intercept λ prior");
  if (lambda_prior_flat.dim() != map.n_lambda() - 1)
    throw Error(ErrorCode::DimensionMismatch, "flat λ prior dimension does not match the map");
  if (!map.t.col(0).isZero(0.0)) throw Error(ErrorCode::BlockStructure, "T selects the log-linear intercept");
  const Eigen::MatrixXd t_minus = map.t.rightCols(map.n_lambda() - 1);
  GPriorSpec out;
  out.mean = t_minus * lambda_prior_flat.mean;
  out.sigma = t_minus * lambda_prior_flat.sigma * t_minus.transpose();
  out.g_law = FixedG{g};
  out.n_obs = lambda_prior_flat.n_obs;
  out.labels = map.x_lt.names();
  return out;
}

// ---------------------------------------------------------------------------
// The upper-left n_β block H of (X_rllᵀX_rll)⁻¹, four ways.

/// Direct inversion of the whole Gram matrix.
inline Eigen::MatrixXd h_direct(const RearrangedSystem& sys, Eigen::Index n_beta) {
  return gram_inverse(sys.x_rll).topLeftCorner(n_beta, n_beta);
}

/// Partitioned-inverse form with S = B'(2I − P)B.
inline Eigen::MatrixXd h_partitioned(const RearrangedSystem& sys) {
  const auto& a = sys.x_lt_star;
  const auto& b = sys.x_ll_minus_lt;
  const Eigen::MatrixXd ata_inv = gram_inverse(a);
  const Eigen::MatrixXd proj = a * ata_inv * a.transpose();
  const Eigen::Index n = a.rows();
  const Eigen::MatrixXd s = b.transpose() * (2.0 * Eigen::MatrixXd::Identity(n, n) - proj) * b;
  const Eigen::MatrixXd k = ata_inv * a.transpose() * b;
  return ata_inv + k * spd_inverse(s) * k.transpose();
}

/// Partitioned form after replacing (2I − P) by (0.5I + 0.5P)⁻¹; when B is
/// square the bracket is evaluated as B⁻¹(0.5I + 0.5P)B⁻ᵀ.
inline Eigen::MatrixXd h_partitioned_projected(const RearrangedSystem& sys) {
  const auto& a = sys.x_lt_star;
  const auto& b = sys.x_ll_minus_lt;
  const Eigen::MatrixXd ata_inv = gram_inverse(a);
  const Eigen::Index n = a.rows();
  const Eigen::MatrixXd half = 0.5 * Eigen::MatrixXd::Identity(n, n) + 0.5 * a * ata_inv * a.transpose();
  Eigen::MatrixXd middle;
  if (sys.square) {
    const Eigen::MatrixXd b_inv = b.fullPivLu().inverse();
    middle = b_inv * half * b_inv.transpose();
  } else {
    middle = spd_inverse(b.transpose() * half.fullPivLu().inverse() * b);
  }
  const Eigen::MatrixXd k = ata_inv * a.transpose() * b;
  return ata_inv + k * middle * k.transpose();
}

/// Closed form 2(X_lt*ᵀX_lt*)⁻¹ = 2(level_product · X_ltᵀX_lt)⁻¹.
inline Eigen::MatrixXd h_analytic(const LambdaBetaMap& map) {
  return 2.0 * spd_inverse(static_cast<double>(map.level_product) * map.x_lt.matrix.transpose() * map.x_lt.matrix);
}

/// ‖(cI − P)(I/c + P/(c(c−1))) − I‖_max for the projection onto X*.
inline double projection_identity_check(const Eigen::MatrixXd& x_star, double c) {
  if (c == 0.0 || c == 1.0) throw Error(ErrorCode::InvalidArgument, "projection identity needs c ∉ {0, 1}");
  const Eigen::Index n = x_star.rows();
  const Eigen::MatrixXd proj = x_star * gram_inverse(x_star) * x_star.transpose();
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
  const Eigen::MatrixXd lhs = (c * id - proj) * (id / c + proj / (c * (c - 1.0)));
  return max_abs(lhs - id);
}

// ---------------------------------------------------------------------------

/// A table over `factors` whose N counts are spread as evenly as possible.
inline ContingencyTable spread_table(const std::vector<FactorSpec>& factors, std::int64_t n) {
  const auto cells = static_cast<std::int64_t>(detail::level_product(factors));
  std::vector<std::int64_t> counts(static_cast<std::size_t>(cells), n / cells);
  for (std::int64_t i = 0; i < n % cells; ++i) counts[static_cast<std::size_t>(i)] += 1;
  return ContingencyTable(factors, std::move(counts));
}

struct ImpliedPriorReport {
  std::string model;
  std::vector<FactorSpec> dims;
  std::string outcome;
  double n = 0, g = 0;
  Eigen::Index n_beta = 0, n_lambda = 0;
  bool x_ll_minus_lt_square = false;
  double mean_max_abs = 0;     // implied β mean (must be 0)
  double rel_direct = 0;       // g·TΣ_λTᵀ vs target
  double rel_rearranged = 0;   // g(n_ll/N)·H from X_rll vs target
  double rel_analytic = 0;     // g(n_ll/N)·2(X*ᵀX*)⁻¹ vs target
  double rel_partitioned = 0;  // partitioned-inverse chain vs target
  double max_abs_diff = 0;
  double max_rel_diff = 0;
  bool pass = false;
  std::string error;
};

inline constexpr double kImpliedPriorTolerance = 1e-10;

/// Compares the implied β covariance against the logistic g-prior scaled by g
/// along every evaluation path. Failures are reported, not thrown.
inline ImpliedPriorReport verify_implied_prior(const ModelFormula& loglinear, const std::vector<FactorSpec>& factors,
                                      const std::string& outcome, std::int64_t n, double g) {
  ImpliedPriorReport rep;
  rep.dims = factors;
  rep.outcome = outcome;
  rep.n = static_cast<double>(n);
  rep.g = g;
  try {
    rep.model = formula_string(loglinear, detail::names_of(factors));
    const auto map = build_map(loglinear, outcome, factors);
    rep.n_beta = map.n_beta();
    rep.n_lambda = map.n_lambda();
    const auto table = spread_table(factors, n);
    const auto lambda_prior = gprior_loglinear(map.x_ll, table);
    std::vector<std::string> kept;
    for (const auto& f : map.covariates) kept.push_back(f.name);
    const auto data = collapse_to_binomial(table, outcome, kept);
    const Eigen::MatrixXd target = g * gprior_logistic(map.x_lt, data).sigma;

    const auto implied = implied_beta_prior(lambda_prior, map, g);
    rep.mean_max_abs = max_abs(implied.mean);
    const Eigen::MatrixXd direct = g * implied.sigma;

    const auto sys = rearrange(map.x_ll, map);
    rep.x_ll_minus_lt_square = sys.square;
    const double scale = g * static_cast<double>(map.n_ll()) / static_cast<double>(n);
    const Eigen::MatrixXd rearranged = scale * h_direct(sys, map.n_beta());
    const Eigen::MatrixXd analytic = scale * h_analytic(map);
    const Eigen::MatrixXd partitioned = scale * h_partitioned(sys);
    const Eigen::MatrixXd projected = scale * h_partitioned_projected(sys);

    rep.rel_direct = relative_difference(direct, target);
    rep.rel_rearranged = relative_difference(rearranged, target);
    rep.rel_analytic = relative_difference(analytic, target);
    rep.rel_partitioned = std::max(relative_difference(partitioned, target), relative_difference(projected, target));
    rep.max_rel_diff = std::max({rep.rel_direct, rep.rel_rearranged, rep.rel_analytic, rep.rel_partitioned});
    rep.max_abs_diff = std::max({max_abs(direct - target), max_abs(rearranged - target), max_abs(analytic - target),
                                 max_abs(partitioned - target), max_abs(projected - target)});
    rep.pass = rep.max_rel_diff < kImpliedPriorTolerance && rep.mean_max_abs == 0.0;
  } catch (const Error& e) {
    rep.error = e.what();
    rep.pass = false;
  }
  return rep;
}

inline nlohmann::json to_json(const ImpliedPriorReport& r) {
  nlohmann::json dims = nlohmann::json::array();
  for (const auto& f : r.dims) dims.push_back({{"name", f.name}, {"levels", f.levels}});
  nlohmann::json j{{"model", r.model},
                   {"dims", dims},
                   {"outcome", r.outcome},
                   {"N", r.n},
                   {"g", r.g},
                   {"n_beta", r.n_beta},
                   {"n_lambda", r.n_lambda},
                   {"x_ll_minus_lt_square", r.x_ll_minus_lt_square},
                   {"max_abs_diff", r.max_abs_diff},
                   {"max_rel_diff", r.max_rel_diff},
                   {"paths",
                    {{"direct", r.rel_direct},
                     {"rearranged", r.rel_rearranged},
                     {"analytic", r.rel_analytic},
                     {"partitioned", r.rel_partitioned}}},
                   {"pass", r.pass}};
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

struct SweepInstance {
  std::vector<FactorSpec> factors;
  std::string outcome;
  ModelFormula model;
};

/// Every hierarchical model containing the outcome, on every table with
/// 2..max_factors factors (outcome binary, at each position; other factors
/// with 2..max_levels levels).
inline std::vector<SweepInstance> implied_prior_sweep(std::size_t max_factors = 4, int max_levels = 3) {
  static const char* kNames[] = {"A", "B", "C", "D", "E", "F", "G"};
  std::vector<SweepInstance> out;
  for (std::size_t p = 2; p <= max_factors; ++p) {
    std::vector<std::string> names(kNames, kNames + p);
    const auto models = enumerate_hierarchical(names);
    for (std::size_t ypos = 0; ypos < p; ++ypos) {
      const std::size_t others = p - 1;
      const auto configs = static_cast<std::size_t>(std::pow(max_levels - 1, static_cast<double>(others)));
      for (std::size_t cfg = 0; cfg < configs; ++cfg) {
        std::vector<FactorSpec> factors;
        std::size_t rest = cfg;
        for (std::size_t k = 0; k < p; ++k) {
          if (k == ypos) {
            factors.push_back({names[k], 2});
          } else {
            factors.push_back({names[k], 2 + static_cast<int>(rest % static_cast<std::size_t>(max_levels - 1))});
            rest /= static_cast<std::size_t>(max_levels - 1);
          }
        }
        for (const auto& m : models)
          if (m.contains(Term{names[ypos]})) out.push_back({factors, names[ypos], m});
      }
    }
  }
  return out;
}

}  // namespace gcorr
