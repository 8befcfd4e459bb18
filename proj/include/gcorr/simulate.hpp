#pragma once

// Multinomial simulation of a contingency table from a log-linear model.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gcorr/error.hpp"
#include "gcorr/models.hpp"
#include "gcorr/tables.hpp"

namespace gcorr {

/// Cell probabilities softmax(X λ).
inline Eigen::VectorXd cell_probabilities(const std::vector<FactorSpec>& factors, const ModelFormula& model,
                                          const Eigen::VectorXd& lambda) {
  const auto x = design_matrix(factors, model);
  if (x.matrix.cols() != lambda.size())
    throw Error(ErrorCode::DimensionMismatch, "lambda has " + std::to_string(lambda.size()) +
                                                  " entries; the design has " + std::to_string(x.matrix.cols()));
  Eigen::VectorXd eta = x.matrix * lambda;
  const double mx = eta.maxCoeff();
  Eigen::VectorXd p = (eta.array() - mx).exp().matrix();
  return p / p.sum();
}

/// Draws N subjects; each cell count is a conditional binomial so that the
/// total is exactly N.
inline ContingencyTable simulate_table(const std::vector<FactorSpec>& factors, const ModelFormula& model,
                                       const Eigen::VectorXd& lambda, std::int64_t n, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "N must be at least 1");
  const Eigen::VectorXd p = cell_probabilities(factors, model, lambda);
  std::mt19937_64 rng(seed);
  std::vector<std::int64_t> counts(static_cast<std::size_t>(p.size()), 0);
  std::int64_t left = n;
  double mass_left = 1.0;
  for (Eigen::Index i = 0; i + 1 < p.size() && left > 0; ++i) {
    const double q = mass_left > 0 ? std::clamp(p(i) / mass_left, 0.0, 1.0) : 0.0;
    std::binomial_distribution<std::int64_t> draw(left, q);
    const std::int64_t k = draw(rng);
    counts[static_cast<std::size_t>(i)] = k;
    left -= k;
    mass_left -= p(i);
  }
  counts.back() += left;
  return ContingencyTable(factors, std::move(counts));
}

/// The six-factor example: binary Y, A, B, C, D, E and the log-linear model
/// YAB + YCD + YE.
struct SixFactorExample {
  std::vector<FactorSpec> factors;
  ModelFormula model;
  Eigen::VectorXd lambda;  // in design-column order
  std::vector<std::string> labels;
};

inline SixFactorExample six_factor_example() {
  SixFactorExample ex;
  for (const char* f : {"Y", "A", "B", "C", "D", "E"}) ex.factors.push_back({f, 2});
  ex.model = parse_formula("YAB+YCD+YE", detail::names_of(ex.factors));
  const auto x = design_matrix(ex.factors, ex.model);
  ex.labels = x.names();
  const std::vector<std::pair<std::string, double>> values = {
      {"Intercept", 0.0}, {"Y", 0.5},   {"A", 0.3},    {"B", 0.3},    {"C", 0.3},    {"D", 0.3},
      {"E", 0.3},         {"YA", 1.2},  {"YB", -1.2},  {"YC", 1.2},   {"YD", -1.2},  {"YE", -1.2},
      {"AB", 1.2},        {"CD", 1.2},  {"YAB", -1.1}, {"YCD", -1.1},
  };
  ex.lambda = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(ex.labels.size()));
  for (const auto& [label, v] : values) {
    std::size_t j = 0;
    while (j < ex.labels.size() && ex.labels[j] != label) ++j;
    if (j == ex.labels.size()) throw Error(ErrorCode::InvalidArgument, "no design column " + label);
    ex.lambda(static_cast<Eigen::Index>(j)) = v;
  }
  return ex;
}

}  // namespace gcorr
