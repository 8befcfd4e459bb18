#pragma once

// Hierarchical/graphical model formulas, corner-point design matrices and the
// structural map between log-linear and logistic formulas.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "gcorr/error.hpp"
#include "gcorr/tables.hpp"

namespace gcorr {

/// A main effect or interaction: a set of factor names kept sorted by name.
/// The empty term is the intercept.
class Term {
 public:
  Term() = default;
  Term(std::initializer_list<std::string> names) : Term(std::vector<std::string>(names)) {}
  explicit Term(std::vector<std::string> names) : factors_(std::move(names)) {
    std::sort(factors_.begin(), factors_.end());
    factors_.erase(std::unique(factors_.begin(), factors_.end()), factors_.end());
  }

  const std::vector<std::string>& factors() const { return factors_; }
  std::size_t size() const { return factors_.size(); }
  bool is_intercept() const { return factors_.empty(); }
  bool contains(const std::string& f) const { return std::binary_search(factors_.begin(), factors_.end(), f); }

  bool subset_of(const Term& other) const {
    return std::includes(other.factors_.begin(), other.factors_.end(), factors_.begin(), factors_.end());
  }

  Term with(const std::string& f) const {
    auto v = factors_;
    v.push_back(f);
    return Term(std::move(v));
  }

  Term without(const std::string& f) const {
    auto v = factors_;
    v.erase(std::remove(v.begin(), v.end(), f), v.end());
    return Term(std::move(v));
  }

  /// All subsets, including the empty term and the term itself.
  std::vector<Term> subsets() const {
    std::vector<Term> out;
    const std::size_t n = factors_.size();
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
      std::vector<std::string> s;
      for (std::size_t i = 0; i < n; ++i)
        if (mask & (1u << i)) s.push_back(factors_[i]);
      out.emplace_back(std::move(s));
    }
    return out;
  }

  auto operator<=>(const Term&) const = default;
  bool operator==(const Term&) const = default;

 private:
  std::vector<std::string> factors_;
};

enum class Role { LogLinear, Logistic };

inline const char* to_string(Role r) { return r == Role::LogLinear ? "loglinear" : "logistic"; }

struct ModelFormula {
  Role role = Role::LogLinear;
  std::string outcome;  // logistic only
  std::set<Term> terms{Term{}};

  bool contains(const Term& t) const { return terms.count(t) > 0; }

  std::set<std::string> factors() const {
    std::set<std::string> out;
    for (const auto& t : terms) out.insert(t.factors().begin(), t.factors().end());
    return out;
  }

  bool is_hierarchical() const {
    if (!contains(Term{})) return false;
    for (const auto& t : terms)
      for (const auto& s : t.subsets())
        if (!contains(s)) return false;
    return true;
  }

  /// Terms not contained in any other term.
  std::vector<Term> generators() const {
    std::vector<Term> out;
    for (const auto& t : terms) {
      if (t.is_intercept() && terms.size() > 1) continue;
      bool maximal = true;
      for (const auto& u : terms)
        if (u != t && t.subset_of(u)) {
          maximal = false;
          break;
        }
      if (maximal) out.push_back(t);
    }
    return out;
  }

  friend bool operator==(const ModelFormula& a, const ModelFormula& b) {
    return a.role == b.role && a.outcome == b.outcome && a.terms == b.terms;
  }
};

/// Downward closure of a generator set; always contains the intercept.
inline ModelFormula close_hierarchical(const std::vector<Term>& generators, Role role = Role::LogLinear,
                                       std::string outcome = {}) {
  ModelFormula m;
  m.role = role;
  m.outcome = std::move(outcome);
  for (const auto& g : generators)
    for (auto& s : g.subsets()) m.terms.insert(std::move(s));
  if (role == Role::Logistic)
    for (const auto& t : m.terms)
      if (t.contains(m.outcome))
        throw Error(ErrorCode::InvalidArgument, "logistic formula contains its outcome '" + m.outcome + "'");
  return m;
}

// ---------------------------------------------------------------------------
// Naming and ordering relative to a factor order (a table's factor list).

namespace detail {

inline std::vector<std::size_t> positions(const Term& t, const std::vector<std::string>& order) {
  std::vector<std::size_t> pos;
  for (const auto& f : t.factors()) {
    auto it = std::find(order.begin(), order.end(), f);
    if (it == order.end()) throw Error(ErrorCode::UnknownFactor, "term refers to unknown factor '" + f + "'");
    pos.push_back(static_cast<std::size_t>(it - order.begin()));
  }
  std::sort(pos.begin(), pos.end());
  return pos;
}

inline std::vector<std::string> names_of(const std::vector<FactorSpec>& factors) {
  std::vector<std::string> out;
  for (const auto& f : factors) out.push_back(f.name);
  return out;
}

inline bool all_single_char(const std::vector<std::string>& names) {
  return std::all_of(names.begin(), names.end(), [](const std::string& s) { return s.size() == 1; });
}

}  // namespace detail

/// Terms ordered by (size, factor positions lexicographic).
inline std::vector<Term> ordered_terms(const ModelFormula& m, const std::vector<std::string>& order) {
  std::vector<std::pair<std::pair<std::size_t, std::vector<std::size_t>>, Term>> keyed;
  for (const auto& t : m.terms) keyed.push_back({{t.size(), detail::positions(t, order)}, t});
  std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<Term> out;
  for (auto& k : keyed) out.push_back(std::move(k.second));
  return out;
}

/// "YAB" for single-letter factors, "smoke:age" otherwise; "Intercept" for {}.
inline std::string term_name(const Term& t, const std::vector<std::string>& order) {
  if (t.is_intercept()) return "Intercept";
  const bool compact = detail::all_single_char(order);
  std::string out;
  for (auto p : detail::positions(t, order)) {
    if (!compact && !out.empty()) out += ':';
    out += order[p];
  }
  return out;
}

/// Compact formula string: generators joined by '+', e.g. "YAB+YCD+YE".
inline std::string formula_string(const ModelFormula& m, const std::vector<std::string>& order) {
  auto gens = m.generators();
  ModelFormula g;
  g.terms.insert(gens.begin(), gens.end());
  std::string out;
  for (const auto& t : ordered_terms(g, order)) {
    if (t.is_intercept() && !(gens.size() == 1 && gens[0].is_intercept())) continue;
    if (!out.empty()) out += '+';
    out += t.is_intercept() ? "1" : term_name(t, order);
  }
  return out;
}

/// Parses "YAB+YCD+YE" (single-letter factors) or "A:B+C" against a factor
/// list. "1" or an empty string is the intercept-only model. Closure applied.
inline ModelFormula parse_formula(const std::string& text, const std::vector<std::string>& factor_names,
                                  Role role = Role::LogLinear, std::string outcome = {}) {
  std::vector<Term> gens;
  const bool compact = detail::all_single_char(factor_names);
  for (const auto& raw : detail::split(text, '+')) {
    const auto tok = detail::trim(raw);
    if (tok.empty() || tok == "1") continue;
    std::vector<std::string> parts;
    if (tok.find(':') != std::string::npos)
      parts = detail::split(tok, ':');
    else if (compact)
      for (char c : tok) parts.emplace_back(1, c);
    else
      parts = {tok};
    for (const auto& p : parts)
      if (std::find(factor_names.begin(), factor_names.end(), p) == factor_names.end())
        throw Error(ErrorCode::UnknownFactor, "formula term '" + tok + "' refers to unknown factor '" + p + "'");
    gens.emplace_back(parts);
  }
  return close_hierarchical(gens, role, std::move(outcome));
}

/// JSON model spec: {"role":"loglinear"|"logistic","outcome":"Y","generators":[["Y","A"],...]}
inline ModelFormula model_from_json(const nlohmann::json& j) {
  try {
    const auto role_s = j.value("role", std::string("loglinear"));
    Role role;
    if (role_s == "loglinear")
      role = Role::LogLinear;
    else if (role_s == "logistic")
      role = Role::Logistic;
    else
      throw Error(ErrorCode::MalformedInput, "unknown role '" + role_s + "'");
    std::vector<Term> gens;
    for (const auto& g : j.at("generators")) gens.emplace_back(g.get<std::vector<std::string>>());
    return close_hierarchical(gens, role, j.value("outcome", std::string()));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedInput, std::string("model JSON: ") + e.what());
  }
}

inline nlohmann::json to_json(const ModelFormula& m) {
  nlohmann::json j;
  j["role"] = to_string(m.role);
  if (m.role == Role::Logistic) j["outcome"] = m.outcome;
  j["generators"] = nlohmann::json::array();
  for (const auto& g : m.generators())
    if (!g.is_intercept()) j["generators"].push_back(g.factors());
  return j;
}

// ---------------------------------------------------------------------------
// Design matrices under corner-point coding.

struct ColumnLabel {
  Term term;
  LevelTuple levels;  // one entry per term factor, in factor-order positions; all >= 1
  std::string name;
};

struct DesignMatrix {
  Eigen::MatrixXd matrix;
  std::vector<ColumnLabel> labels;
  std::vector<FactorSpec> row_factors;  // factors indexing the rows (last fastest)

  Eigen::Index rows() const { return matrix.rows(); }
  Eigen::Index cols() const { return matrix.cols(); }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& l : labels) out.push_back(l.name);
    return out;
  }

  /// Column index of (term, levels), or -1.
  Eigen::Index find(const Term& t, const LevelTuple& levels) const {
    for (std::size_t j = 0; j < labels.size(); ++j)
      if (labels[j].term == t && labels[j].levels == levels) return static_cast<Eigen::Index>(j);
    return -1;
  }
};

/// Σ over terms of ∏(levels − 1).
inline std::size_t parameter_count(const ModelFormula& m, const std::vector<FactorSpec>& factors) {
  const auto order = detail::names_of(factors);
  std::size_t n = 0;
  for (const auto& t : m.terms) {
    std::size_t k = 1;
    for (auto p : detail::positions(t, order)) k *= static_cast<std::size_t>(factors[p].levels - 1);
    n += k;
  }
  return n;
}

inline DesignMatrix design_matrix(const std::vector<FactorSpec>& factors, const ModelFormula& m) {
  if (!m.is_hierarchical()) throw Error(ErrorCode::NonHierarchical, "design matrices need a hierarchical formula");
  const auto order = detail::names_of(factors);
  const auto terms = ordered_terms(m, order);  // throws UnknownFactor

  DesignMatrix dm;
  dm.row_factors = factors;
  const std::size_t n_rows = detail::level_product(factors);
  const bool show_levels = [&] {
    return std::any_of(factors.begin(), factors.end(), [](const FactorSpec& f) { return f.levels > 2; });
  }();

  // Columns.
  std::vector<std::vector<std::size_t>> col_positions;
  for (const auto& t : terms) {
    const auto pos = detail::positions(t, order);
    std::vector<FactorSpec> sub;
    for (auto p : pos) sub.push_back({factors[p].name, factors[p].levels - 1});
    const std::size_t n_levels = pos.empty() ? 1 : detail::level_product(sub);
    for (std::size_t i = 0; i < n_levels; ++i) {
      ColumnLabel lab;
      lab.term = t;
      lab.levels = pos.empty() ? LevelTuple{} : detail::unravel(i, sub);
      for (auto& l : lab.levels) l += 1;
      lab.name = term_name(t, order);
      if (show_levels && !pos.empty()) {
        lab.name += '(';
        for (std::size_t k = 0; k < lab.levels.size(); ++k)
          lab.name += (k ? "," : "") + std::to_string(lab.levels[k]);
        lab.name += ')';
      }
      dm.labels.push_back(std::move(lab));
      col_positions.push_back(pos);
    }
  }

  dm.matrix = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n_rows), static_cast<Eigen::Index>(dm.labels.size()));
  for (std::size_t r = 0; r < n_rows; ++r) {
    const auto levels = detail::unravel(r, factors);
    for (std::size_t c = 0; c < dm.labels.size(); ++c) {
      const auto& pos = col_positions[c];
      bool hit = true;
      for (std::size_t k = 0; k < pos.size() && hit; ++k) hit = levels[pos[k]] == dm.labels[c].levels[k];
      if (hit) dm.matrix(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = 1.0;
    }
  }
  return dm;
}

inline DesignMatrix design_matrix(const ContingencyTable& table, const ModelFormula& m) {
  return design_matrix(table.factors(), m);
}

inline DesignMatrix design_matrix(const BinomialData& data, const ModelFormula& m) {
  if (m.role == Role::Logistic && !m.outcome.empty() && m.outcome != data.outcome)
    throw Error(ErrorCode::InvalidArgument, "formula outcome '" + m.outcome + "' differs from data outcome '" +
                                                data.outcome + "'");
  return design_matrix(data.covariates, m);
}

// ---------------------------------------------------------------------------
// Log-linear <-> logistic structure.

struct LogisticCorrespondence {
  ModelFormula logistic;
  /// logistic term -> log-linear term (= logistic term ∪ {outcome})
  std::map<Term, Term> term_map;
};

namespace detail {

inline const FactorSpec& find_factor(const std::vector<FactorSpec>& factors, const std::string& name) {
  for (const auto& f : factors)
    if (f.name == name) return f;
  throw Error(ErrorCode::UnknownFactor, "no factor named '" + name + "'");
}

inline void require_binary(const std::vector<FactorSpec>& factors, const std::string& outcome) {
  const auto& f = find_factor(factors, outcome);
  if (f.levels != 2)
    throw Error(ErrorCode::OutcomeNotBinary, "outcome '" + outcome + "' has " + std::to_string(f.levels) + " levels");
}

}  // namespace detail

inline LogisticCorrespondence loglinear_to_logistic(const ModelFormula& loglinear, const std::string& outcome,
                                                    const std::vector<FactorSpec>& factors) {
  detail::require_binary(factors, outcome);
  if (!loglinear.contains(Term{outcome}))
    throw Error(ErrorCode::InvalidArgument, "outcome '" + outcome + "' is absent from the log-linear formula");
  LogisticCorrespondence out;
  out.logistic.role = Role::Logistic;
  out.logistic.outcome = outcome;
  out.logistic.terms.clear();
  for (const auto& t : loglinear.terms)
    if (t.contains(outcome)) {
      auto lt = t.without(outcome);
      out.term_map[lt] = t;
      out.logistic.terms.insert(std::move(lt));
    }
  return out;
}

/// Full interaction among every non-outcome factor plus T ∪ {Y} for each
/// logistic term T: the largest log-linear model implying `logistic`.
inline ModelFormula logistic_to_loglinear_equivalent(const ModelFormula& logistic, const std::string& outcome,
                                                     const std::vector<FactorSpec>& factors) {
  detail::require_binary(factors, outcome);
  for (const auto& t : logistic.terms)
    if (t.contains(outcome))
      throw Error(ErrorCode::InvalidArgument, "outcome '" + outcome + "' appears among the covariates");
  std::vector<std::string> covariates;
  for (const auto& f : factors)
    if (f.name != outcome) covariates.push_back(f.name);
  for (const auto& name : logistic.factors()) detail::find_factor(factors, name);

  std::vector<Term> gens{Term(covariates), Term{outcome}};
  for (const auto& t : logistic.terms) gens.push_back(t.with(outcome));
  return close_hierarchical(gens);
}

/// Two distinct hierarchical log-linear models implying the same logistic
/// model: the deviance-equivalent one and the same model without the full
/// covariate interaction. Nullopt when the logistic model is saturated in the
/// covariates, whose log-linear preimage is unique.
inline std::optional<std::pair<ModelFormula, ModelFormula>> preimage_witness(const ModelFormula& logistic,
                                                                             const std::string& outcome,
                                                                             const std::vector<FactorSpec>& factors) {
  auto full = logistic_to_loglinear_equivalent(logistic, outcome, factors);
  std::vector<std::string> covariates;
  for (const auto& f : factors)
    if (f.name != outcome) covariates.push_back(f.name);
  const Term top(covariates);
  if (top.is_intercept() || logistic.contains(top)) return std::nullopt;
  auto reduced = full;
  reduced.terms.erase(top);
  return std::make_pair(std::move(full), std::move(reduced));
}

// ---------------------------------------------------------------------------
// Model spaces.

/// Every hierarchical model on up to four factors (downward-closed term sets
/// containing the intercept), by brute force over term subsets.
inline std::vector<ModelFormula> enumerate_hierarchical(const std::vector<std::string>& factors) {
  if (factors.size() > 4) throw Error(ErrorCode::TooManyFactors, "hierarchical enumeration is capped at 4 factors");
  const auto all = Term(factors).subsets();
  std::vector<Term> nonempty;
  for (const auto& t : all)
    if (!t.is_intercept()) nonempty.push_back(t);
  std::vector<ModelFormula> out;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << nonempty.size()); ++mask) {
    ModelFormula m;
    for (std::size_t i = 0; i < nonempty.size(); ++i)
      if (mask & (std::uint64_t{1} << i)) m.terms.insert(nonempty[i]);
    if (m.is_hierarchical()) out.push_back(std::move(m));
  }
  return out;
}

/// Undirected graphs on a vertex set, each mapped to the hierarchical model
/// generated by its cliques. Vertex = factor; edges indexed (i<j) row-wise.
class GraphicalSpace {
 public:
  static constexpr std::size_t kMaxVertices = 7;

  /// Log-linear space over `factors`, or logistic space over the covariates
  /// (factors minus `outcome`) when role is Logistic.
  GraphicalSpace(std::vector<std::string> factors, Role role = Role::LogLinear, std::string outcome = {})
      : role_(role), outcome_(std::move(outcome)) {
    for (auto& f : factors)
      if (role_ == Role::LogLinear || f != outcome_) vertices_.push_back(std::move(f));
    if (role_ == Role::Logistic && vertices_.size() == factors.size())
      throw Error(ErrorCode::UnknownFactor, "outcome '" + outcome_ + "' is not among the factors");
    if (vertices_.size() > kMaxVertices)
      throw Error(ErrorCode::TooManyFactors, std::to_string(vertices_.size()) + " vertices exceed the cap of " +
                                                 std::to_string(kMaxVertices));
    for (std::size_t i = 0; i < vertices_.size(); ++i)
      for (std::size_t j = i + 1; j < vertices_.size(); ++j) edges_.emplace_back(i, j);
  }

  std::size_t num_edges() const { return edges_.size(); }
  std::uint64_t num_models() const { return std::uint64_t{1} << edges_.size(); }
  const std::vector<std::string>& vertices() const { return vertices_; }
  const std::vector<std::pair<std::size_t, std::size_t>>& edges() const { return edges_; }
  Role role() const { return role_; }
  const std::string& outcome() const { return outcome_; }

  bool adjacent(std::uint64_t mask, std::size_t a, std::size_t b) const {
    if (a > b) std::swap(a, b);
    for (std::size_t e = 0; e < edges_.size(); ++e)
      if (edges_[e].first == a && edges_[e].second == b) return (mask >> e) & 1u;
    return false;
  }

  /// Every complete vertex subset is a term; this is the downward closure of
  /// the maximal cliques.
  ModelFormula model(std::uint64_t mask) const {
    ModelFormula m;
    m.role = role_;
    m.outcome = role_ == Role::Logistic ? outcome_ : std::string();
    const std::size_t n = vertices_.size();
    for (std::uint32_t s = 1; s < (1u << n); ++s) {
      bool complete = true;
      std::vector<std::string> names;
      for (std::size_t i = 0; i < n && complete; ++i) {
        if (!(s & (1u << i))) continue;
        names.push_back(vertices_[i]);
        for (std::size_t j = i + 1; j < n && complete; ++j)
          if ((s & (1u << j)) && !adjacent(mask, i, j)) complete = false;
      }
      if (complete) m.terms.insert(Term(names));
    }
    return m;
  }

  /// Edge mask of a graphical formula, or nullopt if it is not graphical in
  /// this space.
  std::optional<std::uint64_t> mask_of(const ModelFormula& m) const {
    std::uint64_t mask = 0;
    for (std::size_t e = 0; e < edges_.size(); ++e)
      if (m.contains(Term{vertices_[edges_[e].first], vertices_[edges_[e].second]})) mask |= std::uint64_t{1} << e;
    if (model(mask).terms != m.terms) return std::nullopt;
    return mask;
  }

  void for_each(const std::function<void(std::uint64_t, const ModelFormula&)>& fn) const {
    for (std::uint64_t mask = 0; mask < num_models(); ++mask) fn(mask, model(mask));
  }

 private:
  Role role_;
  std::string outcome_;
  std::vector<std::string> vertices_;
  std::vector<std::pair<std::size_t, std::size_t>> edges_;
};

inline std::vector<ModelFormula> enumerate_graphical(const std::vector<std::string>& factors,
                                                     Role role = Role::LogLinear, const std::string& outcome = {}) {
  GraphicalSpace space(factors, role, outcome);
  std::vector<ModelFormula> out;
  out.reserve(space.num_models());
  space.for_each([&](std::uint64_t, const ModelFormula& m) { out.push_back(m); });
  return out;
}

}  // namespace gcorr
