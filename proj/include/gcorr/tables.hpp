#pragma once

// Contingency tables, their binomial collapse, and CSV/JSON I/O.
//
// Cells are stored in lexicographic order of their level tuples with the
// LAST factor varying fastest. Level 0 of every factor is the reference
// level for corner-point coding.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gcorr/error.hpp"

namespace gcorr {

struct FactorSpec {
  std::string name;
  int levels = 2;

  friend bool operator==(const FactorSpec&, const FactorSpec&) = default;
};

using LevelTuple = std::vector<int>;

namespace detail {

inline void validate_factors(const std::vector<FactorSpec>& factors) {
  for (std::size_t i = 0; i < factors.size(); ++i) {
    if (factors[i].name.empty())
      throw Error(ErrorCode::InvalidFactor, "factor name must be non-empty");
    if (factors[i].levels < 2)
      throw Error(ErrorCode::InvalidFactor,
                  "factor '" + factors[i].name + "' needs at least 2 levels");
    for (std::size_t j = 0; j < i; ++j)
      if (factors[j].name == factors[i].name)
        throw Error(ErrorCode::InvalidFactor, "duplicate factor name '" + factors[i].name + "'");
  }
}

inline std::size_t level_product(const std::vector<FactorSpec>& factors) {
  std::size_t n = 1;
  for (const auto& f : factors) n *= static_cast<std::size_t>(f.levels);
  return n;
}

// Row-major (last fastest) conversion between a flat index and a level tuple.
inline LevelTuple unravel(std::size_t index, const std::vector<FactorSpec>& factors) {
  LevelTuple levels(factors.size());
  for (std::size_t k = factors.size(); k-- > 0;) {
    const auto L = static_cast<std::size_t>(factors[k].levels);
    levels[k] = static_cast<int>(index % L);
    index /= L;
  }
  return levels;
}

inline std::size_t ravel(const LevelTuple& levels, const std::vector<FactorSpec>& factors) {
  std::size_t index = 0;
  for (std::size_t k = 0; k < factors.size(); ++k)
    index = index * static_cast<std::size_t>(factors[k].levels) + static_cast<std::size_t>(levels[k]);
  return index;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace detail

class ContingencyTable {
 public:
  ContingencyTable() = default;

  ContingencyTable(std::vector<FactorSpec> factors, std::vector<std::int64_t> counts)
      : factors_(std::move(factors)), counts_(std::move(counts)) {
    detail::validate_factors(factors_);
    if (counts_.size() != detail::level_product(factors_))
      throw Error(ErrorCode::DimensionMismatch,
                  "expected " + std::to_string(detail::level_product(factors_)) + " counts, got " +
                      std::to_string(counts_.size()));
    for (auto c : counts_) {
      if (c < 0) throw Error(ErrorCode::NegativeCount, "cell counts must be non-negative");
      total_ += c;
    }
  }

  /// All-zero table over the given factors.
  static ContingencyTable zeros(std::vector<FactorSpec> factors) {
    const auto n = detail::level_product(factors);
    return ContingencyTable(std::move(factors), std::vector<std::int64_t>(n, 0));
  }

  const std::vector<FactorSpec>& factors() const { return factors_; }
  const std::vector<std::int64_t>& counts() const { return counts_; }
  std::int64_t total() const { return total_; }
  std::size_t num_cells() const { return counts_.size(); }
  std::size_t num_factors() const { return factors_.size(); }
  double mean_count() const { return static_cast<double>(total_) / static_cast<double>(num_cells()); }

  LevelTuple cell_levels(std::size_t index) const { return detail::unravel(index, factors_); }
  std::size_t cell_index(const LevelTuple& levels) const { return detail::ravel(levels, factors_); }
  std::int64_t count(const LevelTuple& levels) const { return counts_[cell_index(levels)]; }

  /// Position of a factor, or throws UnknownFactor.
  std::size_t factor_index(const std::string& name) const {
    for (std::size_t i = 0; i < factors_.size(); ++i)
      if (factors_[i].name == name) return i;
    throw Error(ErrorCode::UnknownFactor, "no factor named '" + name + "'");
  }

  bool has_factor(const std::string& name) const {
    return std::any_of(factors_.begin(), factors_.end(),
                       [&](const FactorSpec& f) { return f.name == name; });
  }

  friend bool operator==(const ContingencyTable& a, const ContingencyTable& b) {
    return a.factors_ == b.factors_ && a.counts_ == b.counts_;
  }

 private:
  std::vector<FactorSpec> factors_;
  std::vector<std::int64_t> counts_;
  std::int64_t total_ = 0;
};

/// Grouped binomial data: one row per level combination of the retained
/// covariates (same last-fastest order as tables).
struct BinomialRow {
  std::int64_t trials = 0;
  std::int64_t successes = 0;
};

struct BinomialData {
  std::string outcome;
  std::vector<FactorSpec> covariates;
  std::vector<BinomialRow> rows;

  std::size_t num_rows() const { return rows.size(); }

  std::int64_t total_trials() const {
    std::int64_t n = 0;
    for (const auto& r : rows) n += r.trials;
    return n;
  }

  LevelTuple row_levels(std::size_t i) const { return detail::unravel(i, covariates); }
};

/// Collapse a table into binomial form for a binary outcome. Retained
/// covariates are reordered to follow the table's factor order.
inline BinomialData collapse_to_binomial(const ContingencyTable& table, const std::string& outcome,
                                         const std::vector<std::string>& retained) {
  if (!table.has_factor(outcome))
    throw Error(ErrorCode::UnknownFactor, "outcome '" + outcome + "' is not a factor of the table");
  const auto y = table.factor_index(outcome);
  if (table.factors()[y].levels != 2)
    throw Error(ErrorCode::OutcomeNotBinary, "outcome '" + outcome + "' has " +
                                                 std::to_string(table.factors()[y].levels) + " levels");

  std::vector<std::size_t> keep;
  for (const auto& name : retained) {
    if (name == outcome)
      throw Error(ErrorCode::InvalidArgument, "retained covariates contain the outcome '" + outcome + "'");
    keep.push_back(table.factor_index(name));
  }
  std::sort(keep.begin(), keep.end());
  if (std::adjacent_find(keep.begin(), keep.end()) != keep.end())
    throw Error(ErrorCode::InvalidArgument, "retained covariates listed twice");

  BinomialData out;
  out.outcome = outcome;
  for (auto k : keep) out.covariates.push_back(table.factors()[k]);
  out.rows.assign(detail::level_product(out.covariates), BinomialRow{});

  LevelTuple sub(keep.size());
  for (std::size_t c = 0; c < table.num_cells(); ++c) {
    const auto levels = table.cell_levels(c);
    for (std::size_t j = 0; j < keep.size(); ++j) sub[j] = levels[keep[j]];
    auto& row = out.rows[detail::ravel(sub, out.covariates)];
    row.trials += table.counts()[c];
    if (levels[y] == 1) row.successes += table.counts()[c];
  }
  return out;
}

/// Sum a table over every factor not listed in `keep` (kept factors retain
/// table order).
inline ContingencyTable marginalize(const ContingencyTable& table, const std::vector<std::string>& keep) {
  std::vector<std::size_t> idx;
  for (const auto& n : keep) idx.push_back(table.factor_index(n));
  std::sort(idx.begin(), idx.end());
  std::vector<FactorSpec> factors;
  for (auto k : idx) factors.push_back(table.factors()[k]);
  std::vector<std::int64_t> counts(detail::level_product(factors), 0);
  LevelTuple sub(idx.size());
  for (std::size_t c = 0; c < table.num_cells(); ++c) {
    const auto levels = table.cell_levels(c);
    for (std::size_t j = 0; j < idx.size(); ++j) sub[j] = levels[idx[j]];
    counts[detail::ravel(sub, factors)] += table.counts()[c];
  }
  return ContingencyTable(std::move(factors), std::move(counts));
}

struct TrialSummary {
  double min = 0, q25 = 0, median = 0, q75 = 0, max = 0;
};

/// Type-7 (linear interpolation) sample quantile of sorted data.
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) throw Error(ErrorCode::InvalidArgument, "quantile of empty data");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline TrialSummary summarize_trials(const BinomialData& data) {
  std::vector<double> t;
  t.reserve(data.rows.size());
  for (const auto& r : data.rows) t.push_back(static_cast<double>(r.trials));
  std::sort(t.begin(), t.end());
  return {t.front(), quantile_sorted(t, 0.25), quantile_sorted(t, 0.5), quantile_sorted(t, 0.75), t.back()};
}

// ---------------------------------------------------------------------------
// CSV: header "F1,F2,...,count"; a header cell may carry an explicit level
// count as "name:levels", otherwise levels = 1 + largest level seen.

inline ContingencyTable read_csv(std::istream& in) {
  std::string line;
  do {
    if (!std::getline(in, line)) throw Error(ErrorCode::MalformedInput, "empty CSV input");
  } while (detail::trim(line).empty());

  auto header = detail::split(detail::trim(line), ',');
  if (header.size() < 2 || header.back() != "count")
    throw Error(ErrorCode::UnknownColumn, "last CSV column must be 'count'");
  header.pop_back();

  std::vector<FactorSpec> factors;
  std::vector<int> declared;
  for (const auto& h : header) {
    const auto colon = h.find(':');
    FactorSpec f;
    int lv = 0;
    if (colon == std::string::npos) {
      f.name = h;
    } else {
      f.name = detail::trim(h.substr(0, colon));
      try {
        lv = std::stoi(h.substr(colon + 1));
      } catch (...) {
        throw Error(ErrorCode::MalformedInput, "bad level count in header cell '" + h + "'");
      }
    }
    if (f.name.empty() || f.name == "count")
      throw Error(ErrorCode::UnknownColumn, "unexpected header column '" + h + "'");
    factors.push_back(f);
    declared.push_back(lv);
  }

  std::vector<std::pair<LevelTuple, std::int64_t>> rows;
  std::vector<int> max_level(factors.size(), 0);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split(detail::trim(line), ',');
    if (cells.size() != factors.size() + 1)
      throw Error(ErrorCode::UnknownColumn, "line " + std::to_string(line_no) + " has " +
                                                std::to_string(cells.size()) + " columns, expected " +
                                                std::to_string(factors.size() + 1));
    LevelTuple levels(factors.size());
    for (std::size_t k = 0; k < factors.size(); ++k) {
      std::size_t pos = 0;
      long v = -1;
      try {
        v = std::stol(cells[k], &pos);
      } catch (...) {
        pos = 0;
      }
      if (pos != cells[k].size() || v < 0)
        throw Error(ErrorCode::MalformedInput, "line " + std::to_string(line_no) + ": level '" + cells[k] +
                                                   "' is not a non-negative integer");
      levels[k] = static_cast<int>(v);
      max_level[k] = std::max(max_level[k], levels[k]);
    }
    const auto& cs = cells.back();
    std::size_t pos = 0;
    double value = 0;
    try {
      value = std::stod(cs, &pos);
    } catch (...) {
      throw Error(ErrorCode::NonIntegerCount, "line " + std::to_string(line_no) + ": count '" + cs + "'");
    }
    if (pos != cs.size() || !std::isfinite(value) || std::floor(value) != value)
      throw Error(ErrorCode::NonIntegerCount, "line " + std::to_string(line_no) + ": count '" + cs + "'");
    if (value < 0)
      throw Error(ErrorCode::NegativeCount, "line " + std::to_string(line_no) + ": count " + cs);
    rows.emplace_back(std::move(levels), static_cast<std::int64_t>(value));
  }

  for (std::size_t k = 0; k < factors.size(); ++k) {
    if (declared[k] > 0) {
      if (max_level[k] >= declared[k])
        throw Error(ErrorCode::MalformedInput, "factor '" + factors[k].name + "' has level " +
                                                   std::to_string(max_level[k]) + " beyond declared " +
                                                   std::to_string(declared[k]) + " levels");
      factors[k].levels = declared[k];
    } else {
      factors[k].levels = max_level[k] + 1;
    }
  }
  detail::validate_factors(factors);

  std::vector<std::int64_t> counts(detail::level_product(factors), 0);
  std::vector<bool> seen(counts.size(), false);
  for (const auto& [levels, c] : rows) {
    const auto idx = detail::ravel(levels, factors);
    if (seen[idx]) {
      std::string cell;
      for (auto l : levels) cell += (cell.empty() ? "" : ",") + std::to_string(l);
      throw Error(ErrorCode::DuplicateCell, "cell (" + cell + ") listed twice");
    }
    seen[idx] = true;
    counts[idx] = c;
  }
  return ContingencyTable(std::move(factors), std::move(counts));
}

inline ContingencyTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MalformedInput, "cannot open '" + path + "'");
  return read_csv(in);
}

/// Writes every cell in table order; headers carry explicit level counts so
/// that all-zero top levels survive a round trip.
inline void write_csv(std::ostream& out, const ContingencyTable& table) {
  for (const auto& f : table.factors()) out << f.name << ':' << f.levels << ',';
  out << "count\n";
  for (std::size_t c = 0; c < table.num_cells(); ++c) {
    for (auto l : table.cell_levels(c)) out << l << ',';
    out << table.counts()[c] << '\n';
  }
}

inline nlohmann::json to_json(const ContingencyTable& table) {
  nlohmann::json j;
  j["factors"] = nlohmann::json::array();
  for (const auto& f : table.factors()) j["factors"].push_back({{"name", f.name}, {"levels", f.levels}});
  j["counts"] = table.counts();
  return j;
}

inline ContingencyTable table_from_json(const nlohmann::json& j) {
  try {
    std::vector<FactorSpec> factors;
    for (const auto& f : j.at("factors")) factors.push_back({f.at("name").get<std::string>(), f.at("levels").get<int>()});
    std::vector<std::int64_t> counts;
    for (const auto& c : j.at("counts")) {
      if (!c.is_number_integer()) throw Error(ErrorCode::NonIntegerCount, "count " + c.dump());
      counts.push_back(c.get<std::int64_t>());
    }
    return ContingencyTable(std::move(factors), std::move(counts));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedInput, std::string("table JSON: ") + e.what());
  }
}

/// Loads `.json` files as the JSON table format, anything else as CSV.
inline ContingencyTable load_table(const std::string& path) {
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::MalformedInput, "cannot open '" + path + "'");
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::MalformedInput, path + ": " + e.what());
    }
    return table_from_json(j);
  }
  return read_csv_file(path);
}

}  // namespace gcorr
