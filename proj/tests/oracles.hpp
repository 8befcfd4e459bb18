#pragma once

// Independent reference implementations used only by the tests. Nothing here
// calls into the library's linear algebra or model code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

inline Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m;
  for (auto r : rows) m.emplace_back(r);
  return m;
}

/// Rank by Gaussian elimination with partial pivoting.
inline int rank(Matrix a, double tol = 1e-9) {
  const std::size_t rows = a.size(), cols = rows ? a[0].size() : 0;
  int r = 0;
  for (std::size_t c = 0; c < cols && static_cast<std::size_t>(r) < rows; ++c) {
    std::size_t piv = static_cast<std::size_t>(r);
    for (std::size_t i = piv + 1; i < rows; ++i)
      if (std::abs(a[i][c]) > std::abs(a[piv][c])) piv = i;
    if (std::abs(a[piv][c]) < tol) continue;
    std::swap(a[piv], a[static_cast<std::size_t>(r)]);
    for (std::size_t i = 0; i < rows; ++i) {
      if (i == static_cast<std::size_t>(r)) continue;
      const double f = a[i][c] / a[static_cast<std::size_t>(r)][c];
      for (std::size_t k = c; k < cols; ++k) a[i][k] -= f * a[static_cast<std::size_t>(r)][k];
    }
    ++r;
  }
  return r;
}

/// Gauss–Jordan inverse.
inline Matrix inverse(Matrix a) {
  const std::size_t n = a.size();
  Matrix inv(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1.0;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t i = c + 1; i < n; ++i)
      if (std::abs(a[i][c]) > std::abs(a[piv][c])) piv = i;
    std::swap(a[piv], a[c]);
    std::swap(inv[piv], inv[c]);
    const double d = a[c][c];
    for (std::size_t k = 0; k < n; ++k) {
      a[c][k] /= d;
      inv[c][k] /= d;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (i == c) continue;
      const double f = a[i][c];
      for (std::size_t k = 0; k < n; ++k) {
        a[i][k] -= f * a[c][k];
        inv[i][k] -= f * inv[c][k];
      }
    }
  }
  return inv;
}

inline Matrix gram(const Matrix& x) {
  const std::size_t p = x.empty() ? 0 : x[0].size();
  Matrix g(p, std::vector<double>(p, 0.0));
  for (const auto& row : x)
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = 0; j < p; ++j) g[i][j] += row[i] * row[j];
  return g;
}

/// Maximal cliques of a graph on n vertices given as an adjacency predicate,
/// by Bron–Kerbosch without pivoting. Each clique is a vertex bitmask.
template <class Adj>
void bron_kerbosch(std::uint32_t r, std::uint32_t p, std::uint32_t x, int n, const Adj& adj,
                   std::vector<std::uint32_t>& out) {
  if (p == 0 && x == 0) {
    out.push_back(r);
    return;
  }
  for (int v = 0; v < n; ++v) {
    if (!(p & (1u << v))) continue;
    std::uint32_t nb = 0;
    for (int u = 0; u < n; ++u)
      if (u != v && adj(u, v)) nb |= 1u << u;
    bron_kerbosch(r | (1u << v), p & nb, x & nb, n, adj, out);
    p &= ~(1u << v);
    x |= 1u << v;
  }
}

/// Term sets (as sorted name lists) of the clique-generated hierarchical
/// model of a graph, intercept included as the empty list.
template <class Adj>
std::set<std::vector<std::string>> graphical_terms(const std::vector<std::string>& names, const Adj& adj) {
  const int n = static_cast<int>(names.size());
  std::vector<std::uint32_t> cliques;
  bron_kerbosch(0, (1u << n) - 1, 0, n, adj, cliques);
  std::set<std::vector<std::string>> terms;
  for (auto c : cliques)
    for (std::uint32_t s = c;; s = (s - 1) & c) {
      std::vector<std::string> t;
      for (int i = 0; i < n; ++i)
        if (s & (1u << i)) t.push_back(names[static_cast<std::size_t>(i)]);
      std::sort(t.begin(), t.end());
      terms.insert(t);
      if (s == 0) break;
    }
  if (n == 0) terms.insert({});
  return terms;
}

/// log of n! by direct summation.
inline double log_factorial(std::int64_t n) {
  double s = 0;
  for (std::int64_t k = 2; k <= n; ++k) s += std::log(static_cast<double>(k));
  return s;
}

}  // namespace oracle
