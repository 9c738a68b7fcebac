#pragma once

// Brute-force reference implementations used only by the tests. They are
// deliberately naive and share no code with the library routines they check.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <vector>

#include <gmpxx.h>

#include "ust3d/forest.hpp"
#include "ust3d/lattice.hpp"
#include "ust3d/rng.hpp"
#include "ust3d/sandpile.hpp"

namespace oracle_ref {

using ust3d::Point;

/// Loop erasure by the literal recursion: t0 = last visit of p0, then
/// t_{i+1} = last visit of p[t_i + 1], rescanning the whole walk each time.
inline std::vector<Point> rescan_loop_erase(const std::vector<Point>& w) {
  std::vector<Point> out;
  if (w.empty()) return out;
  auto last_visit = [&](const Point& p) {
    std::size_t t = 0;
    for (std::size_t j = 0; j < w.size(); ++j)
      if (w[j] == p) t = j;
    return t;
  };
  std::size_t t = last_visit(w[0]);
  out.push_back(w[t]);
  while (t + 1 < w.size()) {
    t = last_visit(w[t + 1]);
    out.push_back(w[t]);
  }
  return out;
}

/// Random nearest-neighbour walk of `len` steps from the origin.
inline std::vector<Point> random_walk(std::size_t len, ust3d::Rng& rng, int dim = 3) {
  std::vector<Point> w{Point::origin(dim)};
  for (std::size_t i = 0; i < len; ++i)
    w.push_back(ust3d::shifted(w.back(), static_cast<int>(rng.below(static_cast<std::uint32_t>(2 * dim)))));
  return w;
}

/// Past of the origin as {0} plus the components of (tree minus 0) that are
/// cut off from the wired root.
inline std::set<Point> past_by_deletion(const ust3d::SpanningForest& f) {
  const auto& dom = f.domain;
  const std::size_t n = f.size();
  std::vector<std::vector<std::size_t>> adj(n);
  std::vector<bool> to_root(n, false);
  const auto origin = static_cast<std::size_t>(dom.index_of(Point::origin(dom.dim())));
  for (std::size_t i = 0; i < n; ++i) {
    const Point q = ust3d::shifted(dom.point_at(i), f.parent_dir[i]);
    const auto j = dom.index_of(q);
    if (j < 0) {
      to_root[i] = true;
    } else {
      adj[i].push_back(static_cast<std::size_t>(j));
      adj[static_cast<std::size_t>(j)].push_back(i);
    }
  }
  std::vector<int> comp(n, -1);
  std::set<Point> past{dom.point_at(origin)};
  int c = 0;
  for (std::size_t s = 0; s < n; ++s) {
    if (s == origin || comp[s] >= 0) continue;
    std::vector<std::size_t> members{s};
    comp[s] = c;
    bool rooted = false;
    for (std::size_t h = 0; h < members.size(); ++h) {
      const std::size_t u = members[h];
      rooted = rooted || to_root[u];
      for (auto v : adj[u])
        if (v != origin && comp[v] < 0) {
          comp[v] = c;
          members.push_back(v);
        }
    }
    if (!rooted)
      for (auto u : members) past.insert(dom.point_at(u));
    ++c;
  }
  return past;
}

/// Largest graph distance over all pairs, one BFS per source.
inline std::int64_t all_pairs_diameter(const std::vector<Point>& s,
                                       const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  std::vector<std::vector<std::size_t>> adj(s.size());
  for (auto [a, b] : edges) {
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::int64_t best = 0;
  for (std::size_t src = 0; src < s.size(); ++src) {
    std::vector<std::int64_t> d(s.size(), -1);
    std::queue<std::size_t> q;
    d[src] = 0;
    q.push(src);
    while (!q.empty()) {
      auto u = q.front();
      q.pop();
      best = std::max(best, d[u]);
      for (auto v : adj[u])
        if (d[v] < 0) {
          d[v] = d[u] + 1;
          q.push(v);
        }
    }
  }
  return best;
}

inline std::int64_t pair_scan_linf(const std::vector<Point>& s) {
  std::int64_t best = 0;
  for (const auto& a : s)
    for (const auto& b : s) {
      std::int64_t m = 0;
      for (int i = 0; i < 3; ++i) m = std::max<std::int64_t>(m, std::abs(a.x[i] - b.x[i]));
      best = std::max(best, m);
    }
  return best;
}

/// Stabilizes by toppling a uniformly chosen unstable site each step.
inline std::pair<std::vector<std::int32_t>, std::vector<std::int64_t>> random_order_stabilize(
    const ust3d::Domain& dom, std::vector<std::int32_t> h, ust3d::Rng& rng) {
  const std::int32_t cap = 2 * dom.dim();
  std::vector<std::int64_t> odo(h.size(), 0);
  while (true) {
    std::vector<std::size_t> unstable;
    for (std::size_t i = 0; i < h.size(); ++i)
      if (h[i] >= cap) unstable.push_back(i);
    if (unstable.empty()) break;
    const auto i = unstable[rng.below(static_cast<std::uint32_t>(unstable.size()))];
    h[i] -= cap;
    ++odo[i];
    for (const auto& q : ust3d::neighbors(dom.point_at(i))) {
      const auto j = dom.index_of(q);
      if (j >= 0) ++h[static_cast<std::size_t>(j)];
    }
  }
  return {h, odo};
}

/// Dense toppling matrix in rationals.
inline std::vector<std::vector<mpq_class>> dense_toppling(const ust3d::Domain& dom) {
  const std::size_t n = dom.size();
  std::vector<std::vector<mpq_class>> m(n, std::vector<mpq_class>(n, 0));
  for (std::size_t i = 0; i < n; ++i) {
    m[i][i] = 2 * dom.dim();
    for (const auto& q : ust3d::neighbors(dom.point_at(i))) {
      const auto j = dom.index_of(q);
      if (j >= 0) m[i][static_cast<std::size_t>(j)] = -1;
    }
  }
  return m;
}

/// Determinant by plain Gaussian elimination over Q.
inline mpq_class dense_det(std::vector<std::vector<mpq_class>> m) {
  const std::size_t n = m.size();
  mpq_class det = 1;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    while (p < n && m[p][c] == 0) ++p;
    if (p == n) return 0;
    if (p != c) {
      std::swap(m[p], m[c]);
      det = -det;
    }
    det *= m[c][c];
    for (std::size_t r = c + 1; r < n; ++r) {
      const mpq_class f = m[r][c] / m[c][c];
      for (std::size_t k = c; k < n; ++k) m[r][k] -= f * m[c][k];
    }
  }
  return det;
}

/// Gauss-Jordan inverse over Q.
inline std::vector<std::vector<mpq_class>> dense_inverse(std::vector<std::vector<mpq_class>> m) {
  const std::size_t n = m.size();
  std::vector<std::vector<mpq_class>> inv(n, std::vector<mpq_class>(n, 0));
  for (std::size_t i = 0; i < n; ++i) inv[i][i] = 1;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    while (m[p][c] == 0) ++p;
    std::swap(m[p], m[c]);
    std::swap(inv[p], inv[c]);
    const mpq_class piv = m[c][c];
    for (std::size_t k = 0; k < n; ++k) {
      m[c][k] /= piv;
      inv[c][k] /= piv;
    }
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c || m[r][c] == 0) continue;
      const mpq_class f = m[r][c];
      for (std::size_t k = 0; k < n; ++k) {
        m[r][k] -= f * m[c][k];
        inv[r][k] -= f * inv[c][k];
      }
    }
  }
  return inv;
}

/// Expected visits to y of the walk from x killed on leaving K, through the
/// absorbing-chain fundamental matrix (I - P)^{-1} with P = A_K / 2d.
inline mpq_class killed_walk_visits(const ust3d::Domain& dom, const Point& x, const Point& y) {
  const std::size_t n = dom.size();
  std::vector<std::vector<mpq_class>> m(n, std::vector<mpq_class>(n, 0));
  const mpq_class step(1, 2 * dom.dim());
  for (std::size_t i = 0; i < n; ++i) {
    m[i][i] = 1;
    for (const auto& q : ust3d::neighbors(dom.point_at(i))) {
      const auto j = dom.index_of(q);
      if (j >= 0) m[i][static_cast<std::size_t>(j)] -= step;
    }
  }
  const auto fund = dense_inverse(m);
  return fund[static_cast<std::size_t>(dom.index_of(x))][static_cast<std::size_t>(dom.index_of(y))];
}

/// Pearson statistic with no cell merging.
inline double pearson(const std::vector<std::int64_t>& counts, const std::vector<double>& probs) {
  double n = 0;
  for (auto c : counts) n += static_cast<double>(c);
  double s = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double e = n * probs[i];
    s += (static_cast<double>(counts[i]) - e) * (static_cast<double>(counts[i]) - e) / e;
  }
  return s;
}

}  // namespace oracle_ref
