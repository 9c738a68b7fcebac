#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <absl/container/flat_hash_map.h>

#include "ust3d/lattice.hpp"
#include "ust3d/randwalk.hpp"
#include "ust3d/rng.hpp"

namespace ust3d {

/// kWired: single root, the wired boundary. kZeroWired: the origin is
/// promoted to a second root (0-WUSF).
enum class ForestMode { kWired, kZeroWired };

inline constexpr std::int8_t kPromotedRoot = -1;

struct ForestNode {
  /// Direction of the parent edge, or kPromotedRoot for the origin in
  /// kZeroWired mode. A direction leading outside the domain is a wired edge.
  std::int8_t parent_dir = kPromotedRoot;
  /// Past colouring (kWired, origin grown first) or 0-tree membership.
  bool red = false;
  /// Edges on the tree path to the root this site hangs from.
  std::int32_t depth = 0;
};

/// Wilson's algorithm on a wired domain, grown on demand. Each call to
/// ensure() runs one loop-erased branch from a site not yet in the tree, so
/// the explored part is always distributed as the corresponding part of the
/// uniform spanning tree (forest), whatever order the sites are requested in.
class WilsonExplorer {
 public:
  /// In kWired mode with `origin_first`, the branch from the origin is grown
  /// immediately: the origin is red, the rest of that branch blue, and later
  /// branches inherit the colour of the site they attach to. Red is then
  /// exactly the past of the origin.
  WilsonExplorer(Domain domain, ForestMode mode, RngSeed seed, bool origin_first = true);

  const ForestNode& ensure(const Point& p);
  const ForestNode* find(const Point& p) const {
    auto it = nodes_.find(p);
    return it == nodes_.end() ? nullptr : &it->second;
  }
  bool in_tree(const Point& p) const { return nodes_.contains(p); }

  /// Parent site, or nullopt when the parent is a root.
  std::optional<Point> parent(const Point& p) const;

  const Domain& domain() const { return domain_; }
  ForestMode mode() const { return mode_; }
  std::size_t explored() const { return nodes_.size(); }
  std::uint64_t walk_steps() const { return walk_steps_; }
  const absl::flat_hash_map<Point, ForestNode>& nodes() const { return nodes_; }

 private:
  Domain domain_;
  ForestMode mode_;
  Rng rng_;
  bool colour_past_ = false;
  absl::flat_hash_map<Point, ForestNode> nodes_;
  Path walk_;
  std::vector<Point> branch_;
  LoopEraser eraser_;
  std::uint64_t walk_steps_ = 0;
};

/// Direction k with shifted(a, k) == b; -1 if not adjacent.
int direction_between(const Point& a, const Point& b);

/// Dense forest over every site of a domain.
struct SpanningForest {
  Domain domain;
  ForestMode mode = ForestMode::kWired;
  std::vector<std::int8_t> parent_dir;
  std::vector<std::uint8_t> red;

  std::size_t size() const { return parent_dir.size(); }
  /// Parent site index, or -1 when the parent is a root (or i is a root).
  std::int64_t parent_index(std::size_t i) const;
  bool is_promoted_root(std::size_t i) const { return parent_dir[i] == kPromotedRoot; }
  /// Edges to the root along parent pointers.
  std::vector<std::int32_t> depths() const;
  /// Sites in the component of the promoted root (kZeroWired), or whose
  /// chain passes through the origin (kWired).
  std::vector<Point> red_sites() const;

  friend bool operator==(const SpanningForest& a, const SpanningForest& b) {
    return a.domain == b.domain && a.mode == b.mode && a.parent_dir == b.parent_dir &&
           a.red == b.red;
  }
};

/// Acyclic, every site reaches a root, parents are neighbours or wired edges.
bool is_valid_forest(const SpanningForest& f);

/// Recomputes the colours from the parent pointers.
void recolour(SpanningForest& f);

SpanningForest export_forest(const WilsonExplorer& ex);

/// Wilson's algorithm for the wired uniform spanning tree. Sites are started
/// in `order` (empty means lexicographic; the order must list every site).
SpanningForest wilson_ust(const Domain& domain, const std::vector<Point>& order, RngSeed seed);
SpanningForest wilson_ust(const Domain& domain, RngSeed seed);

/// Wilson's algorithm with roots {origin, boundary}; red = origin's tree.
SpanningForest wilson_0wusf(const Domain& domain, RngSeed seed);

/// Sites whose parent chain contains the origin, plus the origin; sorted.
std::vector<Point> past_of_origin(const SpanningForest& f);

struct TreeObservables {
  std::int64_t diam_ext = 0;
  std::int64_t diam_int = 0;
  std::int64_t volume = 0;
  friend bool operator==(const TreeObservables&, const TreeObservables&) = default;
};

/// L-infinity diameter of a point set (0 for empty or singleton sets).
std::int64_t extrinsic_diameter(const std::vector<Point>& s);

/// Observables of a set that is connected through parent edges.
/// `parent_of(p)` returns the parent site of p or nullopt.
/// Throws std::invalid_argument when s is not connected in the forest.
template <typename ParentFn>
TreeObservables subtree_observables(const std::vector<Point>& s, ParentFn&& parent_of);

TreeObservables observables(const SpanningForest& f, const std::vector<Point>& s);

/// Text dump: versioned header, then one line per site
/// "x y z -> px py pz|ROOT0|ROOTB color", ROOTB lines carry " e=k" for the
/// wired edge used.
std::string dump_forest(const SpanningForest& f);
SpanningForest parse_forest_dump(const std::string& text);

struct ComparisonFrequencies {
  double lambda = 1.0;
  std::int64_t reps = 0;
  /// U_R not inside the intrinsic ball of radius lambda R^beta.
  std::int64_t ext_not_in_int = 0;
  /// Intrinsic ball of radius R^beta / lambda not inside B_R.
  std::int64_t int_not_in_ext = 0;
  /// Intrinsic ball of radius R has at least lambda R^(3/beta) sites.
  std::int64_t volume_large = 0;

  double freq_ext_not_in_int() const { return reps ? double(ext_not_in_int) / reps : 0.0; }
  double freq_int_not_in_ext() const { return reps ? double(int_not_in_ext) / reps : 0.0; }
  double freq_volume_large() const { return reps ? double(volume_large) / reps : 0.0; }
};

/// Empirical frequencies of the intrinsic/extrinsic comparison events for the
/// UST, sampled in Box(0, box_factor R). Every lambda is evaluated on the
/// same samples, so the frequencies are coupled across lambda.
std::vector<ComparisonFrequencies> comparison_diagnostics(std::int32_t R,
                                                          const std::vector<double>& lambdas,
                                                          std::int64_t reps, RngSeed seed,
                                                          double beta = 1.624,
                                                          std::int32_t box_factor = 4);

// ---------------------------------------------------------------------------

template <typename ParentFn>
TreeObservables subtree_observables(const std::vector<Point>& s, ParentFn&& parent_of) {
  TreeObservables obs;
  obs.volume = static_cast<std::int64_t>(s.size());
  if (s.empty()) return obs;
  absl::flat_hash_map<Point, std::uint32_t> idx;
  idx.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) idx.emplace(s[i], static_cast<std::uint32_t>(i));
  std::vector<std::vector<std::uint32_t>> adj(s.size());
  std::size_t edges = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const std::optional<Point> par = parent_of(s[i]);
    if (!par) continue;
    auto it = idx.find(*par);
    if (it == idx.end()) continue;
    adj[i].push_back(it->second);
    adj[it->second].push_back(static_cast<std::uint32_t>(i));
    ++edges;
  }
  // Parent edges are acyclic, so the induced subgraph is a forest and it is
  // connected iff it has |s| - 1 edges.
  if (edges + 1 != s.size()) throw std::invalid_argument("observables: set not connected in forest");

  std::vector<std::int64_t> dist(s.size());
  std::vector<std::uint32_t> queue(s.size());
  auto farthest = [&](std::uint32_t from) {
    std::fill(dist.begin(), dist.end(), -1);
    std::size_t head = 0, tail = 0;
    queue[tail++] = from;
    dist[from] = 0;
    std::uint32_t last = from;
    while (head < tail) {
      const std::uint32_t u = queue[head++];
      last = u;
      for (auto w : adj[u])
        if (dist[w] < 0) {
          dist[w] = dist[u] + 1;
          queue[tail++] = w;
        }
    }
    return last;
  };
  const std::uint32_t a = farthest(0);
  const std::uint32_t b = farthest(a);
  obs.diam_int = dist[b];
  obs.diam_ext = extrinsic_diameter(s);
  return obs;
}

}  // namespace ust3d
