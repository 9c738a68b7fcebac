#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <vector>

#include <absl/container/flat_hash_map.h>
#include <absl/container/flat_hash_set.h>
#include <nlohmann/json.hpp>

#include "ust3d/forest.hpp"
#include "ust3d/lattice.hpp"
#include "ust3d/rng.hpp"

namespace ust3d {

struct SandpileConfig {
  Domain domain;
  std::vector<std::int32_t> height;

  explicit SandpileConfig(Domain d) : domain(std::move(d)), height(domain.size(), 0) {}
  SandpileConfig(Domain d, std::vector<std::int32_t> h);

  /// 2d: a site is stable iff its height is below this.
  std::int32_t threshold() const { return 2 * domain.dim(); }
  std::int32_t& at(const Point& p);
  std::int32_t at(const Point& p) const;
  bool is_stable() const;
  std::int64_t mass() const;

  friend bool operator==(const SandpileConfig& a, const SandpileConfig& b) {
    return a.domain == b.domain && a.height == b.height;
  }
};

/// One toppling at v. Throws std::invalid_argument when v is stable.
SandpileConfig topple(const SandpileConfig& c, const Point& v);

struct StabilizeResult {
  SandpileConfig config;
  std::vector<std::int64_t> odometer;  ///< indexed like config.domain
  std::int64_t grains_lost = 0;
};

/// Unique stabilization (FIFO queue of unstable sites).
StabilizeResult stabilize(SandpileConfig c);

/// Burning test. Throws std::invalid_argument on unstable input.
bool is_recurrent(const SandpileConfig& c);

/// Majumdar-Dhar burning bijection, wired spanning trees -> recurrent
/// configurations. Burn time is the tree depth; the height of x is the number
/// of neighbours in K not burnt before x plus the rank of x's parent edge
/// among the edges to sites burnt one step earlier (wired edges count as
/// burnt at time 0), ranked in the global direction order.
SandpileConfig md_bijection(const SpanningForest& tree);

/// Inverse of md_bijection. Throws std::invalid_argument on non-recurrent
/// input.
SpanningForest md_inverse(const SandpileConfig& c);

/// Uniform recurrent configuration: md_bijection(wilson_ust(K)).
SandpileConfig sample_recurrent(const Domain& domain, RngSeed seed);

struct AvalancheOptions {
  bool record_waves = true;
  bool stop_after_first_wave = false;
  /// Abandon the avalanche once a site next to the boundary topples; the
  /// recorded quantities are then lower bounds.
  bool stop_when_truncated = false;
};

struct AvalancheResult {
  absl::flat_hash_map<Point, std::int64_t> odometer;
  std::vector<std::vector<Point>> waves;  ///< filled when record_waves
  std::vector<std::int64_t> wave_sizes;
  std::vector<Point> cluster;  ///< sorted
  std::int64_t total = 0;
  bool truncated = false;
  /// Largest number of topplings of a single site within one wave.
  std::int64_t max_topplings_in_wave = 0;

  std::int64_t num_waves() const { return static_cast<std::int64_t>(wave_sizes.size()); }
  std::int64_t topplings_at(const Point& p) const {
    auto it = odometer.find(p);
    return it == odometer.end() ? 0 : it->second;
  }
};

/// Height field view used by the avalanche engine.
struct DenseHeights {
  SandpileConfig& config;
  int dim() const { return config.domain.dim(); }
  bool inside(const Point& p) const { return config.domain.contains(p); }
  bool touches_boundary(const Point& p) const { return config.domain.touches_boundary(p); }
  std::int32_t& height(const Point& p) { return config.at(p); }
};

/// Heights of a uniform recurrent configuration on a wired domain, sampled
/// lazily: a height is computed from tree depths the first time it is read,
/// which grows the underlying Wilson tree only around the sites touched.
class LazySandpile {
 public:
  LazySandpile(Domain domain, RngSeed seed);

  int dim() const { return explorer_.domain().dim(); }
  bool inside(const Point& p) const { return explorer_.domain().contains(p); }
  bool touches_boundary(const Point& p) const { return explorer_.domain().touches_boundary(p); }
  std::int32_t& height(const Point& p);

  const WilsonExplorer& explorer() const { return explorer_; }
  WilsonExplorer& explorer() { return explorer_; }
  std::size_t heights_materialised() const { return heights_.size(); }

 private:
  WilsonExplorer explorer_;
  absl::flat_hash_map<Point, std::int32_t> heights_;
};

/// Adds one grain at v and runs the avalanche wave by wave: topple v once,
/// then stabilize everything except v; repeat while v is unstable.
template <typename Heights>
AvalancheResult run_avalanche(Heights& field, const Point& v, const AvalancheOptions& opts = {});

/// Mutates c into the post-avalanche configuration.
AvalancheResult avalanche(SandpileConfig& c, const Point& v, const AvalancheOptions& opts = {});

nlohmann::json avalanche_json(const AvalancheResult& r, const Point& v);
nlohmann::json sandpile_json(const SandpileConfig& c);
SandpileConfig sandpile_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------

template <typename Heights>
AvalancheResult run_avalanche(Heights& field, const Point& v, const AvalancheOptions& opts) {
  AvalancheResult res;
  const std::int32_t cap = 2 * field.dim();
  const int ndir = 2 * field.dim();
  if (!field.inside(v)) throw std::invalid_argument("avalanche: site outside domain");
  std::int32_t& hv = field.height(v);
  if (hv >= cap) throw std::invalid_argument("avalanche: configuration not stable at v");
  hv += 1;
  if (hv < cap) return res;

  std::deque<Point> queue;
  absl::flat_hash_set<Point> queued;
  absl::flat_hash_map<Point, std::int64_t> in_wave;
  std::vector<Point> wave;

  auto topple_once = [&](const Point& u, std::int32_t& hu) {
    hu -= cap;
    ++res.odometer[u];
    ++res.total;
    auto& w = in_wave[u];
    if (w == 0) wave.push_back(u);
    ++w;
    res.max_topplings_in_wave = std::max(res.max_topplings_in_wave, w);
    if (!res.truncated && field.touches_boundary(u)) res.truncated = true;
    for (int k = 0; k < ndir; ++k) {
      const Point n = shifted(u, k);
      if (!field.inside(n)) continue;
      std::int32_t& hn = field.height(n);
      hn += 1;
      if (hn >= cap && n != v && queued.insert(n).second) queue.push_back(n);
    }
  };

  while (field.height(v) >= cap) {
    wave.clear();
    in_wave.clear();
    topple_once(v, field.height(v));
    while (!queue.empty()) {
      if (res.truncated && opts.stop_when_truncated) break;
      const Point u = queue.front();
      queue.pop_front();
      queued.erase(u);
      // Heights may live in a rehashing map: re-fetch after every toppling.
      while (field.height(u) >= cap) topple_once(u, field.height(u));
    }
    res.wave_sizes.push_back(static_cast<std::int64_t>(wave.size()));
    if (opts.record_waves) res.waves.push_back(wave);
    if (opts.stop_after_first_wave) break;
    if (res.truncated && opts.stop_when_truncated) break;
  }
  res.cluster.reserve(res.odometer.size());
  for (const auto& [p, n] : res.odometer) res.cluster.push_back(p);
  std::sort(res.cluster.begin(), res.cluster.end());
  return res;
}

}  // namespace ust3d
