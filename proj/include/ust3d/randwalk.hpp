#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "ust3d/lattice.hpp"
#include "ust3d/rng.hpp"

namespace ust3d {

/// Nearest-neighbour trajectory. When `ends_at_root` is set the walk left the
/// domain through a wired edge after its last listed vertex; `root_edge` then
/// records which of the 2d directions was taken.
struct Path {
  std::vector<Point> vertices;
  bool ends_at_root = false;
  int root_edge = -1;

  std::size_t steps() const {
    return vertices.empty() ? 0 : vertices.size() - 1 + (ends_at_root ? 1 : 0);
  }
  friend bool operator==(const Path&, const Path&) = default;
};

bool is_self_avoiding(const Path& p);

/// Simple random walk on the wired graph over `domain` from `start` until the
/// first time it is in the absorbing set. The wired root is always absorbing;
/// a site with k edges leaving the domain steps to the root with probability
/// k/2d. Time 0 counts.
template <typename Absorbing>
void srw_until_hit_into(const Point& start, Absorbing&& absorbing, const Domain& domain, Rng& rng,
                        Path& path) {
  if (!domain.contains(start)) throw std::invalid_argument("srw_until_hit: start outside domain");
  path.vertices.clear();
  path.ends_at_root = false;
  path.root_edge = -1;
  Point cur = start;
  const auto ndir = static_cast<std::uint32_t>(num_directions(domain.dim()));
  while (true) {
    path.vertices.push_back(cur);
    if (absorbing(cur)) return;
    const int k = static_cast<int>(rng.below(ndir));
    Point next = shifted(cur, k);
    if (!domain.contains(next)) {
      path.ends_at_root = true;
      path.root_edge = k;
      return;
    }
    cur = next;
  }
}

template <typename Absorbing>
Path srw_until_hit(const Point& start, Absorbing&& absorbing, const Domain& domain, Rng& rng) {
  Path path;
  srw_until_hit_into(start, std::forward<Absorbing>(absorbing), domain, rng, path);
  return path;
}

template <typename Absorbing>
Path srw_until_hit(const Point& start, Absorbing&& absorbing, const Domain& domain, RngSeed seed) {
  Rng rng(seed);
  return srw_until_hit(start, std::forward<Absorbing>(absorbing), domain, rng);
}

/// Chronological loop erasure (single pass, hash-indexed stack).
Path loop_erase(const Path& p);

/// Reusable loop eraser; keeps its hash index between calls so repeated
/// short erasures (Wilson branches) do not reallocate.
class LoopEraser {
 public:
  void run(const std::vector<Point>& walk, std::vector<Point>& out);

 private:
  absl::flat_hash_map<std::uint64_t, std::size_t> pos_;
};

void loop_erase_into(const std::vector<Point>& walk, std::vector<Point>& out);

/// Loop erasure of a walk from the origin stopped on the outer boundary of
/// B_N, truncated at its first exit of B_R (the exit site is included).
/// Requires N >= 4R.
Path ilerw_truncated(std::int32_t R, std::int32_t N, RngSeed seed);

/// Loop erasure of a simple random walk from the origin run until it leaves
/// B_N; the returned path ends at the first site outside B_N.
void lerw_to_exit(std::int32_t N, Rng& rng, std::vector<Point>& out);

/// Index of the first vertex of `path` with L-infinity norm > R, or
/// path.size() when there is none.
std::size_t first_exit_index(const std::vector<Point>& path, std::int32_t R);

void to_json(nlohmann::json& j, const Path& p);
void from_json(const nlohmann::json& j, Path& p);

/// Compact binary trace: magic "UST3PATH", u32 version, u32 dim, u8 flags,
/// i32 root_edge, u64 count, then count * dim little-endian i32 coordinates.
std::vector<std::uint8_t> encode_path_binary(const Path& p);
Path decode_path_binary(const std::vector<std::uint8_t>& bytes);

}  // namespace ust3d
