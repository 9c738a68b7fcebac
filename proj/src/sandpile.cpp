#include "ust3d/sandpile.hpp"

#include <stdexcept>

namespace ust3d {

SandpileConfig::SandpileConfig(Domain d, std::vector<std::int32_t> h)
    : domain(std::move(d)), height(std::move(h)) {
  if (height.size() != domain.size()) throw std::invalid_argument("SandpileConfig: size mismatch");
  for (auto x : height)
    if (x < 0) throw std::invalid_argument("SandpileConfig: negative height");
}

std::int32_t& SandpileConfig::at(const Point& p) {
  const auto i = domain.index_of(p);
  if (i < 0) throw std::out_of_range("SandpileConfig: site outside domain");
  return height[static_cast<std::size_t>(i)];
}

std::int32_t SandpileConfig::at(const Point& p) const {
  const auto i = domain.index_of(p);
  if (i < 0) throw std::out_of_range("SandpileConfig: site outside domain");
  return height[static_cast<std::size_t>(i)];
}

bool SandpileConfig::is_stable() const {
  for (auto h : height)
    if (h >= threshold()) return false;
  return true;
}

std::int64_t SandpileConfig::mass() const {
  std::int64_t m = 0;
  for (auto h : height) m += h;
  return m;
}

SandpileConfig topple(const SandpileConfig& c, const Point& v) {
  SandpileConfig out = c;
  std::int32_t& hv = out.at(v);
  if (hv < c.threshold()) throw std::invalid_argument("topple: site is stable");
  hv -= c.threshold();
  for (int k = 0; k < num_directions(c.domain.dim()); ++k) {
    const Point n = shifted(v, k);
    if (out.domain.contains(n)) out.at(n) += 1;
  }
  return out;
}

StabilizeResult stabilize(SandpileConfig c) {
  const std::size_t n = c.domain.size();
  const std::int32_t cap = c.threshold();
  const int ndir = num_directions(c.domain.dim());
  StabilizeResult res{std::move(c), std::vector<std::int64_t>(n, 0), 0};
  auto& h = res.config.height;
  const Domain& dom = res.config.domain;

  // Neighbour table; -1 marks a wired edge.
  std::vector<std::int64_t> nbr(n * static_cast<std::size_t>(ndir));
  for (std::size_t i = 0; i < n; ++i) {
    const Point p = dom.point_at(i);
    for (int k = 0; k < ndir; ++k) nbr[i * ndir + k] = dom.index_of(shifted(p, k));
  }
  std::deque<std::size_t> queue;
  std::vector<std::uint8_t> queued(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    if (h[i] >= cap) {
      queue.push_back(i);
      queued[i] = 1;
    }
  while (!queue.empty()) {
    const std::size_t i = queue.front();
    queue.pop_front();
    queued[i] = 0;
    const std::int32_t t = h[i] / cap;
    if (t == 0) continue;
    h[i] -= t * cap;
    res.odometer[i] += t;
    for (int k = 0; k < ndir; ++k) {
      const std::int64_t j = nbr[i * ndir + k];
      if (j < 0) {
        res.grains_lost += t;
        continue;
      }
      h[j] += t;
      if (h[j] >= cap && !queued[j]) {
        queued[j] = 1;
        queue.push_back(static_cast<std::size_t>(j));
      }
    }
  }
  return res;
}

namespace {

// Synchronous burning rounds. burn_time[i] = round in which i burns (>= 1),
// or 0 if it never burns.
std::vector<std::int32_t> burn_times(const SandpileConfig& c) {
  const Domain& dom = c.domain;
  const std::size_t n = dom.size();
  const int ndir = num_directions(dom.dim());
  std::vector<std::int32_t> unburnt_nbrs(n, 0), time(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const Point p = dom.point_at(i);
    unburnt_nbrs[i] = ndir - dom.wired_degree(p);
  }
  std::vector<std::size_t> frontier, next;
  std::vector<std::uint8_t> pending(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    if (c.height[i] >= unburnt_nbrs[i]) frontier.push_back(i);
  for (std::int32_t round = 1; !frontier.empty(); ++round) {
    for (auto i : frontier) time[i] = round;
    next.clear();
    for (auto i : frontier) {
      const Point p = dom.point_at(i);
      for (int k = 0; k < ndir; ++k) {
        const auto j = dom.index_of(shifted(p, k));
        if (j < 0 || time[j] != 0) continue;
        if (--unburnt_nbrs[j] <= c.height[j] && !pending[j]) {
          pending[j] = 1;
          next.push_back(static_cast<std::size_t>(j));
        }
      }
    }
    frontier.swap(next);
  }
  return time;
}

}  // namespace

bool is_recurrent(const SandpileConfig& c) {
  if (!c.is_stable()) throw std::invalid_argument("is_recurrent: configuration not stable");
  const auto t = burn_times(c);
  return std::all_of(t.begin(), t.end(), [](std::int32_t x) { return x > 0; });
}

SandpileConfig md_bijection(const SpanningForest& tree) {
  if (tree.mode != ForestMode::kWired) throw std::invalid_argument("md_bijection: needs a wired spanning tree");
  const Domain& dom = tree.domain;
  const int ndir = num_directions(dom.dim());
  const auto depth = tree.depths();
  SandpileConfig c(dom);
  for (std::size_t i = 0; i < dom.size(); ++i) {
    const Point p = dom.point_at(i);
    const std::int32_t t = depth[i];
    std::int32_t later = 0, rank = -1, candidates = 0;
    for (int k = 0; k < ndir; ++k) {
      const auto j = dom.index_of(shifted(p, k));
      const std::int32_t tj = j < 0 ? 0 : depth[static_cast<std::size_t>(j)];
      if (j >= 0 && tj >= t) ++later;
      if (tj == t - 1) {
        if (k == tree.parent_dir[i]) rank = candidates;
        ++candidates;
      }
    }
    if (rank < 0) throw std::logic_error("md_bijection: parent is not a burn-time predecessor");
    c.height[i] = later + rank;
  }
  return c;
}

SpanningForest md_inverse(const SandpileConfig& c) {
  if (!c.is_stable()) throw std::invalid_argument("md_inverse: configuration not stable");
  const auto time = burn_times(c);
  for (auto t : time)
    if (t == 0) throw std::invalid_argument("md_inverse: configuration not recurrent");
  const Domain& dom = c.domain;
  const int ndir = num_directions(dom.dim());
  SpanningForest f{dom, ForestMode::kWired, std::vector<std::int8_t>(dom.size()), {}};
  for (std::size_t i = 0; i < dom.size(); ++i) {
    const Point p = dom.point_at(i);
    const std::int32_t t = time[i];
    std::int32_t later = 0;
    std::vector<int> candidates;
    for (int k = 0; k < ndir; ++k) {
      const auto j = dom.index_of(shifted(p, k));
      const std::int32_t tj = j < 0 ? 0 : time[static_cast<std::size_t>(j)];
      if (j >= 0 && tj >= t) ++later;
      if (tj == t - 1) candidates.push_back(k);
    }
    const std::int32_t rank = c.height[i] - later;
    if (rank < 0 || rank >= static_cast<std::int32_t>(candidates.size()))
      throw std::logic_error("md_inverse: height outside its burn window");
    f.parent_dir[i] = static_cast<std::int8_t>(candidates[static_cast<std::size_t>(rank)]);
  }
  recolour(f);
  return f;
}

SandpileConfig sample_recurrent(const Domain& domain, RngSeed seed) {
  return md_bijection(wilson_ust(domain, seed));
}

LazySandpile::LazySandpile(Domain domain, RngSeed seed)
    : explorer_(std::move(domain), ForestMode::kWired, seed, /*origin_first=*/false) {}

std::int32_t& LazySandpile::height(const Point& p) {
  if (auto it = heights_.find(p); it != heights_.end()) return it->second;
  const Domain& dom = explorer_.domain();
  if (!dom.contains(p)) throw std::out_of_range("LazySandpile: site outside domain");
  const int ndir = num_directions(dom.dim());
  const ForestNode self = explorer_.ensure(p);
  std::int32_t later = 0, rank = -1, candidates = 0;
  for (int k = 0; k < ndir; ++k) {
    const Point q = shifted(p, k);
    std::int32_t tq = 0;
    if (dom.contains(q)) {
      tq = explorer_.ensure(q).depth;
      if (tq >= self.depth) ++later;
    }
    if (tq == self.depth - 1) {
      if (k == self.parent_dir) rank = candidates;
      ++candidates;
    }
  }
  if (rank < 0) throw std::logic_error("LazySandpile: inconsistent tree depths");
  return heights_.emplace(p, later + rank).first->second;
}

AvalancheResult avalanche(SandpileConfig& c, const Point& v, const AvalancheOptions& opts) {
  DenseHeights field{c};
  return run_avalanche(field, v, opts);
}

nlohmann::json avalanche_json(const AvalancheResult& r, const Point& v) {
  std::int64_t radius = 0;
  for (const auto& p : r.cluster) radius = std::max(radius, linf_dist(p, v));
  return nlohmann::json{{"total", r.total},
                        {"waves", r.wave_sizes},
                        {"cluster_radius", radius},
                        {"cluster_size", r.cluster.size()},
                        {"cluster_diam_ext", extrinsic_diameter(r.cluster)},
                        {"truncated", r.truncated}};
}

nlohmann::json sandpile_json(const SandpileConfig& c) {
  nlohmann::json j;
  j["format"] = "ust3d-sandpile";
  j["version"] = 1;
  j["dim"] = c.domain.dim();
  if (c.domain.is_box()) {
    j["domain"] = {{"box", c.domain.box_shape()}};
  } else {
    j["domain"] = {{"sites", c.domain.points()}};
  }
  j["heights"] = c.height;
  return j;
}

SandpileConfig sandpile_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "ust3d-sandpile" || j.value("version", 0) != 1)
    throw std::invalid_argument("sandpile json: unsupported format or version");
  const auto& d = j.at("domain");
  Domain dom = d.contains("box") ? Domain::box(d.at("box").get<Box>())
                                 : Domain::sites(d.at("sites").get<std::vector<Point>>());
  return SandpileConfig(dom, j.at("heights").get<std::vector<std::int32_t>>());
}

}  // namespace ust3d
