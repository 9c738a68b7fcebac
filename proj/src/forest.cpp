#include "ust3d/forest.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ust3d {

int direction_between(const Point& a, const Point& b) {
  for (int k = 0; k < num_directions(a.dim); ++k)
    if (shifted(a, k) == b) return k;
  return -1;
}

WilsonExplorer::WilsonExplorer(Domain domain, ForestMode mode, RngSeed seed, bool origin_first)
    : domain_(std::move(domain)), mode_(mode), rng_(seed) {
  const Point origin = Point::origin(domain_.dim());
  if (mode_ == ForestMode::kZeroWired) {
    if (!domain_.contains(origin)) throw std::invalid_argument("0-wired forest: origin outside domain");
    nodes_.emplace(origin, ForestNode{kPromotedRoot, true, 0});
  } else if (origin_first && domain_.contains(origin)) {
    ensure(origin);
    nodes_[origin].red = true;
    colour_past_ = true;
  }
}

const ForestNode& WilsonExplorer::ensure(const Point& p) {
  if (auto it = nodes_.find(p); it != nodes_.end()) return it->second;
  srw_until_hit_into(
      p, [this](const Point& q) { return nodes_.contains(q); }, domain_, rng_, walk_);
  walk_steps_ += walk_.steps();
  eraser_.run(walk_.vertices, branch_);

  const std::size_t n = branch_.size();
  ForestNode next;
  std::size_t i;
  if (walk_.ends_at_root) {
    next = ForestNode{static_cast<std::int8_t>(walk_.root_edge), false, 1};
    nodes_.emplace(branch_[n - 1], next);
    i = n - 1;
  } else {
    next = nodes_.at(branch_[n - 1]);
    i = n - 1;
  }
  const bool inherit = colour_past_ || mode_ == ForestMode::kZeroWired;
  const bool red = inherit && next.red;
  std::int32_t depth = next.depth;
  while (i-- > 0) {
    ++depth;
    nodes_.emplace(branch_[i],
                   ForestNode{static_cast<std::int8_t>(direction_between(branch_[i], branch_[i + 1])),
                              red, depth});
  }
  return nodes_.at(p);
}

std::optional<Point> WilsonExplorer::parent(const Point& p) const {
  const ForestNode* n = find(p);
  if (!n) throw std::out_of_range("WilsonExplorer::parent: site not explored");
  if (n->parent_dir == kPromotedRoot) return std::nullopt;
  Point q = shifted(p, n->parent_dir);
  if (!domain_.contains(q)) return std::nullopt;
  return q;
}

std::int64_t SpanningForest::parent_index(std::size_t i) const {
  if (parent_dir[i] == kPromotedRoot) return -1;
  return domain.index_of(shifted(domain.point_at(i), parent_dir[i]));
}

std::vector<std::int32_t> SpanningForest::depths() const {
  std::vector<std::int32_t> depth(size(), -1);
  std::vector<std::size_t> chain;
  for (std::size_t i = 0; i < size(); ++i) {
    if (depth[i] >= 0) continue;
    chain.clear();
    std::size_t cur = i;
    std::int32_t base = 0;
    while (true) {
      if (depth[cur] >= 0) {
        base = depth[cur];
        break;
      }
      if (is_promoted_root(cur)) {
        depth[cur] = 0;
        break;
      }
      chain.push_back(cur);
      if (chain.size() > size()) throw std::logic_error("SpanningForest: cycle");
      const std::int64_t par = parent_index(cur);
      if (par < 0) break;  // hangs from the wired root
      cur = static_cast<std::size_t>(par);
    }
    for (std::size_t k = chain.size(); k-- > 0;) depth[chain[k]] = ++base;
  }
  return depth;
}

namespace {

// For every site, does its parent chain (including itself) reach `target`?
std::vector<std::uint8_t> reaches(const SpanningForest& f, std::int64_t target) {
  std::vector<std::int8_t> state(f.size(), -1);
  std::vector<std::size_t> chain;
  for (std::size_t i = 0; i < f.size(); ++i) {
    chain.clear();
    std::int64_t cur = static_cast<std::int64_t>(i);
    std::int8_t verdict = 0;
    while (true) {
      if (cur < 0) {
        verdict = 0;
        break;
      }
      if (cur == target) {
        verdict = 1;
        break;
      }
      if (state[static_cast<std::size_t>(cur)] >= 0) {
        verdict = state[static_cast<std::size_t>(cur)];
        break;
      }
      chain.push_back(static_cast<std::size_t>(cur));
      if (chain.size() > f.size()) throw std::logic_error("SpanningForest: cycle");
      cur = f.parent_index(static_cast<std::size_t>(cur));
    }
    for (auto c : chain) state[c] = verdict;
    if (target >= 0 && static_cast<std::int64_t>(i) == target) state[i] = 1;
  }
  return {state.begin(), state.end()};
}

}  // namespace

void recolour(SpanningForest& f) {
  const std::int64_t origin = f.domain.index_of(Point::origin(f.domain.dim()));
  if (origin < 0) {
    f.red.assign(f.size(), 0);
    return;
  }
  f.red = reaches(f, origin);
}

std::vector<Point> SpanningForest::red_sites() const {
  std::vector<Point> out;
  for (std::size_t i = 0; i < size(); ++i)
    if (red[i]) out.push_back(domain.point_at(i));
  return out;
}

bool is_valid_forest(const SpanningForest& f) {
  if (f.parent_dir.size() != f.domain.size()) return false;
  const std::int64_t origin = f.domain.index_of(Point::origin(f.domain.dim()));
  for (std::size_t i = 0; i < f.size(); ++i) {
    const auto d = f.parent_dir[i];
    if (d == kPromotedRoot) {
      if (f.mode != ForestMode::kZeroWired || static_cast<std::int64_t>(i) != origin) return false;
      continue;
    }
    if (d < 0 || d >= num_directions(f.domain.dim())) return false;
  }
  if (f.mode == ForestMode::kZeroWired && (origin < 0 || f.parent_dir[origin] != kPromotedRoot))
    return false;
  try {
    (void)f.depths();
  } catch (const std::logic_error&) {
    return false;
  }
  return true;
}

SpanningForest export_forest(const WilsonExplorer& ex) {
  SpanningForest f{ex.domain(), ex.mode(), {}, {}};
  const auto& dom = ex.domain();
  f.parent_dir.resize(dom.size());
  for (std::size_t i = 0; i < dom.size(); ++i) {
    const ForestNode* n = ex.find(dom.point_at(i));
    if (!n) throw std::logic_error("export_forest: site not explored");
    f.parent_dir[i] = n->parent_dir;
  }
  recolour(f);
  return f;
}

SpanningForest wilson_ust(const Domain& domain, const std::vector<Point>& order, RngSeed seed) {
  if (domain.size() == 0) throw std::invalid_argument("wilson_ust: empty domain");
  WilsonExplorer ex(domain, ForestMode::kWired, seed, /*origin_first=*/false);
  if (order.empty()) {
    for (std::size_t i = 0; i < domain.size(); ++i) ex.ensure(domain.point_at(i));
  } else {
    if (order.size() != domain.size()) throw std::invalid_argument("wilson_ust: order must list every site");
    for (const auto& p : order) ex.ensure(p);
  }
  return export_forest(ex);
}

SpanningForest wilson_ust(const Domain& domain, RngSeed seed) { return wilson_ust(domain, {}, seed); }

SpanningForest wilson_0wusf(const Domain& domain, RngSeed seed) {
  WilsonExplorer ex(domain, ForestMode::kZeroWired, seed);
  for (std::size_t i = 0; i < domain.size(); ++i) ex.ensure(domain.point_at(i));
  return export_forest(ex);
}

std::vector<Point> past_of_origin(const SpanningForest& f) {
  if (f.mode != ForestMode::kWired) throw std::invalid_argument("past_of_origin: needs a wired tree");
  const std::int64_t origin = f.domain.index_of(Point::origin(f.domain.dim()));
  if (origin < 0) throw std::invalid_argument("past_of_origin: origin outside domain");
  const auto in_past = reaches(f, origin);
  std::vector<Point> out;
  for (std::size_t i = 0; i < f.size(); ++i)
    if (in_past[i]) out.push_back(f.domain.point_at(i));
  return out;
}

std::int64_t extrinsic_diameter(const std::vector<Point>& s) {
  if (s.empty()) return 0;
  // sup over pairs of max_i |x_i - y_i| equals the largest coordinate range.
  std::int64_t best = 0;
  for (int a = 0; a < s.front().dim; ++a) {
    std::int32_t lo = s.front().x[a], hi = lo;
    for (const auto& p : s) {
      lo = std::min(lo, p.x[a]);
      hi = std::max(hi, p.x[a]);
    }
    best = std::max<std::int64_t>(best, static_cast<std::int64_t>(hi) - lo);
  }
  return best;
}

TreeObservables observables(const SpanningForest& f, const std::vector<Point>& s) {
  for (const auto& p : s)
    if (!f.domain.contains(p)) throw std::invalid_argument("observables: site outside domain");
  return subtree_observables(s, [&f](const Point& p) -> std::optional<Point> {
    const auto par = f.parent_index(static_cast<std::size_t>(f.domain.index_of(p)));
    if (par < 0) return std::nullopt;
    return f.domain.point_at(static_cast<std::size_t>(par));
  });
}

namespace {

constexpr const char* kForestHeader = "# ust3d-forest v1";

std::string domain_descriptor(const Domain& d) {
  std::ostringstream os;
  if (d.is_box()) {
    os << "box center=";
    for (int i = 0; i < d.dim(); ++i) os << (i ? "," : "") << d.box_shape().center.x[i];
    os << " radius=" << d.box_shape().radius;
  } else {
    os << "sites";
  }
  return os.str();
}

}  // namespace

std::string dump_forest(const SpanningForest& f) {
  std::ostringstream os;
  os << kForestHeader << " dim=" << f.domain.dim()
     << " mode=" << (f.mode == ForestMode::kWired ? "wired" : "zero-wired")
     << " sites=" << f.size() << " domain=" << domain_descriptor(f.domain) << '\n';
  for (std::size_t i = 0; i < f.size(); ++i) {
    const Point p = f.domain.point_at(i);
    for (int a = 0; a < p.dim; ++a) os << (a ? " " : "") << p.x[a];
    os << " -> ";
    const std::int64_t par = f.parent_index(i);
    if (f.is_promoted_root(i)) {
      os << "ROOT0";
    } else if (par < 0) {
      os << "ROOTB";
    } else {
      const Point q = f.domain.point_at(static_cast<std::size_t>(par));
      for (int a = 0; a < q.dim; ++a) os << (a ? " " : "") << q.x[a];
    }
    os << ' ' << (f.red[i] ? "red" : "blue");
    if (!f.is_promoted_root(i) && par < 0) os << " e=" << static_cast<int>(f.parent_dir[i]);
    os << '\n';
  }
  return os.str();
}

SpanningForest parse_forest_dump(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line.rfind(kForestHeader, 0) != 0)
    throw std::invalid_argument("forest dump: missing or unsupported header");
  std::istringstream hdr(line.substr(std::string(kForestHeader).size()));
  int dim = 3;
  ForestMode mode = ForestMode::kWired;
  std::string tok;
  while (hdr >> tok) {
    if (tok.rfind("dim=", 0) == 0) dim = std::stoi(tok.substr(4));
    if (tok == "mode=zero-wired") mode = ForestMode::kZeroWired;
  }
  struct Row {
    Point p;
    std::optional<Point> parent;
    bool root0 = false;
    int edge = -1;
    bool red = false;
  };
  std::vector<Row> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    Row r;
    r.p = Point::origin(dim);
    for (int a = 0; a < dim; ++a)
      if (!(ls >> r.p.x[a])) throw std::invalid_argument("forest dump: bad site at line " + std::to_string(lineno));
    std::string arrow;
    ls >> arrow;
    if (arrow != "->") throw std::invalid_argument("forest dump: expected '->' at line " + std::to_string(lineno));
    std::string first;
    ls >> first;
    if (first == "ROOT0") {
      r.root0 = true;
    } else if (first == "ROOTB") {
    } else {
      Point q = Point::origin(dim);
      q.x[0] = std::stoi(first);
      for (int a = 1; a < dim; ++a) ls >> q.x[a];
      r.parent = q;
    }
    std::string colour;
    ls >> colour;
    if (colour != "red" && colour != "blue")
      throw std::invalid_argument("forest dump: bad colour at line " + std::to_string(lineno));
    r.red = colour == "red";
    std::string extra;
    if (ls >> extra) {
      if (extra.rfind("e=", 0) != 0) throw std::invalid_argument("forest dump: bad edge field");
      r.edge = std::stoi(extra.substr(2));
    }
    rows.push_back(r);
  }
  std::vector<Point> pts;
  for (const auto& r : rows) pts.push_back(r.p);
  // Boxes are recognised by their descriptor so that indexing round-trips.
  Domain dom = Domain::sites(pts);
  if (text.find("domain=box") != std::string::npos) {
    std::int32_t radius = 0;
    for (const auto& p : pts) radius = std::max<std::int32_t>(radius, static_cast<std::int32_t>(linf_norm(p)));
    Domain box = Domain::box(radius, dim);
    if (box.size() == pts.size()) dom = box;
  }
  SpanningForest f{dom, mode, std::vector<std::int8_t>(pts.size()), std::vector<std::uint8_t>(pts.size())};
  for (const auto& r : rows) {
    const auto i = static_cast<std::size_t>(dom.index_of(r.p));
    f.red[i] = r.red;
    if (r.root0) {
      f.parent_dir[i] = kPromotedRoot;
    } else if (r.parent) {
      const int k = direction_between(r.p, *r.parent);
      if (k < 0) throw std::invalid_argument("forest dump: parent not adjacent");
      f.parent_dir[i] = static_cast<std::int8_t>(k);
    } else {
      if (r.edge < 0 || dom.contains(shifted(r.p, r.edge)))
        throw std::invalid_argument("forest dump: ROOTB line without a wired edge");
      f.parent_dir[i] = static_cast<std::int8_t>(r.edge);
    }
  }
  return f;
}

std::vector<ComparisonFrequencies> comparison_diagnostics(std::int32_t R,
                                                          const std::vector<double>& lambdas,
                                                          std::int64_t reps, RngSeed seed,
                                                          double beta, std::int32_t box_factor) {
  if (R < 2) throw std::invalid_argument("comparison_diagnostics: need R >= 2");
  if (reps < 1) throw std::invalid_argument("comparison_diagnostics: need reps >= 1");
  std::vector<ComparisonFrequencies> out;
  for (double l : lambdas) {
    if (!(l > 0)) throw std::invalid_argument("comparison_diagnostics: lambda must be positive");
    out.push_back({l, reps, 0, 0, 0});
  }
  const double scale = std::pow(static_cast<double>(R), beta);
  const double vol_scale = std::pow(static_cast<double>(R), 3.0 / beta);
  double r_max = static_cast<double>(R);
  for (double l : lambdas) r_max = std::max(r_max, scale / l);
  const auto bfs_limit = static_cast<std::int64_t>(std::floor(r_max));

  const Domain inner = Domain::box(R);
  const Domain outer = Domain::box(box_factor * R);
  const Point origin = Point::origin(3);

  for (std::int64_t rep = 0; rep < reps; ++rep) {
    WilsonExplorer ex(outer, ForestMode::kWired, seed.replica(static_cast<std::uint64_t>(rep)));

    // U_R: component of the origin among tree edges inside B_R.
    std::vector<std::vector<std::uint32_t>> adj(inner.size());
    for (std::size_t i = 0; i < inner.size(); ++i) ex.ensure(inner.point_at(i));
    for (std::size_t i = 0; i < inner.size(); ++i) {
      const auto par = ex.parent(inner.point_at(i));
      if (!par) continue;
      const auto j = inner.index_of(*par);
      if (j < 0) continue;
      adj[i].push_back(static_cast<std::uint32_t>(j));
      adj[static_cast<std::size_t>(j)].push_back(static_cast<std::uint32_t>(i));
    }
    std::int64_t ur_radius = 0;
    {
      std::vector<std::int64_t> dist(inner.size(), -1);
      std::vector<std::uint32_t> q{static_cast<std::uint32_t>(inner.index_of(origin))};
      dist[q[0]] = 0;
      for (std::size_t h = 0; h < q.size(); ++h) {
        const auto u = q[h];
        ur_radius = std::max(ur_radius, dist[u]);
        for (auto w : adj[u])
          if (dist[w] < 0) {
            dist[w] = dist[u] + 1;
            q.push_back(w);
          }
      }
    }

    // Intrinsic ball in the whole tree, explored breadth first.
    std::int64_t first_outside = -1;
    std::int64_t within_R = 0;
    {
      absl::flat_hash_map<Point, std::int64_t> dist;
      std::vector<Point> q{origin};
      dist.emplace(origin, 0);
      for (std::size_t h = 0; h < q.size(); ++h) {
        const Point u = q[h];
        const std::int64_t du = dist.at(u);
        if (du <= R) ++within_R;
        if (first_outside < 0 && linf_norm(u) > R) first_outside = du;
        if (du >= bfs_limit) continue;
        auto visit = [&](const Point& w) {
          if (dist.emplace(w, du + 1).second) q.push_back(w);
        };
        if (auto par = ex.parent(u)) visit(*par);
        for (int k = 0; k < 6; ++k) {
          const Point w = shifted(u, k);
          if (!outer.contains(w)) continue;
          ex.ensure(w);
          if (ex.parent(w) == u) visit(w);
        }
      }
    }

    for (auto& c : out) {
      if (static_cast<double>(ur_radius) > c.lambda * scale) ++c.ext_not_in_int;
      if (first_outside >= 0 && static_cast<double>(first_outside) <= scale / c.lambda) ++c.int_not_in_ext;
      if (static_cast<double>(within_R) >= c.lambda * vol_scale) ++c.volume_large;
    }
  }
  return out;
}

}  // namespace ust3d
