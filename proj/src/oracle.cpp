#include "ust3d/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <absl/container/flat_hash_map.h>
#include <boost/math/distributions/chi_squared.hpp>

#include "ust3d/greens.hpp"

namespace ust3d {

SpanningForest ForestList::at(std::size_t t) const {
  SpanningForest f{domain, mode, std::vector<std::int8_t>(dirs_of(t), dirs_of(t) + sites()), {}};
  recolour(f);
  return f;
}

SandpileConfig ConfigList::at(std::size_t t) const {
  const std::size_t n = domain.size();
  std::vector<std::int32_t> h(heights.begin() + static_cast<std::ptrdiff_t>(t * n),
                              heights.begin() + static_cast<std::ptrdiff_t>((t + 1) * n));
  return SandpileConfig(domain, std::move(h));
}

namespace {

std::vector<std::int64_t> neighbour_table(const Domain& k) {
  const int ndir = num_directions(k.dim());
  std::vector<std::int64_t> nbr(k.size() * static_cast<std::size_t>(ndir));
  for (std::size_t i = 0; i < k.size(); ++i) {
    const Point p = k.point_at(i);
    for (int d = 0; d < ndir; ++d) nbr[i * ndir + d] = k.index_of(shifted(p, d));
  }
  return nbr;
}

ForestList enumerate_forests(const Domain& k, ForestMode mode) {
  const std::size_t n = k.size();
  if (n > kMaxTreeSites) throw std::invalid_argument("enumerate: instance too large");
  const int ndir = num_directions(k.dim());
  const auto nbr = neighbour_table(k);
  std::int64_t root = -1;
  if (mode == ForestMode::kZeroWired) {
    root = k.index_of(Point::origin(k.dim()));
    if (root < 0) throw std::invalid_argument("enumerate: origin not in domain");
  }
  ForestList out{k, mode, {}};
  std::vector<std::int8_t> dirs(n, kPromotedRoot);
  auto parent = [&](std::size_t u) -> std::int64_t {
    if (static_cast<std::int64_t>(u) == root) return -1;
    return nbr[u * ndir + static_cast<std::size_t>(dirs[u])];
  };
  // Sites are assigned in index order; a cycle is caught when its last
  // member is assigned.
  std::function<void(std::size_t)> assign = [&](std::size_t i) {
    if (i == n) {
      out.dirs.insert(out.dirs.end(), dirs.begin(), dirs.end());
      return;
    }
    if (static_cast<std::int64_t>(i) == root) {
      dirs[i] = kPromotedRoot;
      assign(i + 1);
      return;
    }
    for (int d = 0; d < ndir; ++d) {
      std::int64_t u = nbr[i * ndir + d];
      while (u >= 0 && static_cast<std::size_t>(u) < i) u = parent(static_cast<std::size_t>(u));
      if (u == static_cast<std::int64_t>(i)) continue;
      dirs[i] = static_cast<std::int8_t>(d);
      assign(i + 1);
    }
  };
  assign(0);
  return out;
}

std::uint64_t config_key(const std::int32_t* h, std::size_t n, std::uint64_t base) {
  std::uint64_t key = 0;
  for (std::size_t i = 0; i < n; ++i) key = key * base + static_cast<std::uint64_t>(h[i]);
  return key;
}

}  // namespace

ForestList enumerate_trees(const Domain& k) { return enumerate_forests(k, ForestMode::kWired); }

ForestList enumerate_two_forests(const Domain& k) {
  return enumerate_forests(k, ForestMode::kZeroWired);
}

ConfigList enumerate_recurrent(const Domain& k) {
  const std::size_t n = k.size();
  if (n > kMaxRecurrentSites) throw std::invalid_argument("enumerate_recurrent: instance too large");
  ConfigList out{k, {}};
  SandpileConfig c(k);
  const std::int32_t cap = c.threshold();
  while (true) {
    if (is_recurrent(c))
      for (auto h : c.height) out.heights.push_back(static_cast<std::uint8_t>(h));
    std::size_t i = 0;
    while (i < n && ++c.height[i] == cap) c.height[i++] = 0;
    if (i == n) break;
  }
  return out;
}

std::uint64_t forest_key(const std::int8_t* dirs, std::size_t n) {
  std::uint64_t key = 0;
  for (std::size_t i = 0; i < n; ++i) key = key * 7 + static_cast<std::uint64_t>(dirs[i] + 1);
  return key;
}

std::uint64_t forest_key(const SpanningForest& f) { return forest_key(f.parent_dir.data(), f.size()); }

TinyInstance make_tiny_instance(std::string name, const Domain& k) {
  TinyInstance inst{std::move(name), k, enumerate_trees(k), ForestList{k, ForestMode::kZeroWired, {}},
                    ConfigList{k, {}}};
  if (k.contains(Point::origin(k.dim()))) inst.two_forests = enumerate_two_forests(k);
  if (k.size() <= kMaxRecurrentSites) inst.recurrent = enumerate_recurrent(k);
  return inst;
}

std::vector<std::pair<std::string, Domain>> shipped_instances() {
  std::vector<Point> block;
  for (int a = 0; a <= 1; ++a)
    for (int b = 0; b <= 1; ++b)
      for (int c = 0; c <= 1; ++c) block.emplace_back(a, b, c);
  return {{"single", single_site()},
          {"pair", two_site()},
          {"plus", plus_shape()},
          {"block", Domain::sites(block)}};
}

BijectionReport verify_bijection(const TinyInstance& inst) {
  BijectionReport r;
  r.name = inst.name;
  const std::size_t n = inst.domain.size();
  r.determinant = toppling_determinant(inst.domain);
  r.trees = inst.trees.count();
  r.recurrent = inst.recurrent.count();
  r.counts_match = r.trees == r.recurrent && mpz_class(static_cast<unsigned long>(r.trees)) == r.determinant;

  const auto base = static_cast<std::uint64_t>(2 * inst.domain.dim());
  absl::flat_hash_map<std::uint64_t, std::size_t> position;
  std::vector<std::int32_t> h(n);
  for (std::size_t t = 0; t < r.recurrent; ++t) {
    for (std::size_t i = 0; i < n; ++i) h[i] = inst.recurrent.heights[t * n + i];
    position.emplace(config_key(h.data(), n, base), t);
  }
  std::vector<std::uint8_t> hit(r.recurrent, 0);
  r.images_recurrent = r.injective = r.round_trip = true;
  SpanningForest f{inst.domain, ForestMode::kWired, std::vector<std::int8_t>(n), {}};
  for (std::size_t t = 0; t < r.trees; ++t) {
    std::copy(inst.trees.dirs_of(t), inst.trees.dirs_of(t) + n, f.parent_dir.begin());
    const SandpileConfig c = md_bijection(f);
    auto it = position.find(config_key(c.height.data(), n, base));
    if (it == position.end() || !is_recurrent(c)) {
      r.images_recurrent = false;
      continue;
    }
    if (hit[it->second]++) r.injective = false;
    if (md_inverse(c).parent_dir != f.parent_dir) r.round_trip = false;
  }
  r.surjective = std::all_of(hit.begin(), hit.end(), [](std::uint8_t x) { return x > 0; });
  return r;
}

std::vector<EventClass> standard_event_classes() {
  return {
      {"size>=2", [](const std::vector<Point>& a) { return a.size() >= 2; }},
      {"diam_ext>=1", [](const std::vector<Point>& a) { return extrinsic_diameter(a) >= 1; }},
      {"all", [](const std::vector<Point>&) { return true; }},
      {"size>=3", [](const std::vector<Point>& a) { return a.size() >= 3; }},
      {"diam_ext>=2", [](const std::vector<Point>& a) { return extrinsic_diameter(a) >= 2; }},
  };
}

bool FirstWaveReport::passed() const {
  return green_ratio_equal && per_set_equal &&
         std::all_of(classes.begin(), classes.end(), [](const IdentityCheck& c) { return c.equal; });
}

FirstWaveReport verify_first_wave_identity(const TinyInstance& inst) {
  return verify_first_wave_identity(inst, standard_event_classes());
}

FirstWaveReport verify_first_wave_identity(const TinyInstance& inst,
                                           const std::vector<EventClass>& classes) {
  const Domain& k = inst.domain;
  const std::size_t n = k.size();
  const Point o = Point::origin(k.dim());
  if (!k.contains(o) || k.wired_degree(o) != 0)
    throw std::invalid_argument("first-wave identity: K must contain 0 and its neighbours");
  if (inst.recurrent.count() == 0 || inst.two_forests.count() == 0)
    throw std::invalid_argument("first-wave identity: instance too large");

  std::uint32_t nbr_mask = 0;
  for (const auto& q : neighbors(o)) nbr_mask |= 1u << k.index_of(q);
  auto points_of = [&](std::uint32_t mask) {
    std::vector<Point> s;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1u) s.push_back(k.point_at(i));
    return s;
  };

  absl::flat_hash_map<std::uint32_t, std::int64_t> wave_count, tree_count;
  SandpileConfig c(k);
  AvalancheOptions opts;
  opts.stop_after_first_wave = true;
  for (std::size_t t = 0; t < inst.recurrent.count(); ++t) {
    for (std::size_t i = 0; i < n; ++i) c.height[i] = inst.recurrent.heights[t * n + i];
    DenseHeights field{c};
    const auto res = run_avalanche(field, o, opts);
    std::uint32_t mask = 0;
    if (!res.waves.empty())
      for (const auto& p : res.waves.front()) mask |= 1u << k.index_of(p);
    ++wave_count[mask];
  }
  const auto root = static_cast<std::size_t>(k.index_of(o));
  const auto nbr = neighbour_table(k);
  const int ndir = num_directions(k.dim());
  for (std::size_t t = 0; t < inst.two_forests.count(); ++t) {
    const std::int8_t* dirs = inst.two_forests.dirs_of(t);
    std::uint32_t mask = 0;
    for (std::size_t i = 0; i < n; ++i) {
      std::int64_t u = static_cast<std::int64_t>(i);
      while (u >= 0 && static_cast<std::size_t>(u) != root)
        u = nbr[static_cast<std::size_t>(u) * ndir + static_cast<std::size_t>(dirs[u])];
      if (u >= 0) mask |= 1u << i;
    }
    ++tree_count[mask];
  }

  FirstWaveReport r;
  r.name = inst.name;
  r.recurrent_count = static_cast<unsigned long>(inst.recurrent.count());
  const mpz_class forests = static_cast<unsigned long>(inst.two_forests.count());
  std::vector<Point> rest;
  for (const auto& p : k.points())
    if (p != o) rest.push_back(p);
  r.reduced_count = toppling_determinant(Domain::sites(rest));
  r.green00 = *green_finite(k, o, o).exact;
  mpq_class ratio(r.reduced_count, r.recurrent_count);
  ratio.canonicalize();
  r.green_ratio_equal = forests == r.reduced_count && ratio == r.green00;

  auto wave_prob = [&](std::int64_t cnt) {
    mpq_class q(cnt, r.recurrent_count);
    q.canonicalize();
    return q;
  };
  auto tree_prob = [&](std::int64_t cnt) {
    mpq_class q(cnt, forests);
    q.canonicalize();
    return mpq_class(r.green00 * q);
  };
  for (const auto& cls : classes) {
    std::int64_t w = 0, tr = 0;
    for (const auto& [mask, cnt] : wave_count)
      if ((mask & nbr_mask) && cls.pred(points_of(mask))) w += cnt;
    for (const auto& [mask, cnt] : tree_count)
      if ((mask & nbr_mask) && cls.pred(points_of(mask))) tr += cnt;
    IdentityCheck ic{cls.name, wave_prob(w), tree_prob(tr), false};
    ic.equal = ic.wave_side == ic.tree_side;
    r.classes.push_back(std::move(ic));
  }
  std::vector<std::uint32_t> sets;
  for (const auto& [mask, cnt] : wave_count)
    if (mask & nbr_mask) sets.push_back(mask);
  for (const auto& [mask, cnt] : tree_count)
    if ((mask & nbr_mask) && !wave_count.contains(mask)) sets.push_back(mask);
  r.sets_checked = sets.size();
  r.per_set_equal = true;
  for (auto mask : sets) {
    auto w = wave_count.find(mask);
    auto tr = tree_count.find(mask);
    const std::int64_t wc = w == wave_count.end() ? 0 : w->second;
    const std::int64_t tc = tr == tree_count.end() ? 0 : tr->second;
    if (wave_prob(wc) != tree_prob(tc)) r.per_set_equal = false;
  }
  return r;
}

namespace {

double chi2_pvalue(double stat, std::int64_t dof) {
  if (dof <= 0) return 1.0;
  boost::math::chi_squared dist(static_cast<double>(dof));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

// Groups cell indices, in order of increasing weight, into consecutive runs
// whose weights reach `floor`.
std::vector<std::vector<std::size_t>> merge_cells(const std::vector<double>& weight, double floor) {
  std::vector<std::size_t> order(weight.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return weight[a] < weight[b]; });
  std::vector<std::vector<std::size_t>> groups;
  std::vector<std::size_t> cur;
  double acc = 0.0;
  for (auto i : order) {
    cur.push_back(i);
    acc += weight[i];
    if (acc >= floor) {
      groups.push_back(std::move(cur));
      cur.clear();
      acc = 0.0;
    }
  }
  if (!cur.empty()) {
    if (groups.empty()) groups.push_back(std::move(cur));
    else groups.back().insert(groups.back().end(), cur.begin(), cur.end());
  }
  return groups;
}

}  // namespace

ChiSquare chi_square(const std::vector<std::int64_t>& counts, const std::vector<double>& expected) {
  if (counts.size() != expected.size() || counts.empty())
    throw std::invalid_argument("chi_square: size mismatch or empty support");
  double psum = 0.0;
  std::int64_t total = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (expected[i] < 0 || counts[i] < 0) throw std::invalid_argument("chi_square: negative entry");
    if (expected[i] == 0 && counts[i] > 0) throw std::invalid_argument("chi_square: count on zero-probability cell");
    psum += expected[i];
    total += counts[i];
  }
  if (std::abs(psum - 1.0) > 1e-9) throw std::invalid_argument("chi_square: probabilities must sum to 1");
  if (total == 0) throw std::invalid_argument("chi_square: no samples");
  std::vector<double> e(counts.size());
  for (std::size_t i = 0; i < e.size(); ++i) e[i] = expected[i] * static_cast<double>(total);
  const auto groups = merge_cells(e, 5.0);
  ChiSquare out;
  out.cells = groups.size();
  for (const auto& g : groups) {
    double o = 0.0, ex = 0.0;
    for (auto i : g) {
      o += static_cast<double>(counts[i]);
      ex += e[i];
    }
    if (ex > 0) out.statistic += (o - ex) * (o - ex) / ex;
  }
  out.dof = static_cast<std::int64_t>(groups.size()) - 1;
  out.p_value = chi2_pvalue(out.statistic, out.dof);
  return out;
}

ChiSquare chi_square_two_sample(const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b) {
  if (a.size() != b.size() || a.empty()) throw std::invalid_argument("chi_square_two_sample: size mismatch");
  const double na = std::accumulate(a.begin(), a.end(), 0.0);
  const double nb = std::accumulate(b.begin(), b.end(), 0.0);
  if (na == 0 || nb == 0) throw std::invalid_argument("chi_square_two_sample: empty sample");
  std::vector<double> pooled(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) pooled[i] = static_cast<double>(a[i] + b[i]);
  // Expected per sample is pooled * share; ask for >= 5 in the smaller one.
  const double floor = 5.0 * (na + nb) / std::min(na, nb);
  const auto groups = merge_cells(pooled, floor);
  ChiSquare out;
  out.cells = groups.size();
  for (const auto& g : groups) {
    double oa = 0, ob = 0;
    for (auto i : g) {
      oa += static_cast<double>(a[i]);
      ob += static_cast<double>(b[i]);
    }
    const double tot = oa + ob;
    if (tot == 0) continue;
    const double ea = tot * na / (na + nb), eb = tot * nb / (na + nb);
    out.statistic += (oa - ea) * (oa - ea) / ea + (ob - eb) * (ob - eb) / eb;
  }
  out.dof = static_cast<std::int64_t>(groups.size()) - 1;
  out.p_value = chi2_pvalue(out.statistic, out.dof);
  return out;
}

nlohmann::json bijection_json(const BijectionReport& r) {
  return {{"instance", r.name},
          {"determinant", r.determinant.get_str()},
          {"trees", r.trees},
          {"recurrent", r.recurrent},
          {"counts_match", r.counts_match},
          {"images_recurrent", r.images_recurrent},
          {"injective", r.injective},
          {"surjective", r.surjective},
          {"round_trip", r.round_trip},
          {"passed", r.passed()}};
}

nlohmann::json first_wave_json(const FirstWaveReport& r) {
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& c : r.classes)
    classes.push_back({{"event", c.event},
                       {"wave_side", rational_string(c.wave_side)},
                       {"tree_side", rational_string(c.tree_side)},
                       {"equal", c.equal}});
  return {{"instance", r.name},
          {"recurrent_count", r.recurrent_count.get_str()},
          {"reduced_count", r.reduced_count.get_str()},
          {"green00", rational_string(r.green00)},
          {"green_ratio_equal", r.green_ratio_equal},
          {"classes", classes},
          {"sets_checked", r.sets_checked},
          {"per_set_equal", r.per_set_equal},
          {"passed", r.passed()}};
}

nlohmann::json chi_square_json(const ChiSquare& c) {
  return {{"statistic", c.statistic}, {"p_value", c.p_value}, {"dof", c.dof}, {"cells", c.cells}};
}

}  // namespace ust3d
