#include "ust3d/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "ust3d/greens.hpp"
#include "ust3d/randwalk.hpp"
#include "ust3d/sandpile.hpp"

namespace ust3d {

SurvivalCurve::SurvivalCurve(std::string name, std::vector<std::int64_t> ts)
    : observable(std::move(name)),
      thresholds(std::move(ts)),
      counts(thresholds.size(), 0),
      censored(thresholds.size(), 0) {
  for (std::size_t i = 1; i < thresholds.size(); ++i)
    if (thresholds[i] <= thresholds[i - 1])
      throw std::invalid_argument("SurvivalCurve: thresholds must be strictly ascending");
}

void SurvivalCurve::add(std::int64_t value, bool is_censored) {
  ++total;
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (value >= thresholds[i]) ++counts[i];
    else if (is_censored) ++censored[i];
    else break;
  }
}

void SurvivalCurve::merge(const SurvivalCurve& other) {
  if (other.thresholds != thresholds) throw std::invalid_argument("SurvivalCurve::merge: thresholds differ");
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    counts[i] += other.counts[i];
    censored[i] += other.censored[i];
  }
  total += other.total;
}

double SurvivalCurve::frequency(std::size_t i) const {
  const std::int64_t n = effective(i);
  return n > 0 ? static_cast<double>(counts[i]) / static_cast<double>(n) : 0.0;
}

double SurvivalCurve::censored_fraction(std::size_t i) const {
  return total > 0 ? static_cast<double>(censored[i]) / static_cast<double>(total) : 0.0;
}

std::string SurvivalCurve::csv() const {
  std::ostringstream os;
  os << "# ust3d-curve v1\n# observable=" << observable << "\nthreshold,exceed,total,censored\n";
  for (std::size_t i = 0; i < thresholds.size(); ++i)
    os << thresholds[i] << ',' << counts[i] << ',' << total << ',' << censored[i] << '\n';
  return os.str();
}

SurvivalCurve SurvivalCurve::from_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != "# ust3d-curve v1")
    throw std::invalid_argument("curve csv: missing or unsupported version header");
  if (!std::getline(is, line) || line.rfind("# observable=", 0) != 0)
    throw std::invalid_argument("curve csv: missing observable line");
  SurvivalCurve c;
  c.observable = line.substr(13);
  if (!std::getline(is, line) || line != "threshold,exceed,total,censored")
    throw std::invalid_argument("curve csv: bad column header");
  bool first = true;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::int64_t t, e, n, z;
    char c1, c2, c3;
    std::istringstream ls(line);
    if (!(ls >> t >> c1 >> e >> c2 >> n >> c3 >> z) || c1 != ',' || c2 != ',' || c3 != ',')
      throw std::invalid_argument("curve csv: bad row '" + line + "'");
    if (!first && n != c.total) throw std::invalid_argument("curve csv: inconsistent totals");
    first = false;
    c.total = n;
    c.thresholds.push_back(t);
    c.counts.push_back(e);
    c.censored.push_back(z);
  }
  return c;
}

ExponentFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y,
                       const std::vector<double>& weights, FitRange range) {
  if (x.size() != y.size() || x.size() != weights.size())
    throw std::invalid_argument("fit_loglog: size mismatch");
  std::vector<double> lx, ly, w;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!range.contains(x[i]) || !(x[i] > 0) || !(y[i] > 0) || !(weights[i] > 0)) continue;
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
    w.push_back(weights[i]);
  }
  if (lx.size() < 3) throw InsufficientData("fit: fewer than 3 usable points in range");
  double sw = 0, sx = 0, sy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sw += w[i];
    sx += w[i] * lx[i];
    sy += w[i] * ly[i];
  }
  const double xb = sx / sw, yb = sy / sw;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxx += w[i] * (lx[i] - xb) * (lx[i] - xb);
    sxy += w[i] * (lx[i] - xb) * (ly[i] - yb);
  }
  if (!(sxx > 0)) throw InsufficientData("fit: degenerate abscissae");
  ExponentFit f;
  f.slope = sxy / sxx;
  f.intercept = yb - f.slope * xb;
  double chi2 = 0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    const double r = ly[i] - f.intercept - f.slope * lx[i];
    chi2 += w[i] * r * r;
  }
  const double scale = std::max(1.0, chi2 / static_cast<double>(lx.size() - 2));
  f.stderr_ = std::sqrt(scale / sxx);
  f.range = range;
  f.points = lx.size();
  return f;
}

ExponentFit fit_exponent(const SurvivalCurve& curve, FitRange range, std::int64_t min_exceed) {
  std::vector<double> x, y, w;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const std::int64_t n = curve.effective(i);
    if (n <= 0 || curve.counts[i] < min_exceed) continue;
    const double p = curve.frequency(i);
    const double q = std::max(1.0 - p, 1.0 / static_cast<double>(n));
    x.push_back(static_cast<double>(curve.thresholds[i]));
    y.push_back(p);
    w.push_back(static_cast<double>(n) * p / q);
  }
  ExponentFit f = fit_loglog(x, y, w, range);
  f.target = curve.observable;
  return f;
}

// ---------------------------------------------------------------------------

void LerwSample::merge(const LerwSample& o) {
  avoid.merge(o.avoid);
  for (std::size_t i = 0; i < length_sum.size(); ++i) {
    length_sum[i] += o.length_sum[i];
    length_sumsq[i] += o.length_sumsq[i];
  }
  reps += o.reps;
}

LerwSample sample_lerw(const std::vector<std::int64_t>& radii, std::int64_t reps, RngSeed seed,
                       std::int32_t box_factor, const ExperimentOptions& opts) {
  if (radii.empty() || reps <= 0) throw std::invalid_argument("sample_lerw: need radii and reps > 0");
  if (box_factor < 4) throw std::invalid_argument("sample_lerw: box_factor must be >= 4");
  const auto rmax = static_cast<std::int32_t>(radii.back());
  const std::int32_t n_box = box_factor * rmax;
  LerwSample acc;
  acc.radii = radii;
  acc.avoid = SurvivalCurve("avoid", radii);
  acc.length_sum.assign(radii.size(), 0);
  acc.length_sumsq.assign(radii.size(), 0.0);
  const std::int32_t side = 2 * (rmax + 1) + 1;
  auto cell = [&](const Point& p) {
    return (static_cast<std::size_t>(p.x[0] + rmax + 1) * side + static_cast<std::size_t>(p.x[1] + rmax + 1)) *
               side +
           static_cast<std::size_t>(p.x[2] + rmax + 1);
  };
  const auto status = run_replicas(
      reps, opts.workers, acc,
      [&](std::int64_t r, LerwSample& a) {
        thread_local std::vector<Point> path;
        thread_local std::vector<std::uint8_t> mark;
        mark.assign(static_cast<std::size_t>(side) * side * side, 0);
        const RngSeed rs = seed.replica(static_cast<std::uint64_t>(r));
        Rng rng(rs);
        lerw_to_exit(n_box, rng, path);
        for (std::size_t i = 0; i < radii.size(); ++i) {
          const auto len = static_cast<std::int64_t>(first_exit_index(path, static_cast<std::int32_t>(radii[i])));
          a.length_sum[i] += len;
          a.length_sumsq[i] += static_cast<double>(len) * static_cast<double>(len);
        }
        for (const auto& p : path)
          if (linf_norm(p) <= rmax + 1) mark[cell(p)] = 1;
        // Independent walk from 0; m = max norm strictly before the first
        // hit of the LERW at time >= 1. S[1, tau_R] misses iff m > R.
        Rng walk(rs.substream(1));
        Point cur = Point::origin(3);
        std::int64_t m = 0;
        std::int64_t value = rmax;
        while (true) {
          cur = shifted(cur, static_cast<int>(walk.below(6)));
          const std::int64_t norm = linf_norm(cur);
          if (norm <= rmax + 1 && mark[cell(cur)]) {
            value = m - 1;
            break;
          }
          m = std::max(m, norm);
          if (norm > rmax) break;
        }
        a.avoid.add(value);
        ++a.reps;
      },
      opts.control);
  acc.stopped_early = status.stopped_early;
  return acc;
}

ExponentFit alpha_fit(const LerwSample& s, FitRange range) {
  ExponentFit f = fit_exponent(s.avoid, range);
  f.target = "-alpha";
  return f;
}

ExponentFit beta_fit(const LerwSample& s, FitRange range) {
  std::vector<double> x, y, w;
  const double n = static_cast<double>(s.reps);
  for (std::size_t i = 0; i < s.radii.size(); ++i) {
    const double mean = s.mean_length(i);
    const double var = n > 1 ? (s.length_sumsq[i] - n * mean * mean) / (n - 1) : 0.0;
    x.push_back(static_cast<double>(s.radii[i]));
    y.push_back(mean);
    // Var(log mean) ~ var / (n mean^2).
    w.push_back(var > 0 ? n * mean * mean / var : 0.0);
  }
  ExponentFit f = fit_loglog(x, y, w, range);
  f.target = "beta";
  return f;
}

ExponentFit estimate_alpha(const std::vector<std::int64_t>& radii, std::int64_t reps, RngSeed seed,
                           const ExperimentOptions& opts) {
  const auto s = sample_lerw(radii, reps, seed, 4, opts);
  return alpha_fit(s, {static_cast<double>(radii.front()), static_cast<double>(radii.back())});
}

ExponentFit estimate_beta(const std::vector<std::int64_t>& radii, std::int64_t reps, RngSeed seed,
                          const ExperimentOptions& opts) {
  const auto s = sample_lerw(radii, reps, seed, 4, opts);
  return beta_fit(s, {static_cast<double>(radii.front()), static_cast<double>(radii.back())});
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::int64_t> powers_of_two(int lo, int hi) {
  std::vector<std::int64_t> v;
  for (int k = lo; k <= hi; ++k) v.push_back(std::int64_t{1} << k);
  return v;
}

}  // namespace

TailThresholds default_tree_thresholds() {
  return {{1, 2, 4, 8, 11, 16, 23, 32, 45, 64},
          powers_of_two(0, 11),
          powers_of_two(0, 16)};
}

void TreeTails::merge(const TreeTails& o) {
  diam_ext.merge(o.diam_ext);
  diam_int.merge(o.diam_int);
  volume.merge(o.volume);
  reps += o.reps;
  censored += o.censored;
}

std::vector<Point> explore_subtree(WilsonExplorer& ex, const Point& top, bool& touches) {
  const Domain& dom = ex.domain();
  const int ndir = num_directions(dom.dim());
  std::vector<Point> s{top};
  touches = dom.touches_boundary(top);
  ex.ensure(top);
  for (std::size_t head = 0; head < s.size(); ++head) {
    const Point p = s[head];
    for (int k = 0; k < ndir; ++k) {
      const Point q = shifted(p, k);
      if (!dom.contains(q)) continue;
      const std::int8_t d = ex.ensure(q).parent_dir;
      if (d == opposite_direction(k)) {
        s.push_back(q);
        if (!touches && dom.touches_boundary(q)) touches = true;
      }
    }
  }
  return s;
}

namespace {

std::int32_t box_from_factor(const std::vector<std::int64_t>& ts, std::int32_t box_factor) {
  if (ts.empty() || box_factor < 1) throw std::invalid_argument("tails: need thresholds and box_factor >= 1");
  return static_cast<std::int32_t>(box_factor * ts.back());
}

TreeTails tree_tails(ForestMode mode, const TailThresholds& th, std::int32_t box_radius,
                     std::int64_t reps, RngSeed seed, const ExperimentOptions& opts) {
  if (reps <= 0 || box_radius < 1) throw std::invalid_argument("tails: need reps > 0 and box radius >= 1");
  TreeTails acc{SurvivalCurve("diam_ext", th.diam_ext), SurvivalCurve("diam_int", th.diam_int),
                SurvivalCurve("volume", th.volume)};
  acc.box_radius = box_radius;
  const Domain box = Domain::box(acc.box_radius, 3);
  const Point o = Point::origin(3);
  const auto status = run_replicas(
      reps, opts.workers, acc,
      [&](std::int64_t r, TreeTails& a) {
        WilsonExplorer ex(box, mode, seed.replica(static_cast<std::uint64_t>(r)), true);
        bool touches = false;
        const auto s = explore_subtree(ex, o, touches);
        const auto obs = subtree_observables(s, [&](const Point& p) { return ex.parent(p); });
        a.diam_ext.add(obs.diam_ext, touches);
        a.diam_int.add(obs.diam_int, touches);
        a.volume.add(obs.volume, touches);
        ++a.reps;
        if (touches) ++a.censored;
      },
      opts.control);
  acc.stopped_early = status.stopped_early;
  return acc;
}

}  // namespace

TreeTails past_tails(const TailThresholds& th, std::int32_t box_factor, std::int64_t reps, RngSeed seed,
                     const ExperimentOptions& opts) {
  return tree_tails(ForestMode::kWired, th, box_from_factor(th.diam_ext, box_factor), reps, seed, opts);
}

TreeTails zero_tree_tails(const TailThresholds& th, std::int32_t box_factor, std::int64_t reps,
                          RngSeed seed, const ExperimentOptions& opts) {
  return tree_tails(ForestMode::kZeroWired, th, box_from_factor(th.diam_ext, box_factor), reps, seed,
                    opts);
}

TreeTails past_tails_in(const TailThresholds& th, std::int32_t box_radius, std::int64_t reps,
                        RngSeed seed, const ExperimentOptions& opts) {
  return tree_tails(ForestMode::kWired, th, box_radius, reps, seed, opts);
}

TreeTails zero_tree_tails_in(const TailThresholds& th, std::int32_t box_radius, std::int64_t reps,
                             RngSeed seed, const ExperimentOptions& opts) {
  return tree_tails(ForestMode::kZeroWired, th, box_radius, reps, seed, opts);
}

// ---------------------------------------------------------------------------

AvalancheThresholds default_avalanche_thresholds() {
  return {{1, 2, 4, 8, 11, 16, 23, 32, 45, 64}, powers_of_two(0, 18), powers_of_two(0, 20)};
}

void AvalancheTails::merge(const AvalancheTails& o) {
  diam_ext.merge(o.diam_ext);
  cluster_size.merge(o.cluster_size);
  topplings.merge(o.topplings);
  reps += o.reps;
  censored += o.censored;
}

AvalancheTails avalanche_tails(const AvalancheThresholds& th, std::int32_t box_factor, std::int64_t reps,
                               RngSeed seed, const ExperimentOptions& opts) {
  return avalanche_tails_in(th, box_from_factor(th.diam_ext, box_factor), reps, seed, opts);
}

AvalancheTails avalanche_tails_in(const AvalancheThresholds& th, std::int32_t box_radius, std::int64_t reps,
                                  RngSeed seed, const ExperimentOptions& opts) {
  if (reps <= 0 || box_radius < 1)
    throw std::invalid_argument("avalanche_tails: need reps > 0 and box radius >= 1");
  AvalancheTails acc{SurvivalCurve("diam_ext", th.diam_ext), SurvivalCurve("cluster_size", th.cluster_size),
                     SurvivalCurve("topplings", th.topplings)};
  acc.box_radius = box_radius;
  const Domain box = Domain::box(acc.box_radius, 3);
  AvalancheOptions aopts;
  aopts.record_waves = false;
  aopts.stop_when_truncated = true;
  const auto status = run_replicas(
      reps, opts.workers, acc,
      [&](std::int64_t r, AvalancheTails& a) {
        LazySandpile pile(box, seed.replica(static_cast<std::uint64_t>(r)));
        const auto res = run_avalanche(pile, Point::origin(3), aopts);
        a.diam_ext.add(extrinsic_diameter(res.cluster), res.truncated);
        a.cluster_size.add(static_cast<std::int64_t>(res.cluster.size()), res.truncated);
        a.topplings.add(res.total, res.truncated);
        ++a.reps;
        if (res.truncated) ++a.censored;
      },
      opts.control);
  acc.stopped_early = status.stopped_early;
  return acc;
}

// ---------------------------------------------------------------------------

namespace {

struct PairedCurves {
  SurvivalCurve wave, tree;
  void merge(const PairedCurves& o) {
    wave.merge(o.wave);
    tree.merge(o.tree);
  }
};

}  // namespace

FirstWaveComparison first_wave_vs_tree(const std::vector<std::int64_t>& radii, std::int32_t box_radius,
                                       std::int64_t reps, RngSeed seed, const ExperimentOptions& opts) {
  if (radii.empty() || reps <= 0) throw std::invalid_argument("first_wave_vs_tree: need radii and reps > 0");
  const Domain box = Domain::box(box_radius, 3);
  const Point o = Point::origin(3);
  FirstWaveComparison out;
  out.box_radius = box_radius;
  out.green00 = green_finite(box, o, o).value;
  PairedCurves acc{SurvivalCurve("diam_ext_first_wave", radii), SurvivalCurve("diam_ext_zero_tree", radii)};
  AvalancheOptions aopts;
  aopts.stop_after_first_wave = true;
  const auto status = run_replicas(
      reps, opts.workers, acc,
      [&](std::int64_t r, PairedCurves& a) {
        const RngSeed rs = seed.replica(static_cast<std::uint64_t>(r));
        LazySandpile pile(box, rs.substream(1));
        const auto res = run_avalanche(pile, o, aopts);
        a.wave.add(res.waves.empty() ? 0 : extrinsic_diameter(res.waves.front()));
        WilsonExplorer ex(box, ForestMode::kZeroWired, rs.substream(2), true);
        bool touches = false;
        a.tree.add(extrinsic_diameter(explore_subtree(ex, o, touches)));
      },
      opts.control);
  out.stopped_early = status.stopped_early;
  out.wave = acc.wave;
  out.tree = acc.tree;
  for (std::size_t i = 0; i < radii.size(); ++i) {
    const double pw = out.wave.frequency(i), pt = out.tree.frequency(i);
    const double nw = static_cast<double>(out.wave.total), nt = static_cast<double>(out.tree.total);
    if (pw <= 0 || pt <= 0) {
      out.ratio.push_back(std::numeric_limits<double>::quiet_NaN());
      out.sigma.push_back(std::numeric_limits<double>::quiet_NaN());
      out.within_3sigma.push_back(false);
      continue;
    }
    const double ratio = pw / (out.green00 * pt);
    const double rel2 = (1 - pw) / (nw * pw) + (1 - pt) / (nt * pt);
    const double sigma = ratio * std::sqrt(rel2);
    out.ratio.push_back(ratio);
    out.sigma.push_back(sigma);
    out.within_3sigma.push_back(std::abs(ratio - 1.0) <= 3.0 * sigma);
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct HitCounts {
  std::vector<std::int64_t> hits;
  std::int64_t reps = 0;
  void merge(const HitCounts& o) {
    for (std::size_t i = 0; i < hits.size(); ++i) hits[i] += o.hits[i];
    reps += o.reps;
  }
};

}  // namespace

OnePointDecay zero_tree_one_point(const std::vector<std::int64_t>& radii, std::int32_t box_radius,
                                  std::int64_t reps, RngSeed seed, const ExperimentOptions& opts) {
  if (radii.empty() || reps <= 0) throw std::invalid_argument("zero_tree_one_point: need radii and reps > 0");
  for (auto r : radii)
    if (r < 1 || r > box_radius) throw std::invalid_argument("zero_tree_one_point: radius outside box");
  HitCounts acc{std::vector<std::int64_t>(radii.size(), 0)};
  const std::int32_t n = box_radius;
  const auto status = run_replicas(
      reps, opts.workers, acc,
      [&](std::int64_t r, HitCounts& a) {
        const RngSeed rs = seed.replica(static_cast<std::uint64_t>(r));
        for (std::size_t i = 0; i < radii.size(); ++i) {
          Rng rng(rs.substream(i));
          std::int32_t c[3] = {static_cast<std::int32_t>(radii[i]), 0, 0};
          while (true) {
            const std::uint32_t k = rng.below(6);
            c[k >> 1] += (k & 1) ? -1 : 1;
            if (c[k >> 1] > n || c[k >> 1] < -n) break;
            if (c[0] == 0 && c[1] == 0 && c[2] == 0) {
              ++a.hits[i];
              break;
            }
          }
        }
        ++a.reps;
      },
      opts.control);
  OnePointDecay out;
  out.radii = radii;
  out.hits = acc.hits;
  out.reps = acc.reps;
  out.box_radius = box_radius;
  out.stopped_early = status.stopped_early;
  std::vector<double> x, y, w;
  for (std::size_t i = 0; i < radii.size(); ++i) {
    const double p = acc.reps ? static_cast<double>(acc.hits[i]) / static_cast<double>(acc.reps) : 0.0;
    x.push_back(static_cast<double>(radii[i]));
    y.push_back(p);
    w.push_back(p > 0 && p < 1 ? static_cast<double>(acc.reps) * p / (1 - p) : 0.0);
  }
  if (acc.reps > 0) {
    out.fit = fit_loglog(x, y, w, {static_cast<double>(radii.front()), static_cast<double>(radii.back())});
    out.fit.target = "one_point";
  }
  return out;
}

nlohmann::json fit_json(const ExponentFit& f) {
  return {{"slope", f.slope},
          {"intercept", f.intercept},
          {"stderr", f.stderr_},
          {"range", {f.range.lo, f.range.hi}},
          {"points", f.points},
          {"target", f.target},
          {"target_value", f.target_value}};
}

}  // namespace ust3d
