#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ust3d/forest.hpp"
#include "ust3d/lattice.hpp"
#include "ust3d/parallel.hpp"
#include "ust3d/rng.hpp"

namespace ust3d {

/// Exceedance counts of an observable over an ascending threshold grid.
///
/// A censored sample with observed value v is a lower bound on the true
/// value: it counts as an exceedance at every threshold t <= v and is
/// removed from numerator and denominator at every t > v. The reported
/// frequency is therefore never above the one obtained by treating the
/// censored sample as exceeding everything.
struct SurvivalCurve {
  std::string observable;
  std::vector<std::int64_t> thresholds;
  std::vector<std::int64_t> counts;
  std::vector<std::int64_t> censored;
  std::int64_t total = 0;

  SurvivalCurve() = default;
  SurvivalCurve(std::string name, std::vector<std::int64_t> ts);

  void add(std::int64_t value, bool is_censored = false);
  /// Throws std::invalid_argument on mismatched thresholds.
  void merge(const SurvivalCurve& other);
  std::size_t size() const { return thresholds.size(); }
  std::int64_t effective(std::size_t i) const { return total - censored[i]; }
  double frequency(std::size_t i) const;
  /// Censored fraction at threshold i.
  double censored_fraction(std::size_t i) const;

  /// "# ust3d-curve v1" header, "# observable=<name>", then
  /// "threshold,exceed,total,censored" rows.
  std::string csv() const;
  static SurvivalCurve from_csv(const std::string& text);

  friend bool operator==(const SurvivalCurve&, const SurvivalCurve&) = default;
};

struct FitRange {
  double lo = 0.0;
  double hi = 0.0;
  bool contains(double t) const { return t >= lo && t <= hi; }
};

struct ExponentFit {
  double slope = 0.0;
  double intercept = 0.0;
  double stderr_ = 0.0;
  FitRange range;
  std::size_t points = 0;
  std::string target;
  double target_value = 0.0;
};

class InsufficientData : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Weighted least squares of log y on log x over points with x in range.
/// `weights` are inverse variances of log y. The slope error is scaled up by
/// sqrt(chi2/dof) when that exceeds 1. Throws InsufficientData with fewer
/// than 3 points.
ExponentFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y,
                       const std::vector<double>& weights, FitRange range);

/// Log-log fit of a survival curve with binomial weights n p / (1 - p),
/// using thresholds in range with at least `min_exceed` exceedances.
ExponentFit fit_exponent(const SurvivalCurve& curve, FitRange range, std::int64_t min_exceed = 50);

struct ExperimentOptions {
  int workers = 1;
  RunControl control;
};

/// One loop-erased walk per replica, run until it leaves B_N with
/// N = box_factor * max(R), plus one independent walk from 0.
struct LerwSample {
  std::vector<std::int64_t> radii;
  /// Exceeds R iff the independent walk S[1, tau_R] misses the LERW.
  SurvivalCurve avoid;
  /// Number of steps of the LERW before its first exit of B_R.
  std::vector<std::int64_t> length_sum;
  std::vector<double> length_sumsq;
  std::int64_t reps = 0;
  bool stopped_early = false;

  double mean_length(std::size_t i) const { return reps ? double(length_sum[i]) / reps : 0.0; }
  void merge(const LerwSample& o);
};

LerwSample sample_lerw(const std::vector<std::int64_t>& radii, std::int64_t reps, RngSeed seed,
                       std::int32_t box_factor = 4, const ExperimentOptions& opts = {});

/// Slope of the avoidance probability (about -alpha).
ExponentFit alpha_fit(const LerwSample& s, FitRange range);
/// Slope of the mean LERW length (about beta).
ExponentFit beta_fit(const LerwSample& s, FitRange range);

ExponentFit estimate_alpha(const std::vector<std::int64_t>& radii, std::int64_t reps, RngSeed seed,
                           const ExperimentOptions& opts = {});
ExponentFit estimate_beta(const std::vector<std::int64_t>& radii, std::int64_t reps, RngSeed seed,
                          const ExperimentOptions& opts = {});

struct TailThresholds {
  std::vector<std::int64_t> diam_ext;
  std::vector<std::int64_t> diam_int;
  std::vector<std::int64_t> volume;
};

TailThresholds default_tree_thresholds();

/// Survival curves of a random subtree (past of the origin or 0-tree).
struct TreeTails {
  SurvivalCurve diam_ext;
  SurvivalCurve diam_int;
  SurvivalCurve volume;
  std::int32_t box_radius = 0;
  std::int64_t reps = 0;
  std::int64_t censored = 0;  ///< samples touching the box boundary
  bool stopped_early = false;
  void merge(const TreeTails& o);
};

/// Sites of the subtree below `top` (inclusive), found by asking the
/// explorer for every neighbour of every subtree site. `touches` reports
/// whether a subtree site is adjacent to the boundary.
std::vector<Point> explore_subtree(WilsonExplorer& ex, const Point& top, bool& touches);

/// Past of the origin in the wired UST of Box(0, box_factor * max diam_ext
/// threshold); samples touching the boundary are censored.
TreeTails past_tails(const TailThresholds& th, std::int32_t box_factor, std::int64_t reps,
                     RngSeed seed, const ExperimentOptions& opts = {});

/// Same for the 0-tree of the 0-WUSF.
TreeTails zero_tree_tails(const TailThresholds& th, std::int32_t box_factor, std::int64_t reps,
                          RngSeed seed, const ExperimentOptions& opts = {});

/// As above with an explicit box radius.
TreeTails past_tails_in(const TailThresholds& th, std::int32_t box_radius, std::int64_t reps,
                        RngSeed seed, const ExperimentOptions& opts = {});
TreeTails zero_tree_tails_in(const TailThresholds& th, std::int32_t box_radius, std::int64_t reps,
                             RngSeed seed, const ExperimentOptions& opts = {});

struct AvalancheThresholds {
  std::vector<std::int64_t> diam_ext;
  std::vector<std::int64_t> cluster_size;
  std::vector<std::int64_t> topplings;
};

AvalancheThresholds default_avalanche_thresholds();

struct AvalancheTails {
  SurvivalCurve diam_ext;      ///< diam_ext(AvC)
  SurvivalCurve cluster_size;  ///< |AvC|
  SurvivalCurve topplings;     ///< Av
  std::int32_t box_radius = 0;
  std::int64_t reps = 0;
  std::int64_t censored = 0;  ///< truncated avalanches
  bool stopped_early = false;
  void merge(const AvalancheTails& o);
};

/// One grain at 0 on a uniform recurrent configuration of Box(0,
/// box_factor * max diam_ext threshold); truncated avalanches are censored.
AvalancheTails avalanche_tails(const AvalancheThresholds& th, std::int32_t box_factor,
                               std::int64_t reps, RngSeed seed, const ExperimentOptions& opts = {});
AvalancheTails avalanche_tails_in(const AvalancheThresholds& th, std::int32_t box_radius,
                                  std::int64_t reps, RngSeed seed, const ExperimentOptions& opts = {});

struct FirstWaveComparison {
  std::int32_t box_radius = 0;
  double green00 = 0.0;
  SurvivalCurve wave;  ///< diam_ext(W_1)
  SurvivalCurve tree;  ///< diam_ext(0-tree)
  std::vector<double> ratio;
  std::vector<double> sigma;
  std::vector<bool> within_3sigma;
  bool stopped_early = false;
};

/// P(diam_ext(W_1) >= R) against G_K(0,0) P(diam_ext(T_K) >= R) in K =
/// Box(0, N), with binomial error bars on both sides.
FirstWaveComparison first_wave_vs_tree(const std::vector<std::int64_t>& radii, std::int32_t box_radius,
                                       std::int64_t reps, RngSeed seed, const ExperimentOptions& opts = {});

struct OnePointDecay {
  std::vector<std::int64_t> radii;
  std::vector<std::int64_t> hits;
  std::int64_t reps = 0;
  std::int32_t box_radius = 0;
  ExponentFit fit;
  bool stopped_early = false;
};

/// P_0(R e1 in T) in Box(0, box_radius): R e1 joins the 0-tree iff the
/// Wilson branch started there reaches 0 before the boundary.
OnePointDecay zero_tree_one_point(const std::vector<std::int64_t>& radii, std::int32_t box_radius,
                                  std::int64_t reps, RngSeed seed, const ExperimentOptions& opts = {});

nlohmann::json fit_json(const ExponentFit& f);

}  // namespace ust3d
