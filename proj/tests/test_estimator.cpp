#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "ust3d/estimator.hpp"

using namespace ust3d;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SurvivalCurve synthetic(double slope, double amp, std::int64_t n, std::uint64_t seed) {
  SurvivalCurve c("synthetic", {2, 4, 8, 16, 32, 64, 128});
  Rng rng(RngSeed{seed, 0});
  c.total = n;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double p = amp * std::pow(static_cast<double>(c.thresholds[i]), slope);
    std::binomial_distribution<std::int64_t> bin(n, p);
    c.counts[i] = bin(rng);
  }
  return c;
}

}  // namespace

TEST_CASE("survival curve counting and censoring") {
  SurvivalCurve c("x", {0, 1, 2, 4});
  c.add(0);
  c.add(3);
  c.add(1, true);
  CHECK(c.total == 3);
  CHECK(c.counts == std::vector<std::int64_t>{3, 2, 1, 0});
  CHECK(c.censored == std::vector<std::int64_t>{0, 0, 1, 1});
  CHECK(c.frequency(0) == 1.0);
  CHECK(c.frequency(2) == doctest::Approx(0.5));
  CHECK(c.effective(3) == 2);
  CHECK_THROWS_AS(SurvivalCurve("bad", {2, 2}), std::invalid_argument);
}

TEST_CASE("censoring never raises the reported frequency") {
  Rng rng(RngSeed{50, 0});
  const std::vector<std::int64_t> ts{1, 2, 4, 8, 16, 32};
  for (int trial = 0; trial < 200; ++trial) {
    SurvivalCurve cens("c", ts), upper("u", ts);
    for (int i = 0; i < 40; ++i) {
      const std::int64_t v = rng.below(40);
      const bool is_c = rng.below(4) == 0;
      cens.add(v, is_c);
      upper.add(is_c ? 1000 : v);
    }
    for (std::size_t i = 0; i < ts.size(); ++i) {
      CHECK(cens.frequency(i) <= upper.frequency(i) + 1e-15);
      if (i) CHECK(cens.counts[i] <= cens.counts[i - 1]);
      CHECK(cens.counts[i] <= cens.total);
    }
  }
}

TEST_CASE("merge is associative and commutative") {
  const std::vector<std::int64_t> ts{1, 3, 9};
  SurvivalCurve a("m", ts), b("m", ts), c("m", ts);
  for (int v : {0, 2, 5, 11}) a.add(v);
  for (int v : {1, 9}) b.add(v, true);
  for (int v : {3, 4, 40}) c.add(v, v == 4);
  SurvivalCurve ab = a;
  ab.merge(b);
  ab.merge(c);
  SurvivalCurve cb = c;
  cb.merge(b);
  cb.merge(a);
  SurvivalCurve bc = b;
  bc.merge(c);
  SurvivalCurve a_bc = a;
  a_bc.merge(bc);
  CHECK(ab.counts == cb.counts);
  CHECK(ab.censored == cb.censored);
  CHECK(ab.total == cb.total);
  CHECK(ab.counts == a_bc.counts);
  CHECK_THROWS_AS(a.merge(SurvivalCurve("m", {1, 3})), std::invalid_argument);
}

TEST_CASE("curve CSV is pinned by a golden file") {
  SurvivalCurve c("diam_ext", {1, 2, 4, 8});
  for (int v : {0, 1, 2, 3, 5, 9}) c.add(v);
  c.add(3, true);
  const auto text = c.csv();
  CHECK(text == read_file(UST3D_TEST_DATA "/golden/curve_v1.csv"));
  const auto back = SurvivalCurve::from_csv(text);
  CHECK(back == c);
  CHECK_THROWS(SurvivalCurve::from_csv("threshold,exceed\n1,2\n"));
}

TEST_CASE("log-log fits on synthetic data") {
  std::vector<double> x, y, w;
  for (double t : {1.0, 2.0, 4.0, 8.0, 16.0}) {
    x.push_back(t);
    y.push_back(3.0 * std::pow(t, -2.0));
    w.push_back(1.0);
  }
  const auto f = fit_loglog(x, y, w, {1, 16});
  CHECK(f.slope == doctest::Approx(-2.0).epsilon(1e-12));
  CHECK(f.intercept == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  // Unit weights are unit variances: the error is 1/sqrt(Sxx), not zero.
  CHECK(f.stderr_ == doctest::Approx(1.0 / std::sqrt(10.0 * std::log(2.0) * std::log(2.0))));
  CHECK(f.points == 5);
  CHECK_THROWS_AS(fit_loglog(x, y, w, {1, 2}), InsufficientData);

  SurvivalCurve flat("flat", {1, 2, 4, 8});
  for (int i = 0; i < 100; ++i) flat.add(100);
  CHECK(fit_exponent(flat, {1, 8}).slope == doctest::Approx(0.0));

  int within = 0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto fit = fit_exponent(synthetic(-0.5, 0.9, 20000, s), {2, 128});
    within += std::abs(fit.slope + 0.5) <= 3 * fit.stderr_;
    CHECK(fit.stderr_ < 0.05);
  }
  CHECK(within >= 9);

  SurvivalCurve thin("thin", {1, 2, 4, 8});
  for (int v : {1, 2, 4, 8}) thin.add(v);
  CHECK_THROWS_AS(fit_exponent(thin, {1, 8}), InsufficientData);
}

TEST_CASE("loop-erased walk sampler") {
  const std::vector<std::int64_t> radii{1, 2, 4, 8};
  const auto a = sample_lerw(radii, 300, RngSeed{51, 0});
  CHECK(a.reps == 300);
  CHECK(a.mean_length(0) >= 1.0);
  for (std::size_t i = 1; i < radii.size(); ++i) CHECK(a.mean_length(i) > a.mean_length(i - 1));
  CHECK(a.avoid.frequency(0) > 0.0);
  CHECK(a.avoid.frequency(0) < 1.0);
  const auto b = sample_lerw(radii, 300, RngSeed{51, 0}, 4, {2, {}});
  CHECK(a.avoid == b.avoid);
  CHECK(a.length_sum == b.length_sum);
  const auto c = sample_lerw(radii, 300, RngSeed{52, 0});
  CHECK_FALSE(a.length_sum == c.length_sum);
}

TEST_CASE("tree tails") {
  TailThresholds th{{0, 1, 2, 4}, {0, 1, 2, 4, 8}, {1, 2, 4, 8}};
  const auto p = past_tails(th, 4, 200, RngSeed{53, 0});
  CHECK(p.box_radius == 16);
  CHECK(p.diam_ext.counts[0] == p.reps);
  CHECK(p.volume.counts[0] == p.reps);
  const auto q = past_tails(th, 4, 200, RngSeed{53, 0}, {3, {}});
  CHECK(p.diam_ext == q.diam_ext);
  CHECK(p.diam_int == q.diam_int);
  CHECK(p.volume == q.volume);
  const auto z = zero_tree_tails(th, 4, 200, RngSeed{54, 0});
  CHECK(z.diam_ext.counts[0] == z.reps);
  for (std::size_t i = 0; i < th.diam_ext.size(); ++i)
    CHECK(z.diam_int.counts[i] >= z.diam_ext.counts[i]);
}

TEST_CASE("avalanche tails") {
  AvalancheThresholds th{{1, 2, 4}, {1, 2, 4, 8}, {1, 2, 4, 8}};
  const auto t = avalanche_tails(th, 4, 500, RngSeed{55, 0});
  CHECK(t.reps == 500);
  // Empty avalanches never exceed a positive threshold.
  CHECK(t.topplings.counts[0] == t.cluster_size.counts[0]);
  CHECK(t.topplings.counts[0] < t.reps);
  CHECK(t.diam_ext.counts[0] <= t.cluster_size.counts[0]);
  for (std::size_t i = 0; i < 4; ++i) CHECK(t.topplings.counts[i] >= t.cluster_size.counts[i]);
}

TEST_CASE("first wave against the 0-tree in a small box") {
  const auto cmp = first_wave_vs_tree({1, 2}, 4, 4000, RngSeed{56, 0});
  CHECK(cmp.green00 > 0.2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(cmp.wave.counts[i] > 0);
    CHECK(cmp.within_3sigma[i]);
  }
}

TEST_CASE("one-point decay of the 0-tree") {
  const auto o = zero_tree_one_point({1, 2, 4}, 16, 3000, RngSeed{57, 0});
  CHECK(o.hits[0] > o.hits[1]);
  CHECK(o.hits[1] > o.hits[2]);
  CHECK(o.fit.slope < -0.5);
}
