#include <doctest.h>

#include <map>

#include "oracles.hpp"
#include "ust3d/oracle.hpp"
#include "ust3d/sandpile.hpp"

using namespace ust3d;

namespace {

SandpileConfig all_heights(const Domain& d, std::int32_t h) {
  return SandpileConfig(d, std::vector<std::int32_t>(d.size(), h));
}

}  // namespace

TEST_CASE("topple") {
  auto single = all_heights(single_site(), 6);
  CHECK(topple(single, Point::origin()).height == std::vector<std::int32_t>{0});

  const auto box = Domain::box(2);
  auto c = all_heights(box, 0);
  c.at(Point::origin()) = 6;
  const auto t = topple(c, Point::origin());
  CHECK(t.at(Point::origin()) == 0);
  for (const auto& n : neighbors(Point::origin())) CHECK(t.at(n) == 1);
  CHECK(t.mass() == 6);

  auto corner = all_heights(box, 0);
  corner.at(Point{2, 2, 2}) = 6;
  const auto tc = topple(corner, Point{2, 2, 2});
  CHECK(tc.mass() == 3);
  CHECK(tc.at(Point{1, 2, 2}) == 1);
  CHECK_THROWS_AS(topple(all_heights(box, 5), Point::origin()), std::invalid_argument);
}

TEST_CASE("stabilize examples") {
  const auto box = Domain::box(1);
  const auto stable = all_heights(box, 3);
  const auto r = stabilize(stable);
  CHECK(r.config == stable);
  CHECK(std::all_of(r.odometer.begin(), r.odometer.end(), [](auto n) { return n == 0; }));

  const auto s = stabilize(all_heights(single_site(), 7));
  CHECK(s.config.height == std::vector<std::int32_t>{1});
  CHECK(s.odometer == std::vector<std::int64_t>{1});
  CHECK(s.grains_lost == 6);

  const auto plus = plus_shape();
  auto c = all_heights(plus, 5);
  c.at(Point::origin()) += 1;
  const auto got = stabilize(c);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(RngSeed{30, seed});
    const auto [h, odo] = oracle_ref::random_order_stabilize(plus, c.height, rng);
    CHECK(got.config.height == h);
    CHECK(got.odometer == odo);
  }
}

TEST_CASE("abelian property and conservation") {
  const auto box = Domain::box(2);
  Rng rng(RngSeed{31, 0});
  for (int i = 0; i < 30; ++i) {
    SandpileConfig c(box);
    for (auto& h : c.height) h = static_cast<std::int32_t>(rng.below(9));
    const auto got = stabilize(c);
    CHECK(got.config.is_stable());
    CHECK(got.config.mass() == c.mass() - got.grains_lost);
    for (int k = 0; k < 3; ++k) {
      const auto [h, odo] = oracle_ref::random_order_stabilize(box, c.height, rng);
      CHECK(got.config.height == h);
      CHECK(got.odometer == odo);
    }
  }
}

TEST_CASE("burning test") {
  CHECK(is_recurrent(all_heights(Domain::box(2), 5)));
  for (std::int32_t h = 0; h < 6; ++h) CHECK(is_recurrent(all_heights(single_site(), h)));
  CHECK_FALSE(is_recurrent(all_heights(two_site(), 0)));
  CHECK(is_recurrent(SandpileConfig(two_site(), {0, 1})));
  CHECK_THROWS_AS(is_recurrent(all_heights(single_site(), 6)), std::invalid_argument);
}

TEST_CASE("bijection on a single site") {
  const auto trees = enumerate_trees(single_site());
  REQUIRE(trees.count() == 6);
  std::set<std::int32_t> heights;
  for (std::size_t t = 0; t < trees.count(); ++t) {
    const auto c = md_bijection(trees.at(t));
    heights.insert(c.height[0]);
    CHECK(md_inverse(c).parent_dir == trees.at(t).parent_dir);
  }
  CHECK(heights == std::set<std::int32_t>{0, 1, 2, 3, 4, 5});
  CHECK_THROWS_AS(md_inverse(all_heights(two_site(), 0)), std::invalid_argument);
}

TEST_CASE("bijection round trips on sampled trees") {
  const auto box = Domain::box(3);
  for (std::uint64_t r = 0; r < 10000; ++r) {
    const auto f = wilson_ust(box, RngSeed{32, r});
    const auto c = md_bijection(f);
    REQUIRE(is_recurrent(c));
    REQUIRE(md_inverse(c).parent_dir == f.parent_dir);
    if (r < 200) CHECK(md_bijection(md_inverse(c)) == c);
  }
}

TEST_CASE("sample_recurrent is uniform") {
  const std::int64_t n = 300000;
  std::vector<std::int64_t> hist(6, 0);
  for (std::int64_t r = 0; r < n; ++r) ++hist[static_cast<std::size_t>(sample_recurrent(single_site(), RngSeed{33, static_cast<std::uint64_t>(r)}).height[0])];
  CHECK(chi_square(hist, std::vector<double>(6, 1.0 / 6)).p_value > 1e-3);

  // Plus shape: joint law of the heights at 0 and e1 against the enumeration.
  const auto plus = plus_shape();
  const auto all = enumerate_recurrent(plus);
  const auto i0 = static_cast<std::size_t>(plus.index_of(Point::origin()));
  const auto i1 = static_cast<std::size_t>(plus.index_of(Point{1, 0, 0}));
  std::vector<double> probs(36, 0.0);
  for (std::size_t t = 0; t < all.count(); ++t) {
    const auto c = all.at(t);
    probs[static_cast<std::size_t>(c.height[i0] * 6 + c.height[i1])] += 1.0 / static_cast<double>(all.count());
  }
  std::vector<std::int64_t> counts(36, 0);
  for (std::int64_t r = 0; r < 100000; ++r) {
    const auto c = sample_recurrent(plus, RngSeed{34, static_cast<std::uint64_t>(r)});
    if (r < 1000) CHECK(is_recurrent(c));
    ++counts[static_cast<std::size_t>(c.height[i0] * 6 + c.height[i1])];
  }
  CHECK(chi_square(counts, probs).p_value > 1e-3);
}

TEST_CASE("avalanche examples") {
  auto quiet = all_heights(plus_shape(), 4);
  const auto r0 = avalanche(quiet, Point::origin());
  CHECK(r0.total == 0);
  CHECK(r0.cluster.empty());
  CHECK(r0.num_waves() == 0);
  CHECK(quiet.at(Point::origin()) == 5);

  auto single = all_heights(single_site(), 5);
  const auto r1 = avalanche(single, Point::origin());
  CHECK(r1.total == 1);
  CHECK(r1.num_waves() == 1);
  CHECK(r1.waves[0] == std::vector<Point>{Point::origin()});
  CHECK(r1.truncated);
  CHECK(single.height[0] == 0);
}

TEST_CASE("wave loop odometer equals plain stabilization") {
  const auto box = Domain::box(4);
  for (std::uint64_t r = 0; r < 3000; ++r) {
    auto c = sample_recurrent(box, RngSeed{35, r});
    auto plain = c;
    plain.at(Point::origin()) += 1;
    const auto want = stabilize(plain);
    const auto res = avalanche(c, Point::origin());
    REQUIRE(c == want.config);
    std::int64_t total = 0;
    for (std::size_t i = 0; i < box.size(); ++i) {
      REQUIRE(res.topplings_at(box.point_at(i)) == want.odometer[i]);
      total += want.odometer[i];
    }
    CHECK(res.total == total);
    CHECK(res.max_topplings_in_wave <= 1);
    CHECK(res.num_waves() == res.topplings_at(Point::origin()));
    std::set<Point> uni;
    for (const auto& w : res.waves) uni.insert(w.begin(), w.end());
    CHECK(std::vector<Point>(uni.begin(), uni.end()) == res.cluster);
  }
}

TEST_CASE("lazy heights match the dense bijection") {
  const auto box = Domain::box(3);
  for (std::uint64_t r = 0; r < 50; ++r) {
    const RngSeed seed{36, r};
    LazySandpile lazy(box, seed);
    // Read heights in a scrambled order, then compare with the bijection
    // applied to the tree the lazy sampler grew.
    auto pts = box.points();
    Rng rng(seed.substream(9));
    for (std::size_t i = pts.size(); i > 1; --i) std::swap(pts[i - 1], pts[rng.below(static_cast<std::uint32_t>(i))]);
    std::vector<std::int32_t> seen;
    for (const auto& p : pts) seen.push_back(lazy.height(p));
    for (const auto& p : box.points()) lazy.explorer().ensure(p);
    const auto dense = md_bijection(export_forest(lazy.explorer()));
    for (std::size_t i = 0; i < pts.size(); ++i) CHECK(seen[i] == dense.at(pts[i]));
  }
}

TEST_CASE("configuration JSON round trip") {
  const auto c = sample_recurrent(Domain::box(1), RngSeed{37, 0});
  CHECK(sandpile_from_json(sandpile_json(c)) == c);
  auto d = c;
  const auto res = avalanche(d, Point::origin());
  const auto j = avalanche_json(res, Point::origin());
  CHECK(j["total"] == res.total);
  CHECK(j["truncated"] == res.truncated);
}
