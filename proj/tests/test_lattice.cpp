#include <doctest.h>

#include <algorithm>
#include <set>

#include "ust3d/lattice.hpp"
#include "ust3d/rng.hpp"

using namespace ust3d;

TEST_CASE("neighbors follow the global direction order") {
  const auto n = neighbors(Point::origin());
  const std::vector<Point> want{{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  CHECK(n == want);

  const Point p{5, 5, 5};
  const auto m = neighbors(p);
  REQUIRE(m.size() == 6);
  for (std::size_t k = 0; k < 6; ++k) CHECK(m[k] == p + want[k]);

  CHECK(neighbors(Point::origin(2)).size() == 4);
  for (const auto& q : neighbors(Point{1, -2})) {
    CHECK(linf_dist(q, Point{1, -2}) == 1);
    CHECK(adjacent(q, Point{1, -2}));
  }
}

TEST_CASE("boundary of small boxes") {
  const auto b0 = boundary(Box(Point::origin(), 0));
  auto sorted = b0;
  std::sort(sorted.begin(), sorted.end());
  auto n = neighbors(Point::origin());
  std::sort(n.begin(), n.end());
  CHECK(sorted == n);

  // Brute force over the radius-2 cube.
  const Box b1(Point::origin(), 1);
  std::set<Point> brute;
  for (int x = -2; x <= 2; ++x)
    for (int y = -2; y <= 2; ++y)
      for (int z = -2; z <= 2; ++z) {
        const Point p{x, y, z};
        if (b1.contains(p)) continue;
        for (const auto& q : neighbors(p))
          if (b1.contains(q)) brute.insert(p);
      }
  const auto bd = boundary(b1);
  CHECK(std::set<Point>(bd.begin(), bd.end()) == brute);
  CHECK(bd.size() == 54);
  CHECK(brute.contains(Point{2, 0, 0}));
  CHECK_FALSE(brute.contains(Point{2, 2, 2}));

  const Box b3(Point{1, -1, 2}, 3);
  for (const auto& y : boundary(b3)) {
    CHECK(linf_dist(y, b3.center) == 4);
    const auto nb = neighbors(y);
    CHECK(std::any_of(nb.begin(), nb.end(), [&](const Point& q) { return b3.contains(q); }));
  }
}

TEST_CASE("linf distance") {
  CHECK(linf_dist(Point::origin(), Point{3, -2, 1}) == 3);
  CHECK(linf_dist(Point{4, 4, 4}, Point{4, 4, 4}) == 0);
  CHECK_THROWS_AS(linf_dist(Point::origin(3), Point::origin(2)), std::invalid_argument);
  Rng rng(RngSeed{7, 0});
  for (int i = 0; i < 1000; ++i) {
    auto draw = [&] {
      return Point{static_cast<std::int32_t>(rng.below(41)) - 20, static_cast<std::int32_t>(rng.below(41)) - 20,
                   static_cast<std::int32_t>(rng.below(41)) - 20};
    };
    const Point p = draw(), q = draw();
    CHECK(linf_dist(p, q) == linf_dist(q, p));
  }
}

TEST_CASE("domains index every site once") {
  const auto box = Domain::box(2);
  CHECK(box.size() == 125);
  for (std::size_t i = 0; i < box.size(); ++i) CHECK(box.index_of(box.point_at(i)) == static_cast<std::int64_t>(i));
  CHECK(box.index_of(Point{3, 0, 0}) == -1);
  CHECK(box.wired_degree(Point{2, 2, 2}) == 3);
  CHECK(box.wired_degree(Point{2, 0, 0}) == 1);
  CHECK(box.wired_degree(Point::origin()) == 0);

  const auto plus = plus_shape();
  CHECK(plus.size() == 7);
  CHECK(plus.wired_degree(Point::origin()) == 0);
  CHECK(plus.wired_degree(Point{1, 0, 0}) == 5);
  CHECK_THROWS(Domain::sites({Point::origin(), Point::origin()}));
}

TEST_CASE("points and boxes serialize as JSON") {
  nlohmann::json j = Point{1, -2, 3};
  CHECK(j.dump() == "[1,-2,3]");
  CHECK(j.get<Point>() == Point{1, -2, 3});
  nlohmann::json jb = Box(Point{0, 0, 1}, 4);
  CHECK(jb["radius"] == 4);
  CHECK(jb.get<Box>() == Box(Point{0, 0, 1}, 4));
}
