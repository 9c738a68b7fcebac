#include <doctest.h>

#include "oracles.hpp"
#include "ust3d/greens.hpp"
#include "ust3d/oracle.hpp"

using namespace ust3d;

namespace {

/// Connected random site set around the origin, grown by random accretion.
Domain random_domain(std::size_t n, Rng& rng) {
  std::vector<Point> pts{Point::origin()};
  std::set<Point> have{Point::origin()};
  while (pts.size() < n) {
    const Point base = pts[rng.below(static_cast<std::uint32_t>(pts.size()))];
    const Point q = shifted(base, static_cast<int>(rng.below(6)));
    if (have.insert(q).second) pts.push_back(q);
  }
  return Domain::sites(pts);
}

}  // namespace

TEST_CASE("single site Green's function") {
  const auto g = green_finite(single_site(), Point::origin(), Point::origin());
  REQUIRE(g.exact);
  CHECK(*g.exact == mpq_class(1, 6));
  CHECK(g.value == doctest::Approx(1.0 / 6));
  CHECK(rational_string(*g.exact) == "1/6");
  CHECK(rational_string(mpq_class(4)) == "4");
  CHECK_THROWS_AS(green_finite(single_site(), Point::origin(), Point{1, 0, 0}), std::out_of_range);
}

TEST_CASE("determinants match dense elimination") {
  CHECK(toppling_determinant(single_site()) == 6);
  CHECK(toppling_determinant(two_site()) == 35);
  Rng rng(RngSeed{40, 0});
  std::vector<Domain> shapes{plus_shape(), Domain::box(1), Domain::box(1, 2), plus_shape(2)};
  for (int i = 0; i < 6; ++i) shapes.push_back(random_domain(3 + rng.below(18), rng));
  for (const auto& d : shapes) {
    const mpq_class want = oracle_ref::dense_det(oracle_ref::dense_toppling(d));
    CHECK(mpq_class(toppling_determinant(d)) == want);
  }
  CHECK(toppling_determinant(plus_shape()) == 233280);
}

TEST_CASE("exact columns invert the toppling matrix") {
  Rng rng(RngSeed{41, 0});
  for (int i = 0; i < 5; ++i) {
    const auto d = random_domain(4 + rng.below(25), rng);
    const auto inv = oracle_ref::dense_inverse(oracle_ref::dense_toppling(d));
    const Point y = d.point_at(rng.below(static_cast<std::uint32_t>(d.size())));
    const auto col = green_column_exact(d, y);
    const auto iy = static_cast<std::size_t>(d.index_of(y));
    for (std::size_t x = 0; x < d.size(); ++x) CHECK(col.column[x] == inv[x][iy]);
    // Symmetry.
    const Point x = d.point_at(rng.below(static_cast<std::uint32_t>(d.size())));
    CHECK(*green_finite(d, x, y).exact == *green_finite(d, y, x).exact);
  }
  const auto box = Domain::box(2);
  const TopplingMatrix m(box);
  const auto col = green_column_exact(box, Point{1, 0, -1});
  for (std::size_t i = 0; i < box.size(); ++i) {
    mpq_class s = m.diagonal() * col.column[i];
    for (auto j : m.neighbours[i]) s -= col.column[static_cast<std::size_t>(j)];
    CHECK(s == (box.point_at(i) == Point{1, 0, -1} ? 1 : 0));
  }
}

TEST_CASE("plus shape: elimination equals the killed-walk visits over 2d") {
  const auto plus = plus_shape();
  const auto g = green_finite(plus, Point::origin(), Point::origin());
  const mpq_class visits = oracle_ref::killed_walk_visits(plus, Point::origin(), Point::origin());
  CHECK(*g.exact == visits / 6);
  CHECK(rational_string(*g.exact) == "1/5");
  const auto g01 = green_finite(plus, Point::origin(), Point{0, 0, -1});
  CHECK(*g01.exact == oracle_ref::killed_walk_visits(plus, Point::origin(), Point{0, 0, -1}) / 6);
}

TEST_CASE("conjugate gradients agree with the exact solve") {
  const auto box = Domain::box(3);
  const Point y{1, 2, 0};
  const auto ex = green_column_exact(box, y);
  const auto cg = green_column_cg(box, y);
  CHECK(cg.residual < 1e-12);
  for (std::size_t i = 0; i < box.size(); ++i) CHECK(cg.column[i] == doctest::Approx(ex.column[i].get_d()).epsilon(1e-10));

  // Large boxes go through the iterative path.
  const auto big = green_finite(Domain::box(5), Point::origin(), Point::origin());
  CHECK_FALSE(big.exact.has_value());
  CHECK(big.value > 0.2);
}

TEST_CASE("Green's function grows with the box") {
  double prev = 0.0;
  for (std::int32_t n = 0; n <= 8; ++n) {
    const double g = green_finite(Domain::box(n), Point::origin(), Point::origin()).value;
    CHECK(g >= prev);
    prev = g;
  }
}

TEST_CASE("full-space value at the origin") {
  CHECK_THROWS_AS(green_full_origin(1e-3, 2), std::invalid_argument);
  const auto full = green_full_origin(1e-3);
  // Watson's integral 1.516386... is the expected number of visits; the
  // toppling-matrix normalization divides it by 2d = 6.
  CHECK(full.value == doctest::Approx(1.516386059 / 6).epsilon(2e-3));
  for (std::size_t i = 1; i < full.sequence.size(); ++i) CHECK(full.sequence[i].second >= full.sequence[i - 1].second);
  CHECK_THROWS_AS(green_full_origin(1e-9, 3, 8), std::runtime_error);
}

TEST_CASE("Dhar's formula on tiny domains") {
  const auto single = dhar_check(single_site(), Point::origin(), Point::origin(), 20000, RngSeed{42, 0});
  CHECK(single.green == doctest::Approx(1.0 / 6));
  CHECK(std::abs(single.z) < 3);
  const auto plus = dhar_check(plus_shape(), Point::origin(), Point::origin(), 20000, RngSeed{43, 0});
  CHECK(plus.green == doctest::Approx(0.2));
  CHECK(std::abs(plus.mean - plus.green) <= 3 * plus.stderr_);
}

TEST_CASE("JSON exports") {
  const auto j = green_json(plus_shape(), Point::origin(), Point::origin(),
                            green_finite(plus_shape(), Point::origin(), Point::origin()));
  CHECK(j["exact"] == "1/5");
  const auto m = matrix_json(TopplingMatrix(two_site()));
  CHECK(m.dump().find("-1") != std::string::npos);
}
