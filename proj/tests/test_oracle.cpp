#include <doctest.h>

#include "oracles.hpp"
#include "ust3d/greens.hpp"
#include "ust3d/oracle.hpp"

using namespace ust3d;

TEST_CASE("tree and recurrent counts") {
  CHECK(enumerate_trees(single_site()).count() == 6);
  CHECK(enumerate_recurrent(single_site()).count() == 6);
  CHECK(enumerate_trees(two_site()).count() == 35);
  CHECK(enumerate_recurrent(two_site()).count() == 35);
  const auto plus = plus_shape();
  CHECK(mpz_class(enumerate_trees(plus).count()) == toppling_determinant(plus));
  CHECK(enumerate_recurrent(plus).count() == 233280);
  CHECK_THROWS_AS(enumerate_trees(Domain::box(1)), std::invalid_argument);
  CHECK_THROWS_AS(enumerate_recurrent(Domain::box(1)), std::invalid_argument);

  // The all-max configuration is always recurrent, hence listed.
  const auto rec = enumerate_recurrent(two_site());
  bool found = false;
  for (std::size_t t = 0; t < rec.count(); ++t)
    found = found || rec.at(t).height == std::vector<std::int32_t>{5, 5};
  CHECK(found);

  // Enumerated trees are distinct and valid.
  const auto trees = enumerate_trees(plus);
  std::set<std::uint64_t> keys;
  for (std::size_t t = 0; t < trees.count(); t += 97) CHECK(is_valid_forest(trees.at(t)));
  for (std::size_t t = 0; t < trees.count(); ++t) keys.insert(forest_key(trees.dirs_of(t), trees.sites()));
  CHECK(keys.size() == trees.count());
}

TEST_CASE("two-component forests") {
  const auto f = enumerate_two_forests(single_site());
  CHECK(f.count() == 1);
  // K = {0, e1}: e1 attaches to 0 or to one of its 5 wired edges.
  CHECK(enumerate_two_forests(two_site()).count() == 6);
  // Counted by the matrix-tree theorem on K minus 0 with 0 wired.
  const auto plus = plus_shape();
  std::vector<Point> rest;
  for (const auto& p : plus.points())
    if (p != Point::origin()) rest.push_back(p);
  CHECK(mpz_class(enumerate_two_forests(plus).count()) == toppling_determinant(Domain::sites(rest)));
  CHECK(enumerate_two_forests(plus).count() == 46656);
}

TEST_CASE("bijection verified on the shipped instances") {
  for (const auto& [name, dom] : shipped_instances()) {
    if (dom.size() > 7) continue;
    const auto r = verify_bijection(make_tiny_instance(name, dom));
    CHECK_MESSAGE(r.passed(), name);
    CHECK(mpz_class(r.trees) == r.determinant);
    CHECK(r.recurrent == r.trees);
  }
}

TEST_CASE("first-wave identity on the plus shape") {
  const auto inst = make_tiny_instance("plus", plus_shape());
  const auto r = verify_first_wave_identity(inst);
  CHECK(r.green_ratio_equal);
  CHECK(rational_string(r.green00) == "1/5");
  CHECK(r.recurrent_count == 233280);
  CHECK(r.reduced_count == 46656);
  CHECK(r.per_set_equal);
  CHECK(r.passed());
  for (const auto& c : r.classes) CHECK_MESSAGE(c.equal, c.event);
  // Totals over every admissible set, frozen from the enumeration.
  for (const auto& c : r.classes) {
    if (c.event == "all") CHECK(c.wave_side == mpq_class(31031, 233280));
    if (c.event == "size>=2") CHECK(c.wave_side == mpq_class(31031, 233280));
    if (c.event == "size>=3") CHECK(c.wave_side == mpq_class(12281, 233280));
  }
  const auto j = first_wave_json(r);
  CHECK(j["green00"] == "1/5");
}

TEST_CASE("pearson chi-square") {
  const auto hand = chi_square(std::vector<std::int64_t>{10, 20, 30}, {1.0 / 3, 1.0 / 3, 1.0 / 3});
  CHECK(hand.statistic == doctest::Approx(10.0));
  CHECK(hand.dof == 2);
  CHECK(oracle_ref::pearson({10, 20, 30}, {1.0 / 3, 1.0 / 3, 1.0 / 3}) == doctest::Approx(10.0));
  CHECK(hand.p_value == doctest::Approx(std::exp(-5.0)));

  const auto perfect = chi_square(std::vector<std::int64_t>{100, 200, 300}, {1.0 / 6, 2.0 / 6, 3.0 / 6});
  CHECK(perfect.statistic == doctest::Approx(0.0));
  CHECK(perfect.p_value == doctest::Approx(1.0));

  const auto one = chi_square(std::vector<std::int64_t>{42}, {1.0});
  CHECK(one.statistic == 0.0);

  // Sparse cells are merged until each group expects at least 5.
  std::vector<std::int64_t> sparse(100, 1);
  const auto merged = chi_square(sparse, std::vector<double>(100, 0.01));
  CHECK(merged.cells == 20);
  CHECK(merged.statistic == doctest::Approx(0.0));

  CHECK_THROWS_AS(chi_square(std::vector<std::int64_t>{1, 2}, {0.5, 0.6}), std::invalid_argument);
  CHECK_THROWS_AS(chi_square(std::vector<std::int64_t>{0, 0}, {0.5, 0.5}), std::invalid_argument);
  CHECK_THROWS_AS(chi_square(std::vector<std::int64_t>{1, 2}, {1.0, 0.0}), std::invalid_argument);

  std::map<std::string, std::int64_t> s{{"a", 10}, {"b", 20}, {"c", 30}};
  std::map<std::string, double> e{{"a", 1.0 / 3}, {"b", 1.0 / 3}, {"c", 1.0 / 3}};
  CHECK(chi_square(s, e).statistic == doctest::Approx(10.0));

  const auto same = chi_square_two_sample({50, 60, 70}, {50, 60, 70});
  CHECK(same.statistic == doctest::Approx(0.0));
  CHECK(chi_square_two_sample({100, 0}, {0, 100}).p_value < 1e-10);
}
