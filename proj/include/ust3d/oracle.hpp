#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <gmpxx.h>
#include <nlohmann/json.hpp>

#include "ust3d/forest.hpp"
#include "ust3d/lattice.hpp"
#include "ust3d/sandpile.hpp"

namespace ust3d {

inline constexpr std::size_t kMaxTreeSites = 12;
inline constexpr std::size_t kMaxRecurrentSites = 8;

/// Compact list of forests on one domain: parent directions, flattened.
struct ForestList {
  Domain domain;
  ForestMode mode = ForestMode::kWired;
  std::vector<std::int8_t> dirs;

  std::size_t sites() const { return domain.size(); }
  std::size_t count() const { return sites() ? dirs.size() / sites() : 0; }
  const std::int8_t* dirs_of(std::size_t t) const { return dirs.data() + t * sites(); }
  SpanningForest at(std::size_t t) const;
};

/// Compact list of configurations on one domain, flattened heights.
struct ConfigList {
  Domain domain;
  std::vector<std::uint8_t> heights;

  std::size_t count() const { return domain.size() ? heights.size() / domain.size() : 0; }
  SandpileConfig at(std::size_t t) const;
};

/// Every wired spanning tree of K; parallel wired edges are distinct trees.
/// Throws std::invalid_argument when |K| > kMaxTreeSites.
ForestList enumerate_trees(const Domain& k);

/// Every spanning forest of K with roots {0, boundary}. Requires 0 in K.
ForestList enumerate_two_forests(const Domain& k);

/// Every recurrent configuration, by the burning test over all stable ones.
/// Throws std::invalid_argument when |K| > kMaxRecurrentSites.
ConfigList enumerate_recurrent(const Domain& k);

/// Injective key of a forest (parent directions in base 2d+1).
std::uint64_t forest_key(const std::int8_t* dirs, std::size_t n);
std::uint64_t forest_key(const SpanningForest& f);

struct TinyInstance {
  std::string name;
  Domain domain;
  ForestList trees;
  ForestList two_forests;  ///< empty when 0 is not in K
  ConfigList recurrent;    ///< empty when K is too large to enumerate
};

TinyInstance make_tiny_instance(std::string name, const Domain& k);

/// K = {0}, K = {0, e1}, the plus shape, and the block {0,1}^3.
std::vector<std::pair<std::string, Domain>> shipped_instances();

struct BijectionReport {
  std::string name;
  mpz_class determinant;
  std::size_t trees = 0;
  std::size_t recurrent = 0;
  bool counts_match = false;
  bool images_recurrent = false;
  bool injective = false;
  bool round_trip = false;
  bool surjective = false;
  bool passed() const {
    return counts_match && images_recurrent && injective && round_trip && surjective;
  }
};

/// md_bijection checked element by element against the enumerations.
BijectionReport verify_bijection(const TinyInstance& inst);

/// A first-wave event class {A : A contains a neighbour of 0, pred(A)}.
struct EventClass {
  std::string name;
  std::function<bool(const std::vector<Point>&)> pred;
};

/// |A| >= 2, diam_ext(A) >= 1, every A, and a few radius/size variants.
std::vector<EventClass> standard_event_classes();

struct IdentityCheck {
  std::string event;
  mpq_class wave_side;  ///< nu_K(W_1 in class)
  mpq_class tree_side;  ///< G_K(0,0) nu^0_K(T_K in class)
  bool equal = false;
};

struct FirstWaveReport {
  std::string name;
  mpz_class recurrent_count;  ///< |R_K|
  mpz_class reduced_count;    ///< |R_{K minus 0}|
  mpq_class green00;          ///< G_K(0,0), exact
  bool green_ratio_equal = false;  ///< |R_{K minus 0}| / |R_K| == G_K(0,0)
  std::vector<IdentityCheck> classes;
  std::size_t sets_checked = 0;   ///< distinct A containing a neighbour of 0
  bool per_set_equal = false;     ///< identity for every singleton class {A}
  bool passed() const;
};

/// Exact check of nu_K(W_1 in A) = G_K(0,0) nu^0_K(T_K in A) over full
/// enumerations: the left side runs the first wave on every recurrent
/// configuration, the right side reads the 0-tree of every two-component
/// forest. Requires 0 and its neighbours in K.
FirstWaveReport verify_first_wave_identity(const TinyInstance& inst,
                                           const std::vector<EventClass>& classes);
FirstWaveReport verify_first_wave_identity(const TinyInstance& inst);

struct ChiSquare {
  double statistic = 0.0;
  double p_value = 1.0;
  std::int64_t dof = 0;
  std::size_t cells = 0;  ///< after merging
};

/// Pearson goodness of fit. Cells are visited in order of increasing expected
/// count and merged consecutively until each group expects >= 5 (the last
/// short group joins its predecessor). Throws std::invalid_argument when the
/// probabilities do not sum to 1, the sample is empty, or a count falls on a
/// zero-probability cell.
ChiSquare chi_square(const std::vector<std::int64_t>& counts, const std::vector<double>& expected);

template <typename Key>
ChiSquare chi_square(const std::map<Key, std::int64_t>& samples, const std::map<Key, double>& expected) {
  std::vector<std::int64_t> c;
  std::vector<double> p;
  for (const auto& [k, prob] : expected) {
    auto it = samples.find(k);
    c.push_back(it == samples.end() ? 0 : it->second);
    p.push_back(prob);
  }
  for (const auto& [k, n] : samples)
    if (n > 0 && !expected.contains(k)) throw std::invalid_argument("chi_square: sample outside support");
  return chi_square(c, p);
}

/// Two-sample homogeneity test on paired cell counts, cells merged as above
/// by pooled count.
ChiSquare chi_square_two_sample(const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b);

nlohmann::json bijection_json(const BijectionReport& r);
nlohmann::json first_wave_json(const FirstWaveReport& r);
nlohmann::json chi_square_json(const ChiSquare& c);

}  // namespace ust3d
