#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <gmpxx.h>
#include <nlohmann/json.hpp>

#include "ust3d/lattice.hpp"
#include "ust3d/parallel.hpp"
#include "ust3d/rng.hpp"

namespace ust3d {

/// Delta_K = (2d) I - A_K over the sites of K in domain index order.
/// G_K = Delta_K^{-1}; with this normalization G_{{0}}(0,0) = 1/(2d), and
/// G_K(x, y) is the expected number of visits to y of the walk from x killed
/// on leaving K, divided by 2d.
struct TopplingMatrix {
  Domain domain;
  /// Neighbour indices inside K, per site (wired edges omitted).
  std::vector<std::vector<std::int64_t>> neighbours;

  explicit TopplingMatrix(Domain d);
  std::size_t size() const { return neighbours.size(); }
  std::int64_t diagonal() const { return num_directions(domain.dim()); }
  std::int64_t entry(std::size_t i, std::size_t j) const;
  /// Largest |i - j| over adjacent pairs.
  std::size_t bandwidth() const;
  /// y = Delta_K x.
  void apply(const std::vector<double>& x, std::vector<double>& y) const;
};

/// Exact rational "p/q" (or "p" when q = 1).
std::string rational_string(const mpq_class& q);

/// det Delta_K (fraction-free banded elimination).
mpz_class toppling_determinant(const Domain& domain);

struct ExactColumn {
  mpz_class determinant;
  std::vector<mpq_class> column;  ///< G_K(., y), domain index order
};

/// Column y of G_K in exact rationals.
ExactColumn green_column_exact(const Domain& domain, const Point& y);

struct IterativeColumn {
  std::vector<double> column;
  double residual = 0.0;  ///< max-norm of Delta_K g - e_y
  std::int64_t iterations = 0;
};

/// Column y of G_K by conjugate gradients until the max-norm residual is
/// below `tol`.
IterativeColumn green_column_cg(const Domain& domain, const Point& y, double tol = 1e-13);

inline constexpr std::size_t kExactGreenLimit = 1000;

struct GreenValue {
  double value = 0.0;
  std::optional<mpq_class> exact;  ///< set when |K| <= kExactGreenLimit
};

/// G_K(x, y). Throws std::out_of_range when x or y is outside K.
GreenValue green_finite(const Domain& domain, const Point& x, const Point& y);

struct FullGreen {
  double value = 0.0;        ///< extrapolated G(0,0)
  std::int32_t radius = 0;   ///< largest box radius used
  double last_box = 0.0;     ///< G_{Box(0,radius)}(0,0)
  std::vector<std::pair<std::int32_t, double>> sequence;
};

/// G(0,0) on Z^d, d >= 3, from G_{Box(0,N)}(0,0) for N = 4, 8, 16, ...
/// extrapolated as 2 G_{2N} - G_N (finite-box error ~ 1/N); stops when two
/// successive extrapolations differ by less than tol. Throws
/// std::invalid_argument for d < 3 and std::runtime_error when
/// `max_radius` is reached first.
FullGreen green_full_origin(double tol, int dim = 3, std::int32_t max_radius = 128);

struct DharReport {
  std::int64_t reps = 0;
  double mean = 0.0;
  double stderr_ = 0.0;
  double green = 0.0;
  std::optional<mpq_class> green_exact;
  double z = 0.0;
  bool stopped_early = false;
};

/// Monte Carlo mean of the number of topplings at x caused by one grain added
/// at v to a uniform recurrent configuration of K, against G_K(v, x).
DharReport dhar_check(const Domain& domain, const Point& v, const Point& x, std::int64_t reps,
                      RngSeed seed, int workers = 1, const RunControl& control = {});

nlohmann::json matrix_json(const TopplingMatrix& m);
nlohmann::json green_json(const Domain& domain, const Point& x, const Point& y,
                          const GreenValue& g);
nlohmann::json dhar_json(const DharReport& r);

}  // namespace ust3d
