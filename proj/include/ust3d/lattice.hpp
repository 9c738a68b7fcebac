#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <absl/container/flat_hash_map.h>
#include <nlohmann/json.hpp>

namespace ust3d {

inline constexpr int kMaxDim = 3;

/// A site of Z^d, d <= 3. Unused coordinates are kept at zero.
struct Point {
  std::array<std::int32_t, kMaxDim> x{};
  int dim = 3;

  Point() = default;
  Point(std::int32_t a, std::int32_t b, std::int32_t c) : x{a, b, c}, dim(3) {}
  Point(std::int32_t a, std::int32_t b) : x{a, b, 0}, dim(2) {}

  static Point origin(int d = 3) {
    Point p;
    p.dim = d;
    return p;
  }
  /// Unit vector along `axis` (0-based), scaled by `k`.
  static Point axis(int axis, std::int32_t k = 1, int d = 3) {
    Point p = origin(d);
    p.x[static_cast<std::size_t>(axis)] = k;
    return p;
  }

  std::int32_t operator[](std::size_t i) const { return x[i]; }
  std::int32_t& operator[](std::size_t i) { return x[i]; }

  friend bool operator==(const Point& a, const Point& b) {
    return a.dim == b.dim && a.x == b.x;
  }
  friend bool operator!=(const Point& a, const Point& b) { return !(a == b); }
  /// Lexicographic order on coordinates (dimension first).
  friend bool operator<(const Point& a, const Point& b) {
    if (a.dim != b.dim) return a.dim < b.dim;
    return a.x < b.x;
  }
  friend Point operator+(Point a, const Point& b) {
    for (int i = 0; i < kMaxDim; ++i) a.x[i] += b.x[i];
    return a;
  }
  friend Point operator-(Point a, const Point& b) {
    for (int i = 0; i < kMaxDim; ++i) a.x[i] -= b.x[i];
    return a;
  }

  template <typename H>
  friend H AbslHashValue(H h, const Point& p) {
    return H::combine(std::move(h), p.x[0], p.x[1], p.x[2], p.dim);
  }

  std::string to_string() const;
};

/// Number of lattice directions, 2d.
inline int num_directions(int dim) { return 2 * dim; }

/// Direction k in the global order (+e1, -e1, +e2, -e2, ...).
inline int direction_axis(int k) { return k / 2; }
inline int direction_sign(int k) { return (k % 2 == 0) ? 1 : -1; }
inline int opposite_direction(int k) { return k ^ 1; }

inline Point shifted(Point p, int k) {
  p.x[static_cast<std::size_t>(direction_axis(k))] += direction_sign(k);
  return p;
}

/// The 2d neighbours of p in the global direction order.
std::vector<Point> neighbors(const Point& p);

/// L-infinity distance. Throws std::invalid_argument on dimension mismatch.
std::int64_t linf_dist(const Point& p, const Point& q);
std::int64_t linf_norm(const Point& p);

bool adjacent(const Point& p, const Point& q);

struct Box {
  Point center;
  std::int32_t radius = 0;

  Box() = default;
  Box(Point c, std::int32_t r);

  int dim() const { return center.dim; }
  bool contains(const Point& p) const;
  std::size_t volume() const;
  friend bool operator==(const Box&, const Box&) = default;
};

/// Outer vertex boundary: sites outside b with a neighbour inside b.
std::vector<Point> boundary(const Box& b);

/// Finite site set K whose complement is wired to a single root. Either a
/// box (implicit indexing) or an explicit list of sites.
class Domain {
 public:
  static Domain box(const Box& b);
  static Domain box(std::int32_t radius, int dim = 3) {
    return box(Box(Point::origin(dim), radius));
  }
  /// Explicit site set; duplicates are rejected, sites are stored sorted.
  static Domain sites(std::vector<Point> pts);

  int dim() const { return dim_; }
  std::size_t size() const { return size_; }
  bool is_box() const { return is_box_; }
  const Box& box_shape() const { return box_; }

  bool contains(const Point& p) const {
    if (is_box_) return box_.contains(p);
    return index_.contains(p);
  }
  /// Index in [0, size()), or -1 when p is outside.
  std::int64_t index_of(const Point& p) const;
  Point point_at(std::size_t i) const;
  std::vector<Point> points() const;

  /// Number of the 2d edges at p that leave the domain (wired edges).
  int wired_degree(const Point& p) const;
  bool touches_boundary(const Point& p) const { return wired_degree(p) > 0; }

  friend bool operator==(const Domain& a, const Domain& b) {
    return a.is_box_ == b.is_box_ && a.dim_ == b.dim_ &&
           (a.is_box_ ? a.box_ == b.box_ : a.sites_ == b.sites_);
  }

 private:
  Domain() = default;

  bool is_box_ = true;
  int dim_ = 3;
  std::size_t size_ = 0;
  Box box_;
  std::vector<Point> sites_;
  absl::flat_hash_map<Point, std::int64_t> index_;
};

/// Small hand-specified shapes used by the exact checks.
Domain single_site(int dim = 3);
Domain two_site(int dim = 3);
/// Origin plus its 2d neighbours.
Domain plus_shape(int dim = 3);

void to_json(nlohmann::json& j, const Point& p);
void from_json(const nlohmann::json& j, Point& p);
void to_json(nlohmann::json& j, const Box& b);
void from_json(const nlohmann::json& j, Box& b);

}  // namespace ust3d
