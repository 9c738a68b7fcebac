#include "ust3d/lattice.hpp"

#include <algorithm>
#include <cstdlib>
#include <sstream>

namespace ust3d {

std::string Point::to_string() const {
  std::ostringstream os;
  os << '(';
  for (int i = 0; i < dim; ++i) {
    if (i) os << ',';
    os << x[static_cast<std::size_t>(i)];
  }
  os << ')';
  return os.str();
}

std::vector<Point> neighbors(const Point& p) {
  std::vector<Point> out;
  out.reserve(static_cast<std::size_t>(num_directions(p.dim)));
  for (int k = 0; k < num_directions(p.dim); ++k) out.push_back(shifted(p, k));
  return out;
}

std::int64_t linf_dist(const Point& p, const Point& q) {
  if (p.dim != q.dim) throw std::invalid_argument("linf_dist: dimension mismatch");
  std::int64_t m = 0;
  for (int i = 0; i < p.dim; ++i) {
    const auto d = std::llabs(static_cast<std::int64_t>(p.x[i]) - q.x[i]);
    m = std::max<std::int64_t>(m, d);
  }
  return m;
}

std::int64_t linf_norm(const Point& p) { return linf_dist(p, Point::origin(p.dim)); }

bool adjacent(const Point& p, const Point& q) {
  if (p.dim != q.dim) return false;
  int nonzero = 0;
  for (int i = 0; i < p.dim; ++i) {
    const auto d = std::llabs(static_cast<std::int64_t>(p.x[i]) - q.x[i]);
    if (d > 1) return false;
    nonzero += static_cast<int>(d);
  }
  return nonzero == 1;
}

Box::Box(Point c, std::int32_t r) : center(c), radius(r) {
  if (r < 0) throw std::invalid_argument("Box: negative radius");
}

bool Box::contains(const Point& p) const {
  for (int i = 0; i < center.dim; ++i) {
    if (std::abs(p.x[i] - center.x[i]) > radius) return false;
  }
  return true;
}

std::size_t Box::volume() const {
  std::size_t side = 2 * static_cast<std::size_t>(radius) + 1;
  std::size_t v = 1;
  for (int i = 0; i < dim(); ++i) v *= side;
  return v;
}

std::vector<Point> boundary(const Box& b) {
  // Every boundary site sits at L-infinity distance radius + 1 and is the
  // shift of a box site, so scanning shifts of the box faces is enough.
  std::vector<Point> out;
  const Box outer(b.center, b.radius + 1);
  const std::size_t n = outer.volume();
  const std::int32_t side = 2 * outer.radius + 1;
  for (std::size_t i = 0; i < n; ++i) {
    Point p = Point::origin(b.dim());
    std::size_t rem = i;
    for (int a = b.dim() - 1; a >= 0; --a) {
      p.x[a] = b.center.x[a] - outer.radius + static_cast<std::int32_t>(rem % side);
      rem /= side;
    }
    if (b.contains(p)) continue;
    for (int k = 0; k < num_directions(b.dim()); ++k) {
      if (b.contains(shifted(p, k))) {
        out.push_back(p);
        break;
      }
    }
  }
  return out;
}

Domain Domain::box(const Box& b) {
  Domain d;
  d.is_box_ = true;
  d.dim_ = b.dim();
  d.box_ = b;
  d.size_ = b.volume();
  return d;
}

Domain Domain::sites(std::vector<Point> pts) {
  if (pts.empty()) throw std::invalid_argument("Domain::sites: empty site set");
  std::sort(pts.begin(), pts.end());
  if (std::adjacent_find(pts.begin(), pts.end()) != pts.end())
    throw std::invalid_argument("Domain::sites: duplicate site");
  Domain d;
  d.is_box_ = false;
  d.dim_ = pts.front().dim;
  for (const auto& p : pts)
    if (p.dim != d.dim_) throw std::invalid_argument("Domain::sites: mixed dimensions");
  d.size_ = pts.size();
  d.sites_ = std::move(pts);
  for (std::size_t i = 0; i < d.sites_.size(); ++i)
    d.index_.emplace(d.sites_[i], static_cast<std::int64_t>(i));
  return d;
}

std::int64_t Domain::index_of(const Point& p) const {
  if (!is_box_) {
    auto it = index_.find(p);
    return it == index_.end() ? -1 : it->second;
  }
  if (!box_.contains(p)) return -1;
  const std::int64_t side = 2 * static_cast<std::int64_t>(box_.radius) + 1;
  std::int64_t idx = 0;
  for (int a = 0; a < dim_; ++a)
    idx = idx * side + (p.x[a] - box_.center.x[a] + box_.radius);
  return idx;
}

Point Domain::point_at(std::size_t i) const {
  if (i >= size_) throw std::out_of_range("Domain::point_at");
  if (!is_box_) return sites_[i];
  const std::size_t side = 2 * static_cast<std::size_t>(box_.radius) + 1;
  Point p = Point::origin(dim_);
  for (int a = dim_ - 1; a >= 0; --a) {
    p.x[a] = box_.center.x[a] - box_.radius + static_cast<std::int32_t>(i % side);
    i /= side;
  }
  return p;
}

std::vector<Point> Domain::points() const {
  if (!is_box_) return sites_;
  std::vector<Point> out;
  out.reserve(size_);
  for (std::size_t i = 0; i < size_; ++i) out.push_back(point_at(i));
  return out;
}

int Domain::wired_degree(const Point& p) const {
  int w = 0;
  for (int k = 0; k < num_directions(dim_); ++k)
    if (!contains(shifted(p, k))) ++w;
  return w;
}

Domain single_site(int dim) { return Domain::sites({Point::origin(dim)}); }

Domain two_site(int dim) { return Domain::sites({Point::origin(dim), Point::axis(0, 1, dim)}); }

Domain plus_shape(int dim) {
  std::vector<Point> pts{Point::origin(dim)};
  for (const auto& n : neighbors(Point::origin(dim))) pts.push_back(n);
  return Domain::sites(std::move(pts));
}

void to_json(nlohmann::json& j, const Point& p) {
  j = nlohmann::json::array();
  for (int i = 0; i < p.dim; ++i) j.push_back(p.x[i]);
}

void from_json(const nlohmann::json& j, Point& p) {
  if (!j.is_array() || j.empty() || j.size() > kMaxDim)
    throw std::invalid_argument("Point: expected an array of 1..3 integers");
  p = Point::origin(static_cast<int>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) p.x[i] = j[i].get<std::int32_t>();
}

void to_json(nlohmann::json& j, const Box& b) {
  j = nlohmann::json{{"center", b.center}, {"radius", b.radius}};
}

void from_json(const nlohmann::json& j, Box& b) {
  b = Box(j.at("center").get<Point>(), j.at("radius").get<std::int32_t>());
}

}  // namespace ust3d
