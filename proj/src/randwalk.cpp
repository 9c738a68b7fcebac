#include "ust3d/randwalk.hpp"

#include <cstring>

#include <absl/container/flat_hash_map.h>
#include <absl/container/flat_hash_set.h>

namespace ust3d {

namespace {

// 21 bits per coordinate; ample for the box sizes used here.
inline std::uint64_t pack(const Point& p) {
  constexpr std::uint64_t kOff = 1u << 20;
  return (static_cast<std::uint64_t>(p.x[0] + kOff) << 42) |
         (static_cast<std::uint64_t>(p.x[1] + kOff) << 21) |
         static_cast<std::uint64_t>(p.x[2] + kOff);
}

}  // namespace

bool is_self_avoiding(const Path& p) {
  absl::flat_hash_set<Point> seen;
  for (const auto& v : p.vertices)
    if (!seen.insert(v).second) return false;
  return true;
}

void LoopEraser::run(const std::vector<Point>& walk, std::vector<Point>& out) {
  out.clear();
  for (const auto& v : walk) {
    auto [it, inserted] = pos_.try_emplace(pack(v), out.size());
    if (inserted) {
      out.push_back(v);
      continue;
    }
    // v closes a loop: drop everything after its earlier occurrence.
    const std::size_t keep = it->second + 1;
    for (std::size_t i = keep; i < out.size(); ++i) pos_.erase(pack(out[i]));
    out.resize(keep);
  }
  // The index now holds exactly the surviving vertices.
  for (const auto& v : out) pos_.erase(pack(v));
}

void loop_erase_into(const std::vector<Point>& walk, std::vector<Point>& out) {
  LoopEraser eraser;
  eraser.run(walk, out);
}

Path loop_erase(const Path& p) {
  if (p.vertices.empty()) throw std::invalid_argument("loop_erase: empty path");
  Path out;
  out.ends_at_root = p.ends_at_root;
  out.root_edge = p.root_edge;
  loop_erase_into(p.vertices, out.vertices);
  return out;
}

void lerw_to_exit(std::int32_t N, Rng& rng, std::vector<Point>& out) {
  // Streaming erasure: loops are removed as soon as they close, which
  // yields the same path as erasing the finished walk.
  out.clear();
  absl::flat_hash_map<std::uint64_t, std::uint32_t> pos;
  Point cur = Point::origin(3);
  out.push_back(cur);
  pos.emplace(pack(cur), 0);
  while (true) {
    cur = shifted(cur, static_cast<int>(rng.below(6)));
    auto [it, inserted] = pos.try_emplace(pack(cur), static_cast<std::uint32_t>(out.size()));
    if (inserted) {
      out.push_back(cur);
    } else {
      const std::size_t keep = it->second + 1;
      for (std::size_t i = keep; i < out.size(); ++i) pos.erase(pack(out[i]));
      out.resize(keep);
    }
    if (std::abs(cur.x[0]) > N || std::abs(cur.x[1]) > N || std::abs(cur.x[2]) > N) return;
  }
}

std::size_t first_exit_index(const std::vector<Point>& path, std::int32_t R) {
  for (std::size_t i = 0; i < path.size(); ++i)
    if (linf_norm(path[i]) > R) return i;
  return path.size();
}

Path ilerw_truncated(std::int32_t R, std::int32_t N, RngSeed seed) {
  if (R < 0) throw std::invalid_argument("ilerw_truncated: negative R");
  if (N < 4 * R) throw std::invalid_argument("ilerw_truncated: need N >= 4R");
  Path out;
  if (R == 0) {
    out.vertices.push_back(Point::origin(3));
    return out;
  }
  Rng rng(seed);
  lerw_to_exit(N, rng, out.vertices);
  const std::size_t exit = first_exit_index(out.vertices, R);
  out.vertices.resize(exit + 1);
  return out;
}

void to_json(nlohmann::json& j, const Path& p) {
  j = nlohmann::json::array();
  for (const auto& v : p.vertices) j.push_back(v);
  if (p.ends_at_root) j.push_back("ROOT");
}

void from_json(const nlohmann::json& j, Path& p) {
  p = Path{};
  for (const auto& e : j) {
    if (e.is_string()) {
      if (e.get<std::string>() != "ROOT") throw std::invalid_argument("Path: bad root marker");
      p.ends_at_root = true;
    } else {
      if (p.ends_at_root) throw std::invalid_argument("Path: vertex after root marker");
      p.vertices.push_back(e.get<Point>());
    }
  }
}

namespace {

constexpr char kMagic[8] = {'U', 'S', 'T', '3', 'P', 'A', 'T', 'H'};
constexpr std::uint32_t kTraceVersion = 1;

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(v) >> (8 * i)));
}

template <typename T>
T get(const std::vector<std::uint8_t>& in, std::size_t& at) {
  if (at + sizeof(T) > in.size()) throw std::invalid_argument("path trace: truncated");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(in[at + i]) << (8 * i);
  at += sizeof(T);
  return static_cast<T>(v);
}

}  // namespace

std::vector<std::uint8_t> encode_path_binary(const Path& p) {
  std::vector<std::uint8_t> out(kMagic, kMagic + 8);
  const int dim = p.vertices.empty() ? 3 : p.vertices.front().dim;
  put<std::uint32_t>(out, kTraceVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(dim));
  put<std::uint8_t>(out, p.ends_at_root ? 1 : 0);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(p.root_edge));
  put<std::uint64_t>(out, p.vertices.size());
  for (const auto& v : p.vertices)
    for (int i = 0; i < dim; ++i) put<std::uint32_t>(out, static_cast<std::uint32_t>(v.x[i]));
  return out;
}

Path decode_path_binary(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 8) != 0)
    throw std::invalid_argument("path trace: bad magic");
  std::size_t at = 8;
  const auto version = get<std::uint32_t>(bytes, at);
  if (version != kTraceVersion) throw std::invalid_argument("path trace: unsupported version");
  const auto dim = static_cast<int>(get<std::uint32_t>(bytes, at));
  if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("path trace: bad dimension");
  Path p;
  p.ends_at_root = get<std::uint8_t>(bytes, at) != 0;
  p.root_edge = static_cast<std::int32_t>(get<std::uint32_t>(bytes, at));
  const auto n = get<std::uint64_t>(bytes, at);
  p.vertices.reserve(n);
  for (std::uint64_t k = 0; k < n; ++k) {
    Point v = Point::origin(dim);
    for (int i = 0; i < dim; ++i) v.x[i] = static_cast<std::int32_t>(get<std::uint32_t>(bytes, at));
    p.vertices.push_back(v);
  }
  if (at != bytes.size()) throw std::invalid_argument("path trace: trailing bytes");
  return p;
}

}  // namespace ust3d
