#include "ust3d/rng.hpp"

namespace ust3d {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

RngSeed RngSeed::replica(std::uint64_t r) const {
  return {master_seed, splitmix64(stream_id ^ splitmix64(r + 0x5851F42D4C957F2Dull))};
}

RngSeed RngSeed::substream(std::uint64_t tag) const {
  return {master_seed, splitmix64(stream_id + splitmix64(~tag))};
}

Philox::Philox(RngSeed seed) {
  key_ = {static_cast<std::uint32_t>(seed.master_seed),
          static_cast<std::uint32_t>(seed.master_seed >> 32)};
  ctr_ = {0, 0, static_cast<std::uint32_t>(seed.stream_id),
          static_cast<std::uint32_t>(seed.stream_id >> 32)};
}

void Philox::refill() {
  std::array<std::uint32_t, 4> x = ctr_;
  std::array<std::uint32_t, 2> k = key_;
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, x[0], hi0, lo0);
    mulhilo(kMul1, x[2], hi1, lo1);
    x = {hi1 ^ x[1] ^ k[0], lo1, hi0 ^ x[3] ^ k[1], lo0};
    k[0] += kWeyl0;
    k[1] += kWeyl1;
  }
  buf_ = x;
  pos_ = 0;
  if (++ctr_[0] == 0) ++ctr_[1];
}

void to_json(nlohmann::json& j, const RngSeed& s) {
  j = nlohmann::json{{"master_seed", s.master_seed}, {"stream_id", s.stream_id}};
}

void from_json(const nlohmann::json& j, RngSeed& s) {
  s.master_seed = j.at("master_seed").get<std::uint64_t>();
  s.stream_id = j.at("stream_id").get<std::uint64_t>();
}

}  // namespace ust3d
