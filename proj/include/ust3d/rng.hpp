#pragma once

#include <array>
#include <cstdint>
#include <limits>

#include <nlohmann/json.hpp>

namespace ust3d {

/// (master_seed, stream_id) fully determines every draw of a replica.
struct RngSeed {
  std::uint64_t master_seed = 0;
  std::uint64_t stream_id = 0;

  /// Seed of the r-th replica below this stream.
  RngSeed replica(std::uint64_t r) const;
  /// Independent sub-stream for a named purpose within one replica.
  RngSeed substream(std::uint64_t tag) const;

  friend bool operator==(const RngSeed&, const RngSeed&) = default;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11). The key is
/// the master seed, the upper half of the 128-bit counter is the stream id,
/// and the lower half counts blocks. Satisfies UniformRandomBitGenerator.
class Philox {
 public:
  using result_type = std::uint32_t;

  explicit Philox(RngSeed seed);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (pos_ == 4) refill();
    return buf_[pos_++];
  }

  /// Uniform integer in [0, n), n >= 1 (Lemire's method, exact).
  std::uint32_t below(std::uint32_t n) {
    std::uint64_t m = static_cast<std::uint64_t>((*this)()) * n;
    auto low = static_cast<std::uint32_t>(m);
    if (low < n) {
      const std::uint32_t t = static_cast<std::uint32_t>(-n) % n;
      while (low < t) {
        m = static_cast<std::uint64_t>((*this)()) * n;
        low = static_cast<std::uint32_t>(m);
      }
    }
    return static_cast<std::uint32_t>(m >> 32);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    const std::uint64_t hi = (*this)() >> 5;
    const std::uint64_t lo = (*this)() >> 6;
    return static_cast<double>((hi << 26) | lo) * 0x1.0p-53;
  }

 private:
  void refill();

  std::array<std::uint32_t, 2> key_{};
  std::array<std::uint32_t, 4> ctr_{};
  std::array<std::uint32_t, 4> buf_{};
  int pos_ = 4;
};

using Rng = Philox;

void to_json(nlohmann::json& j, const RngSeed& s);
void from_json(const nlohmann::json& j, RngSeed& s);

}  // namespace ust3d
