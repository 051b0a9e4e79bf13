#pragma once

// Philox4x32-10 counter-based generator and per-path normal streams. A
// stream is addressed by (seed, path index); draws within it by index, so
// any draw can be regenerated without replaying its predecessors.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace growthld::rng {

using Counter = std::array<std::uint32_t, 4>;
using Key = std::array<std::uint32_t, 2>;

inline Counter philox4x32_10(Counter ctr, Key key) {
  constexpr std::uint32_t kM0 = 0xD2511F53u;
  constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  constexpr std::uint32_t kW0 = 0x9E3779B9u;
  constexpr std::uint32_t kW1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kW0;
      key[1] += kW1;
    }
    const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
    ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
           static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
  }
  return ctr;
}

/// Uniform in (0, 1) from 52 random bits; never 0 or 1, so safe under log.
inline double open_uniform(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 12;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-52;
}

/// Standard normals for one path. Draw q lives in block q / 2 of the
/// Philox counter space (Box-Muller pair).
class PathNormals {
 public:
  PathNormals(std::uint64_t seed, std::uint64_t path)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        path_(path) {}

  double operator()(std::uint64_t q) {
    const std::uint64_t block = q >> 1;
    if (block != cached_block_) fill(block);
    return pair_[q & 1u];
  }

 private:
  void fill(std::uint64_t block) {
    const Counter out = philox4x32_10(
        {static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32),
         static_cast<std::uint32_t>(path_), static_cast<std::uint32_t>(path_ >> 32)},
        key_);
    const double u1 = open_uniform(out[0], out[1]);
    const double u2 = open_uniform(out[2], out[3]);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    pair_[0] = r * std::cos(angle);
    pair_[1] = r * std::sin(angle);
    cached_block_ = block;
  }

  Key key_;
  std::uint64_t path_;
  std::uint64_t cached_block_ = ~std::uint64_t{0};
  double pair_[2] = {0.0, 0.0};
};

}  // namespace growthld::rng
