#ifndef EHTRAIN_RNG_HPP
#define EHTRAIN_RNG_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

namespace ehtrain {

/// Addresses one independent random stream: the same (seed, stream_index)
/// always reproduces the same draws.
struct RngSpec {
  std::uint64_t seed = 0;
  std::uint64_t stream_index = 0;
};

/// Philox4x32-10 counter-based generator.
///
/// The 64-bit seed is the key. The 128-bit counter is split into a 64-bit
/// draw position (low half) and the 64-bit stream index (high half), so every
/// (seed, stream, position) triple maps to a fixed block of output with no
/// shared state between streams.
class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Block generate(Block ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kWeyl0;
        key[1] += kWeyl1;
      }
      const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
};

/// Sequential reader over one Philox stream.
class CounterRng {
 public:
  explicit CounterRng(RngSpec spec, std::uint64_t position = 0)
      : key_{static_cast<std::uint32_t>(spec.seed), static_cast<std::uint32_t>(spec.seed >> 32)},
        stream_(spec.stream_index),
        position_(position) {}

  std::uint64_t next_u64() {
    if (cached_) {
      cached_ = false;
      return cached_value_;
    }
    const Philox4x32::Block out = Philox4x32::generate(
        {static_cast<std::uint32_t>(position_), static_cast<std::uint32_t>(position_ >> 32),
         static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)},
        key_);
    ++position_;
    cached_value_ = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
    cached_ = true;
    return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1].
  double uniform_open_zero() { return 1.0 - uniform(); }

  /// Two independent standard normals (Box-Muller).
  std::pair<double, double> normal_pair() {
    const double u1 = uniform_open_zero();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(theta), r * std::sin(theta)};
  }

 private:
  Philox4x32::Key key_;
  std::uint64_t stream_;
  std::uint64_t position_;
  std::uint64_t cached_value_ = 0;
  bool cached_ = false;
};

}  // namespace ehtrain

#endif  // EHTRAIN_RNG_HPP
