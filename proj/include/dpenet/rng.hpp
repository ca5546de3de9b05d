#ifndef DPENET_RNG_HPP_
#define DPENET_RNG_HPP_

#include <array>
#include <cstdint>
#include <limits>

namespace dpenet {

/// Counter-based generator (Philox4x64-10). The key is (seed, stream); the
/// counter is the block index, so two sources with different stream ids are
/// distinct permutations of the same counter space and never share a block.
///
/// Output is platform independent: the same (seed, stream) yields the same
/// sequence of 64-bit words everywhere. Satisfies UniformRandomBitGenerator.
class RandomSource {
 public:
  using result_type = std::uint64_t;

  explicit RandomSource(std::uint64_t seed = 0, std::uint64_t stream = 0) noexcept
      : key_{seed, stream} {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    if (pos_ == 4) refill();
    return buffer_[pos_++];
  }

  /// Uniform on the open interval (0, 1) with 53-bit resolution.
  double uniform() noexcept {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// A fresh source on stream `stream` of the same seed.
  RandomSource split(std::uint64_t stream) const noexcept { return RandomSource(key_[0], stream); }

  std::uint64_t seed() const noexcept { return key_[0]; }
  std::uint64_t stream() const noexcept { return key_[1]; }
  /// Number of 64-bit words produced so far.
  std::uint64_t position() const noexcept { return block_ * 4 - (4 - pos_); }

  /// Raw Philox4x64-10 block function, exposed for known-answer tests.
  static std::array<std::uint64_t, 4> philox(std::array<std::uint64_t, 4> ctr,
                                             std::array<std::uint64_t, 2> key) noexcept {
    constexpr std::uint64_t kM0 = 0xD2E7470EE14C6C93ULL;
    constexpr std::uint64_t kM1 = 0xCA5A826395121157ULL;
    constexpr std::uint64_t kW0 = 0x9E3779B97F4A7C15ULL;
    constexpr std::uint64_t kW1 = 0xBB67AE8584CAA73BULL;
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += kW0;
        key[1] += kW1;
      }
      const auto p0 = static_cast<unsigned __int128>(kM0) * ctr[0];
      const auto p1 = static_cast<unsigned __int128>(kM1) * ctr[2];
      const auto hi0 = static_cast<std::uint64_t>(p0 >> 64);
      const auto lo0 = static_cast<std::uint64_t>(p0);
      const auto hi1 = static_cast<std::uint64_t>(p1 >> 64);
      const auto lo1 = static_cast<std::uint64_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    }
    return ctr;
  }

 private:
  void refill() noexcept {
    // Counter is incremented before use; block 1 is the first one emitted.
    ++block_;
    buffer_ = philox({block_, 0, 0, 0}, key_);
    pos_ = 0;
  }

  std::array<std::uint64_t, 2> key_;
  std::array<std::uint64_t, 4> buffer_{};
  std::uint64_t block_ = 0;
  int pos_ = 4;
};

}  // namespace dpenet

#endif  // DPENET_RNG_HPP_
