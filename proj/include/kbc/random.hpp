#pragma once

#include <array>
#include <cstdint>
#include <limits>

namespace kbc {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11). The 64-bit
/// seed is the key; the stream id occupies the high half of the counter, so
/// distinct streams never overlap.
class Philox {
 public:
  using result_type = std::uint32_t;

  explicit Philox(std::uint64_t seed = 0, std::uint64_t stream = 0) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        stream_(stream) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    if (idx_ == 4) {
      block_ = generate(counter_++);
      idx_ = 0;
    }
    return block_[idx_++];
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept {
    const std::uint64_t hi = (*this)() >> 5, lo = (*this)() >> 6;
    return static_cast<double>(hi * 67108864ULL + lo) * 0x1.0p-53;
  }

  /// Uniform integer in [0, n), n > 0 (Lemire's multiply-shift, unbiased).
  std::uint32_t below(std::uint32_t n) noexcept {
    std::uint64_t m = static_cast<std::uint64_t>((*this)()) * n;
    auto low = static_cast<std::uint32_t>(m);
    if (low < n) {
      const std::uint32_t t = (0u - n) % n;
      while (low < t) {
        m = static_cast<std::uint64_t>((*this)()) * n;
        low = static_cast<std::uint32_t>(m);
      }
    }
    return static_cast<std::uint32_t>(m >> 32);
  }

  std::uint64_t stream() const noexcept { return stream_; }

  /// The raw block for counter value (`position`, stream).
  std::array<std::uint32_t, 4> generate(std::uint64_t position) const noexcept {
    std::array<std::uint32_t, 4> c{static_cast<std::uint32_t>(position), static_cast<std::uint32_t>(position >> 32),
                                   static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
    std::array<std::uint32_t, 2> k = key_;
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * c[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * c[2];
      c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
           static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
      k[0] += kW0;
      k[1] += kW1;
    }
    return c;
  }

 private:
  static constexpr std::uint32_t kM0 = 0xD2511F53, kM1 = 0xCD9E8D57;
  static constexpr std::uint32_t kW0 = 0x9E3779B9, kW1 = 0xBB67AE85;

  std::array<std::uint32_t, 2> key_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int idx_ = 4;
};

/// Stream id for a (purpose, index) pair, so unrelated consumers of one seed
/// draw from disjoint streams.
constexpr std::uint64_t stream_id(std::uint32_t purpose, std::uint64_t index) noexcept {
  return (static_cast<std::uint64_t>(purpose) << 48) ^ index;
}

}  // namespace kbc
