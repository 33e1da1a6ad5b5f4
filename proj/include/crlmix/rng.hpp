#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <limits>

namespace crlmix {

namespace detail {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline constexpr void mulhilo32(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                                std::uint32_t& lo) noexcept {
  const std::uint64_t prod = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(prod >> 32);
  lo = static_cast<std::uint32_t>(prod);
}

/// Philox4x32 with 10 rounds (Salmon et al., SC'11).
inline constexpr std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                                            std::array<std::uint32_t, 2> key) noexcept {
  constexpr std::uint32_t kMul0 = 0xD2511F53U;
  constexpr std::uint32_t kMul1 = 0xCD9E8D57U;
  constexpr std::uint32_t kWeyl0 = 0x9E3779B9U;
  constexpr std::uint32_t kWeyl1 = 0xBB67AE85U;
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0 = 0, lo0 = 0, hi1 = 0, lo1 = 0;
    mulhilo32(kMul0, ctr[0], hi0, lo0);
    mulhilo32(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

} // namespace detail

/// Counter-based random stream. The pair (seed, stream id) fully determines
/// the sequence; different ids give independent Philox counter spaces, so
/// streams can be created anywhere (any thread, any order) and still
/// reproduce bit for bit. Satisfies UniformRandomBitGenerator.
class RngStream {
public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t seed, std::uint64_t stream_id) noexcept
      : seed_(seed), stream_(stream_id) {}

  /// Stream keyed by a tuple of integers (e.g. sweep, block tag, indices).
  static RngStream derive(std::uint64_t seed, std::initializer_list<std::uint64_t> keys) noexcept {
    return RngStream(seed, mix_keys(keys));
  }

  static constexpr std::uint64_t mix_keys(std::initializer_list<std::uint64_t> keys) noexcept {
    std::uint64_t h = 0x243F6A8885A308D3ULL;
    for (std::uint64_t k : keys) {
      h = detail::splitmix64(h ^ detail::splitmix64(k));
    }
    return h;
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    if (cached_ == 0) {
      refill();
    }
    --cached_;
    return cached_ == 1 ? (static_cast<std::uint64_t>(block_[0]) << 32) | block_[1]
                        : (static_cast<std::uint64_t>(block_[2]) << 32) | block_[3];
  }

  /// Uniform on the open interval (0, 1) with 53-bit resolution.
  double uniform() noexcept {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
  [[nodiscard]] std::uint64_t stream_id() const noexcept { return stream_; }

private:
  void refill() noexcept {
    const std::array<std::uint32_t, 4> ctr{
        static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
        static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
    const std::array<std::uint32_t, 2> key{static_cast<std::uint32_t>(seed_),
                                           static_cast<std::uint32_t>(seed_ >> 32)};
    block_ = detail::philox4x32_10(ctr, key);
    ++counter_;
    cached_ = 2;
  }

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
  std::array<std::uint32_t, 4> block_{};
  int cached_ = 0;
};

} // namespace crlmix
