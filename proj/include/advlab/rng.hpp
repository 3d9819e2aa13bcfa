#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string_view>

namespace advlab {

/// Philox4x32-10 block function (Salmon et al., Random123).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) noexcept;

/// 128-bit identity of one random stream. Streams are derived from the
/// master seed plus a purpose tag and up to three indices, so drawing from one
/// stream never shifts another (order-independent parallel sampling).
struct StreamKey {
  std::uint64_t key = 0;
  std::uint64_t stream = 0;

  static StreamKey derive(std::uint64_t seed, std::string_view purpose, std::uint64_t a = 0,
                          std::uint64_t b = 0, std::uint64_t c = 0) noexcept;

  /// Sub-stream, e.g. one per sample of a batch.
  StreamKey child(std::uint64_t index) const noexcept;

  bool operator==(const StreamKey&) const = default;
};

/// Counter-based generator: draw n is philox(stream, n). Satisfies
/// UniformRandomBitGenerator so <random> distributions can consume it.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(StreamKey key) noexcept : key_(key) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept;

  /// Uniform on [0, 1) with 53 random bits.
  double uniform01() noexcept;
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform01(); }
  /// Uniform integer on [0, n); n must be > 0.
  std::uint64_t below(std::uint64_t n) noexcept;
  double normal() noexcept;
  double gamma(double shape) noexcept;

 private:
  StreamKey key_;
  std::uint64_t counter_ = 0;
  std::array<std::uint64_t, 2> buffer_{};
  int buffered_ = 0;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

}  // namespace advlab
