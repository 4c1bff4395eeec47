#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace dpc {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream key from a root seed and a coordinate tuple.
inline constexpr std::uint64_t stream_key(std::uint64_t seed,
                                          std::initializer_list<std::uint64_t> coords) noexcept {
  std::uint64_t k = splitmix64(seed);
  for (std::uint64_t c : coords) k = splitmix64(k ^ splitmix64(c + 0x632BE59BD9B4E019ULL));
  return k;
}

/// Stream tags keep Brownian, latent and parameter draws apart.
enum class StreamTag : std::uint64_t {
  kParams = 1,
  kBrownian = 2,
  kLatent = 3,
  kShuffle = 4,
  kInit = 5,
  kTestPoints = 6,
};

/// Counter-based generator: draw k of stream `key` is a pure function of (key, k),
/// so results do not depend on the order in which streams are consumed.
class NoiseStream {
 public:
  NoiseStream() = default;
  explicit NoiseStream(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64() noexcept { return splitmix64(key_ ^ splitmix64(counter_++)); }

  /// Uniform on the open interval (0, 1).
  double uniform() noexcept { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; both variates of a pair are used.
  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double a = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline NoiseStream make_stream(std::uint64_t seed, StreamTag tag,
                               std::initializer_list<std::uint64_t> coords) {
  std::uint64_t k = stream_key(seed, {static_cast<std::uint64_t>(tag)});
  for (std::uint64_t c : coords) k = splitmix64(k ^ splitmix64(c + 0x632BE59BD9B4E019ULL));
  return NoiseStream(k);
}

}  // namespace dpc
