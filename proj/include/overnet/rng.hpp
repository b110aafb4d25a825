#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace overnet {

// Counter-based pseudo-random streams. Every consumer draws from its own
// stream keyed by (seed, purpose, step), so the draw order of one consumer
// never perturbs another. This is what makes training resume bit-exact:
// restarting at step k replays exactly the streams for steps >= k.

namespace detail {

inline constexpr std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ull;
  }
  return h;
}

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

}  // namespace detail

class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::string_view purpose, std::uint64_t step)
      : state_(mix(seed, detail::fnv1a(purpose), step)), counter_(0) {}

  std::uint64_t next_u64() {
    return detail::splitmix64(state_ + 0x632be59bd9b4e019ull * ++counter_);
  }

  // Uniform in [0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in [lo, hi).
  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t next_index(std::uint64_t n) {
    // Multiply-shift map of a 64-bit draw onto [0, n); bias is negligible
    // for the small n used here (image and pixel indices).
    return static_cast<std::uint64_t>(next_double() * static_cast<double>(n));
  }

  // Standard normal via Box-Muller. Draws two uniforms per call; the spare
  // is cached so consecutive calls use both halves of the pair.
  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = next_double();
    double u2 = next_double();
    // Guard against log(0).
    while (u1 <= 0.0) u1 = next_double();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  static constexpr std::uint64_t mix(std::uint64_t seed, std::uint64_t purpose,
                                     std::uint64_t step) {
    std::uint64_t h = detail::splitmix64(seed ^ 0x243f6a8885a308d3ull);
    h = detail::splitmix64(h ^ purpose);
    h = detail::splitmix64(h ^ step);
    return h;
  }

  std::uint64_t state_;
  std::uint64_t counter_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace overnet
