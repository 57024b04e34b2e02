#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace lmt::rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Counter-based generator: every draw is a pure function of
// (seed, stream, a, b, c, d), so draws do not depend on generation order.
class Counter {
 public:
  Counter(std::uint64_t seed, std::uint64_t stream) : key_(splitmix64(splitmix64(seed) ^ stream)) {}

  std::uint64_t bits(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0,
                     std::uint64_t d = 0) const {
    std::uint64_t h = splitmix64(key_ ^ a);
    h = splitmix64(h ^ b);
    h = splitmix64(h ^ c);
    return splitmix64(h ^ d);
  }

  // Uniform on (0, 1).
  double uniform(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0,
                 std::uint64_t d = 0) const {
    return (static_cast<double>(bits(a, b, c, d) >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal by Box-Muller on two derived uniforms.
  double normal(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const {
    const double u1 = uniform(a, b, c, 0);
    const double u2 = uniform(a, b, c, 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  // Poisson by multiplying uniforms, in chunks of mean at most 50.
  std::int64_t poisson(double mean, std::uint64_t a, std::uint64_t b = 0,
                       std::uint64_t c = 0) const {
    std::int64_t total = 0;
    std::uint64_t draw = 0;
    while (mean > 0.0) {
      const double chunk = std::min(mean, 50.0);
      mean -= chunk;
      const double limit = std::exp(-chunk);
      double prod = 1.0;
      std::int64_t k = -1;
      do {
        prod *= uniform(a, b, c, (1ULL << 32) + draw++);
        ++k;
      } while (prod > limit);
      total += k;
    }
    return total;
  }

 private:
  std::uint64_t key_;
};

}  // namespace lmt::rng
