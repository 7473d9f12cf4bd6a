#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace resglass {

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (char c : s) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 1099511628211ull;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Deterministic RNG with named substreams. All variate transforms are our
// own (std distributions are implementation-defined, which would break the
// byte-identical output contract).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(splitmix64(seed)), base_(seed) {}
  Rng(std::uint64_t seed, std::string_view stream) : Rng(seed ^ fnv1a(stream)) {}

  // Derive an independent substream; does not consume engine state.
  Rng stream(std::string_view name) const { return Rng(base_ ^ fnv1a(name)); }

  std::uint64_t bits() { return eng_(); }

  // Uniform in [0, 1) on the 2^-53 grid.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // Uniform integer in [0, n) by rejection (unbiased).
  std::uint64_t integer(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = eng_();
    } while (x >= limit);
    return x % n;
  }

  // Standard normal via Box-Muller with a cached spare.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

 private:
  std::mt19937_64 eng_;
  std::uint64_t base_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace resglass
