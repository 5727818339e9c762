#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace ldb {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Reproducible random stream keyed by (seed, stream index, substream). The
/// same key always yields the same sequence, independent of which thread
/// consumes it or in what order streams are created.
class StreamRng {
 public:
  StreamRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream = 0)
      : engine_(splitmix64(splitmix64(splitmix64(seed) ^ stream) + substream)) {}

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  /// Exponential with unit rate.
  double exponential() noexcept { return -std::log1p(-uniform()); }

  /// Standard normal (Box-Muller, no cached second variate).
  double normal() noexcept {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace ldb
