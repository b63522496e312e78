#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace profvec {

/// Seeded generator with portable derived draws. The standard
/// distributions are implementation-defined, so index and unit draws are
/// computed here from the raw 64-bit engine output.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, n). n must be positive.
  std::uint64_t index(std::uint64_t n) {
    // Lemire's multiply-shift with rejection for an unbiased draw.
    unsigned __int128 m = static_cast<unsigned __int128>(engine_()) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - n) % n;
      while (low < threshold) {
        m = static_cast<unsigned __int128>(engine_()) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  /// Uniform in [0, 1).
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi].
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

  bool bernoulli(double p) { return unit() < p; }

 private:
  std::mt19937_64 engine_;
};

/// Sub-seed for one purpose: splitmix64 over the master seed mixed with
/// the FNV-1a hash of `purpose`.
std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose);
std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose,
                          std::uint64_t index);

}  // namespace profvec
