#pragma once

#include <cstdint>
#include <random>

namespace cvi {

// Seeded draws backed by std::mt19937_64. The standard pins that engine's
// output stream, but the distribution adapters are implementation-defined,
// so uniforms are derived here by explicit bit manipulation. Streams are
// therefore byte-reproducible across platforms and library versions.
class SeededRng {
 public:
  explicit SeededRng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t bits() { return gen_(); }

  // Uniform double in [0, 1), 53 random mantissa bits.
  double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Unbiased integer in [0, n) by rejection.
  std::uint64_t uniform_int(std::uint64_t n) {
    const std::uint64_t limit = n * (UINT64_MAX / n);
    std::uint64_t r;
    do {
      r = gen_();
    } while (r >= limit);
    return r % n;
  }

  int coin() { return static_cast<int>(gen_() & 1u); }

 private:
  std::mt19937_64 gen_;
};

}  // namespace cvi
