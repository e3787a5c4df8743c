#pragma once

#include <cstdint>
#include <random>

namespace gramsyn {

// Seeded generator with platform-independent real draws. std::mt19937_64 has a
// standardized sequence; the distributions in <random> do not, so the mapping
// to doubles is done by hand.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Marsaglia polar method on top of uniform01; deterministic across builds.
  double normal() {
    for (;;) {
      const double a = 2.0 * uniform01() - 1.0;
      const double b = 2.0 * uniform01() - 1.0;
      const double s = a * a + b * b;
      if (s > 0.0 && s < 1.0) return a * std::sqrt(-2.0 * std::log(s) / s);
    }
  }

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace gramsyn
