#pragma once

#include <cstdint>
#include <random>

namespace qrac {

// Deterministic random stream. Wraps std::mt19937_64 (bit-exact per the
// standard) and derives doubles/ints from raw bits directly, so streams are
// reproducible across platforms and standard-library implementations.
class Rng {
  public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    void seed(std::uint64_t s) { engine_.seed(s); }

    std::uint64_t next_bits() { return engine_(); }

    // Uniform in [0, 1) with 53 bits of precision.
    double next_double() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    // Uniform integer in [0, n). n must be >= 1.
    int next_int(int n) {
        return static_cast<int>(engine_() % static_cast<std::uint64_t>(n));
    }

  private:
    std::mt19937_64 engine_;
};

} // namespace qrac
