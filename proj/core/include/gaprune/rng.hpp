#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace gaprune {

// Deterministic RNG used everywhere randomness is allowed. std::mt19937_64 has
// a standard-mandated output sequence; the distributions are hand-rolled
// because libstdc++/libc++ disagree on std::normal_distribution internals.
class rng {
  public:
    explicit rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // uniform in [0, 1), 53-bit resolution
    double uniform() {
        return double(engine_() >> 11) * (1.0 / 9007199254740992.0);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    uint64_t below(uint64_t n) {
        // modulo bias is irrelevant at the n << 2^64 scales used here
        return engine_() % n;
    }

    // Box-Muller, one value per call (the spare is kept)
    double normal(double mean = 0.0, double stddev = 1.0) {
        if (have_spare_) {
            have_spare_ = false;
            return mean + stddev * spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_      = r * std::sin(a);
        have_spare_ = true;
        return mean + stddev * (r * std::cos(a));
    }

    std::mt19937_64 & engine() { return engine_; }

  private:
    std::mt19937_64 engine_;
    double spare_      = 0.0;
    bool have_spare_   = false;
};

} // namespace gaprune
