#pragma once

#include <cstdint>

namespace mixaug {

// Seedable deterministic generator (xoshiro256++ seeded via splitmix64).
// Equal seeds produce bitwise-equal draw streams. Instances are single-owner;
// parallel callers hold their own seeded instance.
class Rng {
  public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    // Uniform on the open interval (0,1), 53-bit resolution. Never returns
    // exactly 0 or 1, so log() of a draw is always finite.
    double uniform();

    double uniform(double lo, double hi);

    // Standard normal via Box-Muller; consumes exactly two uniforms.
    double gaussian();

    // Unbiased integer in [0, n) by rejection. n must be positive.
    std::uint64_t uniform_index(std::uint64_t n);

  private:
    std::uint64_t state_[4];
};

// One draw from Gamma(shape_param, scale 1) using the Marsaglia-Tsang (2000)
// squeeze method; shapes below 1 use the boost X ~ Gamma(a+1) * U^(1/a).
// Throws DomainError when shape_param <= 0.
double sample_gamma(double shape_param, Rng& rng);

// One draw from Beta(alpha, alpha) as G1/(G1+G2) with independent Gamma(alpha)
// draws, clamped to [0,1]. Throws DomainError when alpha <= 0.
double sample_beta(double alpha, Rng& rng);

}  // namespace mixaug
