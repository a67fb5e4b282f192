#include "mixaug/rng.hpp"

#include <cmath>

#include "mixaug/errors.hpp"

namespace mixaug {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

}  // namespace

Rng::Rng(std::uint64_t seed) {
    std::uint64_t s = seed;
    for (auto& word : state_) word = splitmix64(s);
}

std::uint64_t Rng::next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double Rng::uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::gaussian() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

std::uint64_t Rng::uniform_index(std::uint64_t n) {
    if (n == 0) {
        throw DomainError("uniform_index requires n > 0");
    }
    // Rejection on the top of the range keeps the draw unbiased.
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

double sample_gamma(double shape_param, Rng& rng) {
    if (!(shape_param > 0.0)) {
        throw DomainError("gamma shape parameter must be positive");
    }
    if (shape_param < 1.0) {
        const double boosted = sample_gamma(shape_param + 1.0, rng);
        return boosted * std::pow(rng.uniform(), 1.0 / shape_param);
    }
    const double d = shape_param - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = rng.gaussian();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = rng.uniform();
        if (u < 1.0 - 0.0331 * (x * x) * (x * x)) {
            return d * v;
        }
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
            return d * v;
        }
    }
}

double sample_beta(double alpha, Rng& rng) {
    if (!(alpha > 0.0)) {
        throw DomainError("beta alpha parameter must be positive");
    }
    const double g1 = sample_gamma(alpha, rng);
    const double g2 = sample_gamma(alpha, rng);
    const double sum = g1 + g2;
    if (sum <= 0.0) {
        // Both draws underflowed to zero; the ratio is 50:50 by symmetry.
        return 0.5;
    }
    double lambda = g1 / sum;
    if (lambda < 0.0) lambda = 0.0;
    if (lambda > 1.0) lambda = 1.0;
    return lambda;
}

}  // namespace mixaug
