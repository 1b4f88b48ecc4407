#include "mpsts/random.hpp"

#include <cmath>
#include <numbers>

#include "mpsts/errors.hpp"
#include "mpsts/specfun.hpp"

namespace mpsts {

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

double log_factorial(double k) { return specfun::ln_gamma(k + 1.0); }

}  // namespace

Rng::Rng(const SeededStream& stream, std::uint64_t index) {
    std::uint64_t key = stream.seed;
    key = splitmix64(key) ^ stream.stream_id;
    key = splitmix64(key) ^ index;
    for (auto& w : s_) w = splitmix64(key);
    if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
}

std::uint64_t Rng::next_u64() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform_pos()));
    const double theta = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

int Rng::geometric(double mean) {
    if (!(mean >= 0.0)) throw DomainError("geometric: mean must be nonnegative");
    if (mean == 0.0) return 0;
    const double log_q = std::log(mean) - std::log1p(mean);
    return static_cast<int>(std::floor(std::log(uniform_pos()) / log_q));
}

int Rng::poisson(double mean) {
    if (!(mean >= 0.0)) throw DomainError("poisson: mean must be nonnegative");
    if (mean == 0.0) return 0;
    if (mean < 30.0) {
        // Sequential inversion.
        double p = std::exp(-mean);
        double u = uniform();
        int k = 0;
        while (u > p) {
            u -= p;
            ++k;
            p *= mean / k;
            if (p == 0.0) break;
        }
        return k;
    }
    // PTRS transformed rejection (Hormann 1993).
    const double slam = std::sqrt(mean);
    const double loglam = std::log(mean);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
        const double u = uniform() - 0.5;
        const double v = uniform();
        const double us = 0.5 - std::abs(u);
        const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
        if (us >= 0.07 && v <= vr) return static_cast<int>(k);
        if (k < 0.0 || (us < 0.013 && v > us)) continue;
        if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <= -mean + k * loglam - log_factorial(k))
            return static_cast<int>(k);
    }
}

}  // namespace mpsts
