#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace crowdprice {

/**
Philox4x32-10 counter-based generator (Salmon et al., Random123).

Trial streams are keyed by the user seed and addressed by (trial index,
block counter), so any trial can be replayed in isolation and parallel runs
draw exactly the numbers a serial run would.
*/
class Philox4x32 {
public:
    using Block = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Block generate(Block ctr, Key key) noexcept {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += 0x9E3779B9u;
                key[1] += 0xBB67AE85u;
            }
            const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * ctr[2];
            const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
            const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        }
        return ctr;
    }
};

/// One independent random stream per (seed, trial).
class TrialStream {
public:
    using result_type = std::uint64_t;

    TrialStream(std::uint64_t seed, std::uint64_t trial) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          trial_(trial) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

    result_type operator()() noexcept {
        if (used_ == 2) refill();
        return buffer_[used_++];
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform on (0, 1].
    double uniform_open_zero() noexcept { return 1.0 - uniform(); }

private:
    void refill() noexcept {
        const Philox4x32::Block ctr{static_cast<std::uint32_t>(trial_), static_cast<std::uint32_t>(trial_ >> 32),
                                    static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32)};
        const auto out = Philox4x32::generate(ctr, key_);
        buffer_[0] = (std::uint64_t{out[1]} << 32) | out[0];
        buffer_[1] = (std::uint64_t{out[3]} << 32) | out[2];
        ++block_;
        used_ = 0;
    }

    Philox4x32::Key key_;
    std::uint64_t trial_;
    std::uint64_t block_ = 0;
    std::array<std::uint64_t, 2> buffer_{};
    int used_ = 2;
};

// Samplers below are written out rather than taken from <random> so that draws
// are identical across standard library implementations.

/// Standard normal, Marsaglia polar method.
template <typename Stream>
double sample_normal(Stream& rng) {
    for (;;) {
        const double u = 2.0 * rng.uniform() - 1.0;
        const double v = 2.0 * rng.uniform() - 1.0;
        const double s = u * u + v * v;
        if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
    }
}

/// Poisson: multiplication method below 10, Hormann's PTRS above.
template <typename Stream>
std::int64_t sample_poisson(Stream& rng, double mean) {
    if (!(mean > 0.0)) return 0;
    if (mean < 10.0) {
        const double limit = std::exp(-mean);
        std::int64_t k = 0;
        double prod = rng.uniform();
        while (prod > limit) {
            ++k;
            prod *= rng.uniform();
        }
        return k;
    }
    const double slam = std::sqrt(mean);
    const double loglam = std::log(mean);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
        const double u = rng.uniform() - 0.5;
        const double v = rng.uniform();
        const double us = 0.5 - std::abs(u);
        const auto k = static_cast<std::int64_t>(std::floor((2.0 * a / us + b) * u + mean + 0.43));
        if (us >= 0.07 && v <= vr) return k;
        if (k < 0 || (us < 0.013 && v > us)) continue;
        if (std::log(v) + std::log(invalpha) - std::log(a / (us * us) + b) <=
            -mean + static_cast<double>(k) * loglam - std::lgamma(static_cast<double>(k) + 1.0))
            return k;
    }
}

/// Number of Bernoulli(p) trials up to and including the first success.
template <typename Stream>
std::int64_t sample_geometric(Stream& rng, double p) {
    if (p >= 1.0) return 1;
    const double draws = std::floor(std::log(rng.uniform_open_zero()) / std::log1p(-p));
    if (draws >= 9.0e18) return std::numeric_limits<std::int64_t>::max();
    return 1 + static_cast<std::int64_t>(draws);
}

/// Gamma(shape, 1) for shape >= 1, Marsaglia-Tsang.
template <typename Stream>
double sample_gamma(Stream& rng, double shape) {
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = sample_normal(rng);
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = rng.uniform_open_zero();
        if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
}

/// Beta(a, b) for a, b >= 1.
template <typename Stream>
double sample_beta(Stream& rng, double a, double b) {
    const double x = sample_gamma(rng, a);
    const double y = sample_gamma(rng, b);
    return x / (x + y);
}

}  // namespace crowdprice
