#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include <crowdprice/poisson.hpp>
#include <crowdprice/random.hpp>

using namespace crowdprice;

namespace {

struct Moments {
    double mean = 0.0, var = 0.0;
};

template <typename Draw>
Moments moments(int n, Draw&& draw) {
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = draw();
        sum += x;
        sq += x * x;
    }
    const double m = sum / n;
    return {m, sq / n - m * m};
}

/// Pearson statistic against Pois(mean), bins with expected count < 5 merged into the tails.
double poisson_chi_square(const std::vector<long>& counts, double mean, long trials, int& dof) {
    double chi = 0.0, pending_obs = 0.0, pending_exp = 0.0;
    int bins = 0;
    for (std::size_t k = 0; k < counts.size(); ++k) {
        pending_obs += static_cast<double>(counts[k]);
        pending_exp += static_cast<double>(trials) * poisson_pmf(static_cast<std::int64_t>(k), mean);
        if (pending_exp >= 5.0) {
            chi += (pending_obs - pending_exp) * (pending_obs - pending_exp) / pending_exp;
            pending_obs = pending_exp = 0.0;
            ++bins;
        }
    }
    const double rest = static_cast<double>(trials) * poisson_upper_tail(static_cast<std::int64_t>(counts.size()), mean);
    pending_exp += rest;
    if (pending_exp > 0.0) {
        chi += (pending_obs - pending_exp) * (pending_obs - pending_exp) / pending_exp;
        ++bins;
    }
    dof = bins - 1;
    return chi;
}

}  // namespace

TEST(Philox, KnownAnswerVectors) {
    using B = Philox4x32::Block;
    EXPECT_EQ(Philox4x32::generate(B{0, 0, 0, 0}, {0, 0}), (B{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
    EXPECT_EQ(Philox4x32::generate(B{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}),
              (B{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
    EXPECT_EQ(Philox4x32::generate(B{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}),
              (B{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(TrialStreamTest, ReplayableAndDistinct) {
    TrialStream a(42, 7), b(42, 7), c(42, 8), d(43, 7);
    for (int i = 0; i < 100; ++i) {
        const auto x = a();
        EXPECT_EQ(x, b());
        EXPECT_NE(x, c());
        EXPECT_NE(x, d());
    }
}

TEST(TrialStreamTest, UniformRange) {
    TrialStream rng(1, 0);
    for (int i = 0; i < 100000; ++i) {
        const double u = rng.uniform();
        EXPECT_GE(u, 0.0);
        EXPECT_LT(u, 1.0);
        const double v = rng.uniform_open_zero();
        EXPECT_GT(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
    TrialStream r2(1, 1);
    const auto m = moments(200000, [&] { return r2.uniform(); });
    EXPECT_NEAR(m.mean, 0.5, 4 * std::sqrt(1.0 / 12 / 200000));
}

TEST(Samplers, NormalMoments) {
    TrialStream rng(5, 0);
    const auto m = moments(200000, [&] { return sample_normal(rng); });
    EXPECT_NEAR(m.mean, 0.0, 4 / std::sqrt(200000.0));
    EXPECT_NEAR(m.var, 1.0, 0.02);
}

TEST(Samplers, PoissonMatchesPmf) {
    for (double mean : {0.3, 3.0, 9.9, 10.0, 30.0, 250.0}) {
        TrialStream rng(9, static_cast<std::uint64_t>(mean * 10));
        const long trials = 100000;
        std::vector<long> counts(static_cast<std::size_t>(mean * 3 + 30), 0);
        for (long i = 0; i < trials; ++i) {
            const auto k = sample_poisson(rng, mean);
            ASSERT_GE(k, 0);
            if (static_cast<std::size_t>(k) < counts.size()) ++counts[static_cast<std::size_t>(k)];
        }
        int dof = 0;
        const double chi = poisson_chi_square(counts, mean, trials, dof);
        // roughly the 0.9999 quantile
        EXPECT_LT(chi, dof + 6.0 * std::sqrt(2.0 * dof) + 10.0) << "mean " << mean << " dof " << dof;
    }
    TrialStream rng(1, 1);
    EXPECT_EQ(sample_poisson(rng, 0.0), 0);
}

TEST(Samplers, GeometricMean) {
    for (double p : {1.0, 0.5, 0.1, 0.002}) {
        TrialStream rng(11, 0);
        const auto m = moments(200000, [&] { return static_cast<double>(sample_geometric(rng, p)); });
        const double sd = std::sqrt((1 - p) / (p * p));
        EXPECT_NEAR(m.mean, 1 / p, 4 * sd / std::sqrt(200000.0) + 1e-12) << p;
    }
}

TEST(Samplers, GammaAndBetaMoments) {
    for (double shape : {1.0, 2.5, 40.0}) {
        TrialStream rng(13, 0);
        const auto m = moments(200000, [&] { return sample_gamma(rng, shape); });
        EXPECT_NEAR(m.mean, shape, 4 * std::sqrt(shape / 200000));
        EXPECT_NEAR(m.var, shape, 0.03 * shape);
    }
    TrialStream rng(17, 0);
    const double a = 3, b = 5;
    const auto m = moments(200000, [&] { return sample_beta(rng, a, b); });
    EXPECT_NEAR(m.mean, a / (a + b), 0.002);
    EXPECT_NEAR(m.var, a * b / ((a + b) * (a + b) * (a + b + 1)), 0.001);
}
