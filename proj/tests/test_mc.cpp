#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "fca/black_scholes.hpp"
#include "fca/mc.hpp"

using namespace fca;

TEST(Philox, KnownAnswers) {
    // Random123 kat_vectors for philox4x32_10.
    using C = Philox4x32::Counter;
    EXPECT_EQ(Philox4x32::generate(C{0, 0, 0, 0}, {0, 0}), (C{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
    EXPECT_EQ(Philox4x32::generate(C{0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}),
              (C{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
    EXPECT_EQ(Philox4x32::generate(C{0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u}, {0xa4093822u, 0x299f31d0u}),
              (C{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(NormalStream, Moments) {
    NormalStream s(42, 0);
    double m1 = 0, m2 = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double x = s.next();
        m1 += x;
        m2 += x * x;
    }
    EXPECT_NEAR(m1 / n, 0.0, 4.0 / std::sqrt(n));
    EXPECT_NEAR(m2 / n, 1.0, 4.0 * std::sqrt(2.0 / n));
}

TEST(Simulate, BrownianVariance) {
    // a = b = d = 0 with tiny c and e = 1: X is (nearly) a Brownian motion.
    QuadraticParams q;
    q.c = 1e-12;
    q.e = ETilde::constant(1.0);
    const auto s = simulate(McConfig{ModelSpec{q}, Measure::objective, 0.7, 1e-2, 100000, 3});
    const auto e = estimate(std::vector<double>(s.state.begin(), s.state.end()));
    std::vector<double> sq(s.state.size());
    for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = (s.state[i] - e.mean) * (s.state[i] - e.mean);
    const auto v = estimate(sq);
    EXPECT_NEAR(v.mean, 0.7, 3.0 * v.std_error);
}

TEST(Simulate, PiecewiseLeptokurtic) {
    PiecewiseParams p;
    p.epsilon = 2.0;
    const auto s = simulate(McConfig{ModelSpec{p}, Measure::objective, 1.0, 1e-3, 200000, 5});
    double m2 = 0, m4 = 0;
    for (double x : s.state) {
        m2 += x * x;
        m4 += x * x * x * x;
    }
    m2 /= static_cast<double>(s.state.size());
    m4 /= static_cast<double>(s.state.size());
    EXPECT_GT(m4 / (m2 * m2), 3.0);
}

TEST(Simulate, DeterministicAcrossRunsAndThreads) {
    PiecewiseParams p;
    McConfig cfg{ModelSpec{p}, Measure::objective, 0.5, 1e-2, 5000, 11, Functional::geometric_average};
    cfg.threads = 1;
    const auto a = simulate(cfg);
    const auto b = simulate(cfg);
    cfg.threads = 3;
    const auto c = simulate(cfg);
    EXPECT_EQ(a.state, b.state);
    EXPECT_EQ(a.functional, b.functional);
    EXPECT_EQ(a.state, c.state);
    EXPECT_EQ(a.functional, c.functional);
}

TEST(Simulate, Snapshots) {
    PiecewiseParams p;
    McConfig cfg{ModelSpec{p}, Measure::objective, 0.5, 1e-2, 1000, 11};
    cfg.snapshot_taus = {0.1, 0.5};
    const auto s = simulate(cfg);
    ASSERT_EQ(s.snapshots.size(), 2u);
    EXPECT_EQ(s.snapshots[1], s.state);
    cfg.snapshot_taus = {0.105};
    EXPECT_THROW(simulate(cfg), std::invalid_argument);
}

TEST(Simulate, VnbFunctionalNonNegative) {
    VnbParams v;
    const auto s =
        simulate(McConfig{ModelSpec{v}, Measure::risk_neutral, std::log(3.5), 1e-2, 2000, 1, Functional::integrated_omega_squared});
    for (double u : s.functional) EXPECT_GE(u, 0.0);
}

TEST(Histogram, SingleBin) {
    const std::vector<double> x(10, 0.5);
    const auto h = histogram(x, 4, 0.0, 1.0);
    EXPECT_DOUBLE_EQ(h.density[2], 1.0 / 0.25);
    EXPECT_EQ(h.counts[2], 10u);
}

TEST(Histogram, GaussianCoverage) {
    // Coverage pooled over ten independent samples of 1e6 normals.
    int eligible = 0, covered = 0;
    for (std::uint64_t rep = 0; rep < 10; ++rep) {
        NormalStream s(7, rep);
        std::vector<double> x(1000000);
        for (auto& v : x) v = s.next();
        const auto h = histogram(x, 100, -5.0, 5.0);
        for (std::size_t b = 0; b < 100; ++b) {
            if (h.counts[b] < 100) continue;
            const double lo = h.bin_edges[b], hi = h.bin_edges[b + 1];
            const double truth = (norm_cdf(hi) - norm_cdf(lo)) / (hi - lo);
            ++eligible;
            covered += truth >= h.ci_low[b] && truth <= h.ci_high[b];
        }
    }
    EXPECT_GE(static_cast<double>(covered), 0.93 * eligible) << covered << "/" << eligible;
}

TEST(Histogram, TailBinsAreNoisy) {
    NormalStream s(9, 2);
    std::vector<double> x(1000000);
    for (auto& v : x) v = s.next();
    const auto h = histogram(x, 100, -5.0, 5.0);
    const double peak = norm_pdf(0.0);
    for (std::size_t b = 0; b < 100; ++b) {
        const double mid = 0.5 * (h.bin_edges[b] + h.bin_edges[b + 1]);
        if (norm_pdf(mid) <= 1e-4 * peak && h.density[b] > 0.0) {
            EXPECT_GT((h.ci_high[b] - h.ci_low[b]) / h.density[b], 0.5) << "bin at " << mid;
        }
    }
}

TEST(Estimate, ConstantPayoff) {
    McSamples s;
    s.state.assign(100, 1.0);
    const auto e = estimate_payoff(s, [](double, double) { return 1.0; }, 0.97);
    EXPECT_NEAR(e.mean, 0.97, 1e-14);
    EXPECT_NEAR(e.ci95_high - e.ci95_low, 0.0, 1e-14);
}

TEST(Estimate, Antithetic) {
    PiecewiseParams p;
    McConfig cfg{ModelSpec{p}, Measure::objective, 0.2, 1e-2, 1000, 2};
    cfg.antithetic = true;
    const auto s = simulate(cfg);
    EXPECT_TRUE(s.antithetic);
    EXPECT_EQ(s.state.size(), 1000u);
    const auto e = estimate_payoff(s, [](double x, double) { return x; }, 1.0);
    EXPECT_NEAR(e.mean, 0.0, 1e-12);  // X is odd in the noise for mu = 0
}
