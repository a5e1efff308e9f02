#include <cmath>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <gtest/gtest.h>

#include "fca/black_scholes.hpp"
#include "fca/mc.hpp"
#include "fca/pricing.hpp"

using namespace fca;

namespace {

PiecewiseParams rn_piecewise() {
    PiecewiseParams p;
    p.epsilon = 2.0;
    p.r = 0.03;
    return p;
}

OptionContract contract(double K, OptionStyle style = OptionStyle::vanilla_piecewise) {
    OptionContract c;
    c.strike = K;
    c.style = style;
    return c;
}

PricingGrids coarse_vanilla() {
    PricingGrids g;
    g.z_grid = build_grid(-10.24, 1024);
    g.dtau = 2e-3;
    return g;
}

}  // namespace

TEST(BlackScholes, ReferenceValue) {
    // Lognormal payoff integrated numerically.
    const double S = 100, K = 100, sig = 0.2, T = 1;
    auto integrand = [&](double w) {
        const double st = S * std::exp(-0.5 * sig * sig * T + sig * std::sqrt(T) * w);
        return std::max(st - K, 0.0) * norm_pdf(w);
    };
    const double quad = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, 0.1, 12.0, 15, 1e-14);
    EXPECT_NEAR(bs_price(S, K, 0.0, sig, T), quad, 1e-9);
    EXPECT_NEAR(bs_price(S, K, 0.0, sig, T), 7.965567, 1e-6);
}

TEST(BlackScholes, Limits) {
    EXPECT_NEAR(bs_price(100, 90, 0.03, 1e-8, 1.0), 100 - 90 * std::exp(-0.03), 1e-8);
    EXPECT_NEAR(bs_price(100, 1e-9, 0.03, 0.3, 1.0), 100.0, 1e-8);
    EXPECT_NEAR(bs_price(100, 110, 0.03, 0.3, 2.0) - bs_put(100, 110, 0.03, 0.3, 2.0), 100 - 110 * std::exp(-0.06), 1e-10);
}

TEST(ImpliedVol, RoundTrip) {
    for (double K : {70.0, 100.0, 130.0}) {
        for (double T : {0.5, 2.0}) {
            const auto v = implied_vol(bs_price(100, K, 0.03, 0.3, T), 100, K, 0.03, T);
            ASSERT_TRUE(v.has_value());
            EXPECT_NEAR(*v, 0.3, 1e-8);
        }
    }
}

TEST(ImpliedVol, BandEdgesAreFlagged) {
    const double lower = 100 - 90 * std::exp(-0.03);
    EXPECT_FALSE(implied_vol(lower, 100, 90, 0.03, 1.0).has_value());
    EXPECT_FALSE(implied_vol(100.0, 100, 90, 0.03, 1.0).has_value());
    EXPECT_FALSE(implied_vol(std::nan(""), 100, 90, 0.03, 1.0).has_value());
}

TEST(Vanilla, LimitsAndMonotonicity) {
    const auto law = solve_vanilla_piecewise(contract(100), rn_piecewise(), coarse_vanilla());
    EXPECT_NEAR(martingale_ratio(law), 1.0, 3e-3);
    auto c = contract(1e-6);
    EXPECT_NEAR(price_from_law(law, c, true), 100.0, 0.3);
    c.strike = 1e4;
    EXPECT_LT(price_from_law(law, c, true), 0.2 * 100.0);
    double prev = 1e300;
    for (double K : {80.0, 90.0, 100.0, 110.0, 120.0}) {
        c.strike = K;
        const double p = price_from_law(law, c, true);
        EXPECT_LE(p, prev);
        prev = p;
    }
}

TEST(Vanilla, DeepOutOfTheMoneyTailMatchesMonteCarlo) {
    // Under Q the law of S_T has a power-law right tail, so a strike of 100 S0 keeps a
    // visible price; the tail probability must agree with the Euler paths.
    const auto law = solve_vanilla_piecewise(contract(100), rn_piecewise(), coarse_vanilla());
    double fca = 0.0;
    for (std::size_t i = 0; i < law.growth.size(); ++i)
        if (law.growth[i] * std::exp(0.03) > 100.0) fca += law.weight[i];
    const auto s = simulate(McConfig{ModelSpec{rn_piecewise()}, Measure::risk_neutral, 2.0, 2e-3, 200000, 3});
    double hits = 0.0;
    for (double x : s.state) hits += x > std::log(100.0);
    const double pmc = hits / 2e5;
    EXPECT_NEAR(fca, pmc, 4.0 * std::sqrt(pmc / 2e5));
    EXPECT_GT(fca, 1e-4);
}

TEST(Vanilla, ShortMaturityDeepOutOfTheMoney) {
    PiecewiseParams p = rn_piecewise();
    p.epsilon = 0.5;
    auto c = contract(1e4);
    c.T = 0.25;
    const auto law = solve_vanilla_piecewise(c, p, coarse_vanilla());
    EXPECT_LT(price_from_law(law, c, true), 1e-3);
}

TEST(Vanilla, PutCallParity) {
    const auto law = solve_vanilla_piecewise(contract(100), rn_piecewise(), coarse_vanilla());
    auto c = contract(105);
    const double call = price_from_law(law, c, true);
    c.kind = OptionKind::put;
    const double put = price_from_law(law, c, true);
    EXPECT_NEAR(call - put, 100 - 105 * std::exp(-0.03), 0.3);
}

TEST(Asian, BelowVanilla) {
    PricingGrids g;
    g.z_grid = build_grid(-10.24, 512);
    g.u_grid = build_u_grid(-2.56, 512);
    g.dtau = 1e-2;
    const auto vanilla = solve_vanilla_piecewise(contract(100), rn_piecewise(), coarse_vanilla());
    const auto asian = solve_asian(contract(100, OptionStyle::geometric_asian_piecewise), rn_piecewise(), g);
    for (double K : {90.0, 100.0, 110.0}) {
        auto c = contract(K, OptionStyle::geometric_asian_piecewise);
        const double pa = price_from_law(asian, c, false);
        c.style = OptionStyle::vanilla_piecewise;
        EXPECT_LT(pa, price_from_law(vanilla, c, true)) << "K=" << K;
        EXPECT_GT(pa, 0.0);
    }
}

TEST(Vnb, ParityAndAtmVol) {
    VnbParams p;
    p.alpha = 0.1;
    PricingGrids g;
    g.z_grid = build_grid(-10.24, 512);
    g.u_grid = build_u_grid(-5.12, 1024);
    g.dtau = 2e-3;
    OptionContract c;
    c.style = OptionStyle::vanilla_vnb;
    c.t0 = p.t0;
    c.T = p.t0 + 0.5;
    const auto law = solve_vnb(c, p, g);
    EXPECT_NEAR(martingale_ratio(law), 1.0, 3e-3);
    const double call = price_from_law(law, c, true);
    c.kind = OptionKind::put;
    const double put = price_from_law(law, c, true);
    EXPECT_NEAR(call - put, 100 - 100 * std::exp(-0.03 * 0.5), 0.3);
    const auto vol = call_implied_vol(call, 100, 100, 0.03, 0.5);
    ASSERT_TRUE(vol.has_value());
    EXPECT_GT(*vol, 0.8 * p.sigma);
    EXPECT_LT(*vol, 1.2 * p.sigma);
}

TEST(Contract, Validation) {
    auto c = contract(100);
    c.T = 0.0;
    EXPECT_THROW(c.validate(), std::invalid_argument);
    c = contract(-1);
    EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Surface, SmileSpreadNeedsAllStrikes) {
    VolSurface s;
    s.strikes = {80, 100, 120};
    s.maturities = {0.5};
    s.vols = {{0.35, 0.3, 0.33}};
    s.flags = {{"", "", ""}};
    ASSERT_TRUE(smile_spread(s, 0, 80, 100, 120).has_value());
    EXPECT_NEAR(*smile_spread(s, 0, 80, 100, 120), 0.04, 1e-12);
    s.flags[0][2] = "missing";
    EXPECT_FALSE(smile_spread(s, 0, 80, 100, 120).has_value());
}
