#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "fca/joint.hpp"
#include "fca/mc.hpp"

using namespace fca;

namespace {

PiecewiseParams asian_model() {
    PiecewiseParams p;
    p.epsilon = 2.0;
    p.r = 0.03;
    return p;
}

JointSetup small_setup(double u_min, std::size_t n) {
    return JointSetup{build_grid(-10.24, 256), build_u_grid(u_min, 128), build_time_grid(1e-2, n), Scheme::strang,
                      ConvolutionMethod::fft};
}

}  // namespace

TEST(Joint, AsianJacobianFactor) {
    const auto rec = asian_recursion(asian_model(), 1e-3);
    EXPECT_DOUBLE_EQ(rec.jacobian(1), 2.0);
    EXPECT_DOUBLE_EQ(rec.jacobian(3), 4.0 / 3.0);
    EXPECT_DOUBLE_EQ(vnb_recursion(1e-3).jacobian(5), 1.0);
}

TEST(Joint, InitialStateMass) {
    const ModelSpec m{asian_model()};
    const auto s = small_setup(-2.56, 10);
    const auto k = build_kernel(s.z_grid, s.time.dtau);
    const auto J = joint_init(s, m, Measure::risk_neutral, identity_recursion(), k);
    EXPECT_NEAR(J.mass, 1.0, 1e-12);
    // Identity recursion: all mass sits on the u = 0 row.
    const auto mu = marginal_u(J);
    EXPECT_NEAR(mu[s.u_grid.center()] * s.u_grid.dz, 1.0, 1e-12);
}

TEST(Joint, VnbInitialSupportNonNegative) {
    VnbParams v;
    const ModelSpec m{v};
    const auto s = small_setup(-1.28, 10);
    const auto k = build_kernel(s.z_grid, s.time.dtau);
    const auto J = joint_init(s, m, Measure::risk_neutral, vnb_recursion(s.time.dtau), k);
    for (std::size_t j = 0; j < s.u_grid.m; ++j) {
        if (s.u_grid.node(j) < -0.5 * s.u_grid.dz) {
            for (double x : J.row(j)) EXPECT_EQ(x, 0.0);
        }
    }
}

TEST(Joint, IdentityRecursionMatchesOneDimensional) {
    const ModelSpec m{asian_model()};
    const auto s = small_setup(-2.56, 50);
    const auto J = joint_propagate(m, Measure::risk_neutral, identity_recursion(), s);
    const auto mz = marginal_z(J);
    const auto p = propagate(m, Measure::risk_neutral, s.z_grid, s.time).front();
    for (std::size_t k = 0; k < s.z_grid.m; ++k) EXPECT_NEAR(mz.values[k], p.values[k], 1e-12 * (1.0 + p.values[k]));
}

TEST(Joint, MarginalMassesAgree) {
    const ModelSpec m{asian_model()};
    const auto s = small_setup(-2.56, 40);
    const auto J = joint_propagate(m, Measure::risk_neutral, asian_recursion(asian_model(), s.time.dtau), s);
    const auto mu = marginal_u(J);
    const double mass_u = s.u_grid.dz * std::accumulate(mu.begin(), mu.end(), 0.0);
    EXPECT_NEAR(mass_u, J.mass, 1e-12);
    EXPECT_NEAR(marginal_z(J).mass, J.mass, 1e-12);
    EXPECT_GT(J.mass, 0.999);
}

TEST(Joint, VnbUSupportStaysNonNegative) {
    VnbParams v;
    const ModelSpec m{v};
    JointSetup s{build_grid(-10.24, 256), build_u_grid(-5.12, 512), time_grid_to(std::log(3.5), 1e-2), Scheme::strang,
                 ConvolutionMethod::fft};
    const auto J = joint_propagate(m, Measure::risk_neutral, vnb_recursion(s.time.dtau), s);
    const auto mu = marginal_u(J);
    double below = 0.0;
    for (std::size_t j = 0; j < s.u_grid.m; ++j)
        if (s.u_grid.node(j) < -1.5 * s.u_grid.dz) below += mu[j] * s.u_grid.dz;
    EXPECT_LT(below, 1e-9);
    EXPECT_GT(J.mass, 0.999);
}

TEST(Joint, AsianMarginalUMatchesMonteCarlo) {
    const auto p = asian_model();
    const ModelSpec m{p};
    JointSetup s{build_grid(-10.24, 512), build_u_grid(-2.56, 512), build_time_grid(5e-3, 200), Scheme::strang,
                 ConvolutionMethod::fft};
    const auto J = joint_propagate(m, Measure::risk_neutral, asian_recursion(p, s.time.dtau), s);
    const auto mu = marginal_u(J);
    McConfig cfg{m, Measure::risk_neutral, s.time.tau_end(), s.time.dtau, 200000, 7, Functional::geometric_average};
    const auto samples = simulate(cfg);
    // Compare probabilities of wide u bins.
    const double edges[] = {-1.0, -0.4, -0.2, -0.1, 0.0, 0.1, 0.2, 0.4, 1.0};
    for (std::size_t b = 0; b + 1 < std::size(edges); ++b) {
        double fca = 0.0;
        for (std::size_t j = 0; j < s.u_grid.m; ++j) {
            const double lo = std::max(edges[b], s.u_grid.edge(j)), hi = std::min(edges[b + 1], s.u_grid.edge(j + 1));
            if (hi > lo) fca += mu[j] * (hi - lo);
        }
        double count = 0.0;
        for (double u : samples.functional) count += u >= edges[b] && u < edges[b + 1];
        const double pmc = count / static_cast<double>(samples.functional.size());
        const double se = std::sqrt(pmc * (1.0 - pmc) / static_cast<double>(samples.functional.size()));
        EXPECT_NEAR(fca, pmc, 4.0 * se + 2e-3) << "bin [" << edges[b] << ", " << edges[b + 1] << ")";
    }
}
