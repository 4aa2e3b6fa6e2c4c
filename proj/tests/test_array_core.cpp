#include <gtest/gtest.h>

#include <random>

#include "beamtrack/array_core.hpp"
#include "oracles.hpp"

using namespace beamtrack;

namespace {

ArrayConfig cfg8() { return ArrayConfig{}; }

ArrayConfig cfg_mn(int M, int N) {
    ArrayConfig c;
    c.M = M;
    c.N = N;
    return c;
}

} // namespace

TEST(DpvFromAoa, KnownDirections) {
    const auto c = cfg8();
    const Dpv a = dpv_from_aoa(c, {0.0, kPi / 2});
    EXPECT_NEAR(a.x1, 0.0, 1e-15);
    EXPECT_NEAR(a.x2, 0.0, 1e-15);
    const Dpv b = dpv_from_aoa(c, {0.0, 0.0});
    EXPECT_NEAR(b.x1, 4.0, 1e-15);
    EXPECT_NEAR(b.x2, 0.0, 1e-15);
    const Dpv d = dpv_from_aoa(c, {kPi / 6, kPi / 2});
    EXPECT_NEAR(d.x1, 0.0, 1e-15);
    EXPECT_NEAR(d.x2, 2.0, 1e-15);
}

TEST(AoaFromDpv, KnownDirections) {
    const auto c = cfg8();
    const Aoa a = aoa_from_dpv(c, {0, 0});
    EXPECT_NEAR(a.theta, 0.0, 1e-15);
    EXPECT_NEAR(a.phi, kPi / 2, 1e-15);
    const Aoa b = aoa_from_dpv(c, {4, 0});
    EXPECT_NEAR(b.theta, 0.0, 1e-15);
    EXPECT_NEAR(b.phi, 0.0, 1e-7);
}

TEST(AoaFromDpv, RoundTripOverVisibleRegion) {
    const auto c = cfg8();
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> th(-1.4, 1.4), ph(0.05, kPi - 0.05);
    for (int t = 0; t < 200; ++t) {
        const Aoa in{th(rng), ph(rng)};
        const Aoa out = aoa_from_dpv(c, dpv_from_aoa(c, in));
        EXPECT_NEAR(out.theta, in.theta, 1e-10);
        EXPECT_NEAR(out.phi, in.phi, 1e-9);
    }
}

TEST(AoaFromDpv, RejectsInvisibleDirections) {
    const auto c = cfg8();
    EXPECT_THROW(aoa_from_dpv(c, {0.0, 4.5}), OutOfPhysicalRange);
    EXPECT_THROW(aoa_from_dpv(c, {3.9, 3.9}), OutOfPhysicalRange);
}

TEST(SteeringVector, SmallCases) {
    const CVec ones = steering_vector(cfg8(), {0, 0});
    EXPECT_NEAR((ones - CVec::Ones(64)).norm(), 0.0, 1e-15);
    const CVec a = steering_vector(2, 1, {1, 0});
    EXPECT_NEAR(std::abs(a(0) - cplx(1, 0)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(a(1) - cplx(-1, 0)), 0.0, 1e-15);
}

TEST(SteeringVector, MatchesKroneckerOfLinearArrays) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-4, 4);
    for (int t = 0; t < 20; ++t) {
        const Dpv x{u(rng), u(rng)};
        const int M = 5, N = 7;
        const CVec a = steering_vector(M, N, x);
        for (int m = 0; m < M; ++m)
            for (int n = 0; n < N; ++n) {
                const cplx a1 = std::polar(1.0, 2 * kPi * m * x.x1 / M);
                const cplx a2 = std::polar(1.0, 2 * kPi * n * x.x2 / N);
                EXPECT_NEAR(std::abs(a(m * N + n) - a1 * a2), 0.0, 1e-12);
            }
        EXPECT_NEAR(a.squaredNorm(), double(M * N), 1e-9);
    }
}

TEST(SteeringDerivative, SmallCases) {
    const CVec d = steering_derivative(2, 1, {0, 0}, 1);
    EXPECT_NEAR(std::abs(d(0)), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(d(1) - cplx(0, kPi)), 0.0, 1e-15);
    EXPECT_THROW(steering_derivative(2, 2, {0, 0}, 3), std::invalid_argument);
}

TEST(SteeringDerivative, MatchesCentralDifference) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-3, 3);
    const double h = 1e-6;
    for (int t = 0; t < 30; ++t) {
        const Dpv x{u(rng), u(rng)};
        for (int axis = 1; axis <= 2; ++axis) {
            Dpv e{};
            e[axis - 1] = h;
            const CVec fd = (oracle::steering(8, 8, x + e) - oracle::steering(8, 8, x - e)) / (2 * h);
            const CVec d = steering_derivative(8, 8, x, axis);
            EXPECT_LT((fd - d).norm() / d.norm(), 1e-6);
        }
    }
}

TEST(BeamGainKernel, ZeroAndNull) {
    EXPECT_NEAR(beam_gain_kernel(0, 0, 8, 8), 64.0, 1e-12);
    EXPECT_NEAR(beam_gain_kernel(1, 0, 8, 8), 0.0, 1e-12);
    EXPECT_NEAR(beam_gain_kernel(1, 0, 3, 5), 0.0, 1e-12);
}

TEST(BeamGainKernel, MatchesDirectInnerProduct) {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-1, 1), ux(-3, 3);
    for (int t = 0; t < 100; ++t) {
        const Dpv x{ux(rng), ux(rng)}, d{u(rng), u(rng)};
        const CVec a = oracle::steering(8, 6, x);
        const CVec w = oracle::steering(8, 6, x + d) / std::sqrt(48.0);
        const double direct = std::abs(std::sqrt(48.0) * w.dot(a));
        EXPECT_NEAR(std::abs(beam_gain_kernel(d.x1, d.x2, 8, 6)), direct, 1e-10);
    }
}

TEST(BeamGainKernel, PeriodicLimitSign) {
    // d = L: sum_m e^{-j 2 pi m} = L, with the Dirichlet sign (-1)^{L-1}
    EXPECT_NEAR(beam_gain_kernel(8, 0, 8, 1), -8.0, 1e-9);
    EXPECT_NEAR(beam_gain_kernel(7, 0, 7, 1), 7.0, 1e-9);
}

TEST(ElementGain, PatternValues) {
    PatternConfig pc;
    EXPECT_NEAR(element_gain_db(pc, {0, kPi / 2}), 0.0, 1e-12);
    EXPECT_NEAR(element_gain_db(pc, {pc.theta_3db / 2, kPi / 2}), -3.0, 1e-12);
    EXPECT_NEAR(element_gain_db(pc, {kPi / 2 - 1e-6, kPi - 1e-6}), -30.0, 1e-12);
    EXPECT_NEAR(element_gain_linear(pc, {pc.theta_3db / 2, kPi / 2}), std::pow(10.0, -0.15), 1e-12);
}

TEST(MainLobe, OpenSquare) {
    EXPECT_TRUE(in_main_lobe({0, 0}, {0.99, -0.99}));
    EXPECT_FALSE(in_main_lobe({0, 0}, {1.0, 0}));
    EXPECT_TRUE(in_main_lobe({3, 2}, {3.5, 2.5}));
}

TEST(ArrayConfigTest, Validation) {
    EXPECT_NO_THROW(cfg8().validate());
    EXPECT_THROW(cfg_mn(0, 4).validate(), ConfigError);
    ArrayConfig c;
    c.noise_var = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = cfg8();
    c.d1 = -0.5;
    EXPECT_THROW(c.validate(), ConfigError);
    const Dpv e = physical_extent(cfg_mn(8, 4));
    EXPECT_DOUBLE_EQ(e.x1, 4.0);
    EXPECT_DOUBLE_EQ(e.x2, 2.0);
}
