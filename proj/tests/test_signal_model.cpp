#include <gtest/gtest.h>

#include <random>

#include "beamtrack/signal_model.hpp"
#include "oracles.hpp"

using namespace beamtrack;

namespace {

ChannelParams random_psi(std::mt19937_64& rng, double xr = 3.0) {
    std::uniform_real_distribution<double> g(-1, 1), x(-xr, xr);
    cplx b(g(rng), g(rng));
    if (std::abs(b) < 0.1) b += 0.5;
    return ChannelParams::make(b, Dpv{x(rng), x(rng)});
}

} // namespace

TEST(BuildEbm, ColumnsAndDirections) {
    ArrayConfig cfg;
    const OffsetSet o{{Dpv{0, 0}, Dpv{0.3, 0.1}, Dpv{-0.2, 0.4}}};
    const Ebm e = build_ebm(cfg, {0, 0}, o);
    EXPECT_NEAR((e.columns.col(0) - CVec::Constant(64, 1.0 / 8.0)).norm(), 0.0, 1e-15);
    const Ebm t = build_ebm(cfg, {0, 0}, OffsetSet::table_ii());
    for (int i = 0; i < 3; ++i) {
        EXPECT_EQ(t.directions[static_cast<std::size_t>(i)],
                  OffsetSet::table_ii().deltas[static_cast<std::size_t>(i)]);
        EXPECT_NEAR((t.columns.col(i).cwiseAbs() - Eigen::VectorXd::Constant(64, 1.0 / 8.0)).norm(),
                    0.0, 1e-14);
    }
    EXPECT_NEAR((t.columns - oracle::beams(8, 8, {0, 0}, OffsetSet::table_ii())).norm(), 0.0, 1e-12);
}

TEST(OffsetSetTest, Validation) {
    EXPECT_NO_THROW(OffsetSet::table_ii().validate());
    EXPECT_NO_THROW(OffsetSet::table_iii().validate());
    EXPECT_THROW((OffsetSet{{Dpv{0, 0}, Dpv{0, 0}, Dpv{0.1, 0}}}.validate()), ConfigError);
    EXPECT_THROW((OffsetSet{{Dpv{0, 0}, Dpv{1.0, 0}, Dpv{0.1, 0}}}.validate()), ConfigError);
}

TEST(Observe, ZeroNoiseIsExactMean) {
    ArrayConfig cfg;
    cfg.noise_var = 1e-300;
    std::mt19937_64 rng(1);
    const ChannelParams psi = ChannelParams::make({0.3, -0.8}, {0.4, 1.1});
    const Ebm e = build_ebm(cfg, {0.5, 1.0}, OffsetSet::table_ii());
    const CVec y = observe(cfg, psi, e, rng);
    EXPECT_LT((y - oracle::mean(cfg, e.columns, psi)).norm(), 1e-12);
}

TEST(Observe, NoiseMoments) {
    ArrayConfig cfg;
    cfg.noise_var = 2.0;
    std::mt19937_64 rng(2);
    const ChannelParams psi = ChannelParams::make(0.0, {0.0, 0.0});
    const Ebm e = build_ebm(cfg, {0, 0}, OffsetSet::table_ii());
    const int n = 100000;
    CVec sum = CVec::Zero(3);
    Eigen::Vector3d pow = Eigen::Vector3d::Zero();
    for (int t = 0; t < n; ++t) {
        const CVec y = observe(cfg, psi, e, rng);
        sum += y;
        pow += y.cwiseAbs2();
    }
    const double sd = std::sqrt(cfg.noise_var / 2 / n);
    for (int i = 0; i < 3; ++i) {
        EXPECT_LT(std::abs(sum(i).real() / n), 4 * sd);
        EXPECT_LT(std::abs(sum(i).imag() / n), 4 * sd);
        EXPECT_NEAR(pow(i) / n, cfg.noise_var, 0.03 * cfg.noise_var);
    }
}

TEST(NoiselessMean, ZeroOffsetAndNull) {
    ArrayConfig cfg;
    const OffsetSet o{{Dpv{0, 0}, Dpv{1, 0}, Dpv{0.2, 0.3}}};
    const ChannelParams psi = ChannelParams::make(1.0, {0.7, -0.4});
    const CVec y = noiseless_mean(cfg, psi, build_ebm(cfg, psi.x, o));
    EXPECT_NEAR(std::abs(y(0) - cplx(8, 0)), 0.0, 1e-12);
    EXPECT_NEAR(std::abs(y(1)), 0.0, 1e-12);
}

TEST(NoiselessMean, MatchesDirichletClosedForm) {
    ArrayConfig cfg;
    cfg.M = 8;
    cfg.N = 6;
    cfg.pilot_amp = 1.7;
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-0.9, 0.9);
    for (int t = 0; t < 50; ++t) {
        const ChannelParams psi = random_psi(rng);
        const Dpv c = psi.x + Dpv{u(rng), u(rng)};
        const Ebm e = build_ebm(cfg, c, OffsetSet::table_iii());
        const CVec y = noiseless_mean(cfg, psi, e);
        for (int i = 0; i < 3; ++i) {
            const Dpv w = e.directions[static_cast<std::size_t>(i)];
            const double d1 = w.x1 - psi.x.x1, d2 = w.x2 - psi.x.x2;
            const double ya = (std::sin(kPi * d1) / std::sin(kPi * d1 / 8)) *
                              (std::sin(kPi * d2) / std::sin(kPi * d2 / 6));
            const cplx ph = std::polar(1.0, -kPi * (7.0 * d1 / 8 + 5.0 * d2 / 6));
            const cplx expect = cfg.pilot_amp * psi.beta() / std::sqrt(48.0) * ya * ph;
            EXPECT_NEAR(std::abs(y(i) - expect), 0.0, 1e-10);
        }
    }
}

TEST(OffsetKernel, IndependentOfDirection) {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-1, 1), ux(-4, 4);
    for (int t = 0; t < 40; ++t) {
        const Dpv d{u(rng), u(rng)}, x{ux(rng), ux(rng)};
        const auto k = offset_kernel(8, 5, d);
        const CVec w = oracle::steering(8, 5, x + d) / std::sqrt(40.0);
        const double h = 1e-6;
        const CVec d1 = (oracle::steering(8, 5, x + Dpv{h, 0}) - oracle::steering(8, 5, x - Dpv{h, 0})) / (2 * h);
        const CVec d2 = (oracle::steering(8, 5, x + Dpv{0, h}) - oracle::steering(8, 5, x - Dpv{0, h})) / (2 * h);
        EXPECT_NEAR(std::abs(k.g - w.dot(oracle::steering(8, 5, x))), 0.0, 1e-11);
        EXPECT_NEAR(std::abs(k.dg1 - w.dot(d1)), 0.0, 1e-6);
        EXPECT_NEAR(std::abs(k.dg2 - w.dot(d2)), 0.0, 1e-6);
    }
}

TEST(Recovery, KnownChannel) {
    ArrayConfig cfg;
    const ChannelParams psi = ChannelParams::make({0.7, 0.2}, {0.1, -0.2});
    const Ebm e = build_ebm(cfg, {0, 0}, OffsetSet::table_ii());
    const ChannelParams r =
        recover_from_noiseless(cfg, e, noiseless_mean(cfg, psi, e), {{-0.6, -0.6}, {0.6, 0.6}});
    EXPECT_LT((r.vec() - psi.vec()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Recovery, ShiftProperty) {
    // at x = center the amplitude ratios equal the offset-only kernel ratios
    ArrayConfig cfg;
    const Dpv c{1.3, -0.4};
    const Ebm e = build_ebm(cfg, c, OffsetSet::table_ii());
    const CVec y = noiseless_mean(cfg, ChannelParams::make(1.0, c), e);
    for (int i = 1; i < 3; ++i) {
        const double r = std::abs(y(i)) / std::abs(y(0));
        const double k = std::abs(offset_kernel(8, 8, OffsetSet::table_ii().deltas[static_cast<std::size_t>(i)]).g) /
                         std::abs(offset_kernel(8, 8, OffsetSet::table_ii().deltas[0]).g);
        EXPECT_NEAR(r, k, 1e-12);
    }
}

TEST(Recovery, RandomChannelsRoundTrip) {
    ArrayConfig cfg;
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-0.45, 0.45);
    for (int t = 0; t < 100; ++t) {
        const Dpv c{std::uniform_real_distribution<double>(-3, 3)(rng), std::uniform_real_distribution<double>(-3, 3)(rng)};
        ChannelParams psi = random_psi(rng);
        psi.x = c + Dpv{u(rng), u(rng)};
        const Ebm e = build_ebm(cfg, c, OffsetSet::table_ii());
        const ChannelParams r = recover_from_noiseless(cfg, e, noiseless_mean(cfg, psi, e),
                                                       {c + Dpv{-0.5, -0.5}, c + Dpv{0.5, 0.5}});
        EXPECT_LT((r.vec() - psi.vec()).cwiseAbs().maxCoeff(), 1e-9) << "trial " << t;
    }
}

TEST(Recovery, TwoProbesAreRankDeficient) {
    ArrayConfig cfg;
    std::mt19937_64 rng(10);
    const std::array<Dpv, 2> two{OffsetSet::table_ii().deltas[0], OffsetSet::table_ii().deltas[1]};
    for (int t = 0; t < 100; ++t) {
        const ChannelParams psi = random_psi(rng);
        const Ebm e = build_ebm(cfg, psi.x + Dpv{0.1, -0.2}, std::span<const Dpv>(two));
        const Eigen::MatrixXd j = observation_jacobian(cfg, psi, e);
        ASSERT_EQ(j.rows(), 4);
        const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(j).singularValues();
        EXPECT_GT(sv(2) / std::max(sv(3), 1e-300), 1e6);
        // three probes give full column rank
        const Ebm e3 = build_ebm(cfg, psi.x + Dpv{0.1, -0.2}, OffsetSet::table_ii());
        const Eigen::VectorXd s3 = Eigen::JacobiSVD<Eigen::MatrixXd>(observation_jacobian(cfg, psi, e3)).singularValues();
        EXPECT_GT(s3(3) / s3(0), 1e-3);
    }
}

TEST(Recovery, ObservationJacobianMatchesDifferences) {
    ArrayConfig cfg;
    std::mt19937_64 rng(12);
    for (int t = 0; t < 10; ++t) {
        const ChannelParams psi = random_psi(rng);
        const Ebm e = build_ebm(cfg, psi.x + Dpv{0.2, 0.1}, OffsetSet::table_ii());
        const CMat fd = oracle::mean_jacobian(cfg, e.columns, psi);
        const Eigen::MatrixXd j = observation_jacobian(cfg, psi, e);
        EXPECT_LT((j.topRows(3) - fd.real()).norm(), 1e-6);
        EXPECT_LT((j.bottomRows(3) - fd.imag()).norm(), 1e-6);
    }
}

TEST(Recovery, RejectsUnusableInput) {
    ArrayConfig cfg;
    const Ebm e = build_ebm(cfg, {0, 0}, OffsetSet::table_ii());
    EXPECT_THROW(recover_from_noiseless(cfg, e, CVec::Zero(3), {{-0.5, -0.5}, {0.5, 0.5}}), NoSolution);
    CVec junk = noiseless_mean(cfg, ChannelParams::make(1.0, {0.1, 0.2}), e);
    junk(1) *= std::polar(1.0, 0.5);
    EXPECT_THROW(recover_from_noiseless(cfg, e, junk, {{-0.5, -0.5}, {0.5, 0.5}}), NoSolution);
}
