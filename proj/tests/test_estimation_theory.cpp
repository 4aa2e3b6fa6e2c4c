#include <gtest/gtest.h>

#include <random>

#include "beamtrack/estimation_theory.hpp"
#include "oracles.hpp"

using namespace beamtrack;

namespace {

ArrayConfig square(int n, double pilot = 1.0) {
    ArrayConfig c;
    c.M = c.N = n;
    c.pilot_amp = pilot;
    return c;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

} // namespace

// ---- static model ---------------------------------------------------------------

TEST(Jacobian, StructureAtBroadside) {
    const ArrayConfig cfg = square(8);
    const CMat v = jacobian(cfg, ChannelParams::make(1.0, {0, 0}));
    EXPECT_NEAR((v.col(0) - CVec::Ones(64)).norm(), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(v(0, 2)), 0.0, 1e-15);
    const CMat v1 = v.leftCols(2);
    EXPECT_NEAR((v1 * v1.transpose()).norm(), 0.0, 1e-12);
}

TEST(Jacobian, GramMatchesClosedFormAtAnyDirection) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int n : {4, 8, 5}) {
        ArrayConfig cfg = square(8);
        cfg.N = n;
        const cplx beta(0.6, -1.3);
        const CMat va = jacobian(cfg, ChannelParams::make(beta, {u(rng), u(rng)}));
        const CMat vb = jacobian(cfg, ChannelParams::make(beta, {u(rng), u(rng)}));
        const CMat4 closed = gram_closed_form(cfg.M, cfg.N, beta);
        EXPECT_LT((va.adjoint() * va - closed).norm(), 1e-10 * closed.norm());
        EXPECT_LT((vb.adjoint() * vb - closed).norm(), 1e-10 * closed.norm());
    }
}

TEST(FisherStatic, MatchesDifferenceOracle) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-2, 2), d(-0.3, 0.3);
    const ArrayConfig cfg = square(8, 1.5);
    for (int t = 0; t < 10; ++t) {
        const ChannelParams psi = ChannelParams::make({u(rng), u(rng)}, {u(rng), u(rng)});
        const Ebm e = build_ebm(cfg, psi.x + Dpv{d(rng), d(rng)}, OffsetSet::table_ii());
        const Mat4 f = fisher_static(cfg, psi, e);
        const Mat4 o = oracle::fisher_static(cfg, e.columns, psi);
        EXPECT_LT((f - o).norm() / o.norm(), 1e-7);
        EXPECT_LT(rel(crlb_static(cfg, psi, e), oracle::crlb_static(cfg, e.columns, psi)), 1e-6);
    }
}

TEST(FisherStatic, PilotScaling) {
    const ChannelParams psi = ChannelParams::make({0.4, 0.9}, {0.2, -0.7});
    const Ebm e = build_ebm(square(8), psi.x, OffsetSet::table_ii());
    const Mat4 f1 = fisher_static(square(8, 1.0), psi, e);
    const Mat4 f2 = fisher_static(square(8, 2.0), psi, e);
    EXPECT_LT((f2 - 4.0 * f1).norm(), 1e-10 * f2.norm());
}

TEST(FisherStatic, MatchesScoreCovariance) {
    const ArrayConfig cfg = square(8);
    const ChannelParams psi = ChannelParams::make({0.8, -0.3}, {0.6, 1.1});
    const CMat w = oracle::beams(8, 8, psi.x + Dpv{0.05, -0.1}, OffsetSet::table_ii());
    const double h = 1e-5;
    std::array<CVec, 4> mp, mm;
    for (int c = 0; c < 4; ++c) {
        mp[static_cast<std::size_t>(c)] = oracle::mean(cfg, w, oracle::shifted(psi, c, h));
        mm[static_cast<std::size_t>(c)] = oracle::mean(cfg, w, oracle::shifted(psi, c, -h));
    }
    const CVec mu = oracle::mean(cfg, w, psi);
    std::mt19937_64 rng(4);
    Mat4 acc = Mat4::Zero();
    const int draws = 200000;
    for (int t = 0; t < draws; ++t) {
        CVec y = mu;
        for (int i = 0; i < 3; ++i) y(i) += oracle::cn(rng, cfg.noise_var);
        Vec4 s;
        for (std::size_t c = 0; c < 4; ++c)
            s(static_cast<Eigen::Index>(c)) = ((y - mm[c]).squaredNorm() - (y - mp[c]).squaredNorm()) /
                                             (cfg.noise_var * 2 * h);
        acc += s * s.transpose();
    }
    acc /= draws;
    const Ebm e = build_ebm(cfg, psi.x + Dpv{0.05, -0.1}, OffsetSet::table_ii());
    const Mat4 f = fisher_static(cfg, psi, e);
    EXPECT_LT((acc - f).norm() / f.norm(), 0.03);
}

TEST(CrlbStatic, InvariantToGainAndDirection) {
    const ArrayConfig cfg = square(8);
    auto at = [&](cplx b, Dpv x) {
        return crlb_static(cfg, ChannelParams::make(b, x), build_ebm(cfg, x, OffsetSet::table_ii()));
    };
    const double ref = at(1.0, {0, 0});
    EXPECT_LT(rel(at(0.3 * std::polar(1.0, 1.1), {0, 0}), ref), 1e-9);
    EXPECT_LT(rel(at(1.0, {1.7, -2.3}), ref), 1e-9);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> a(0, 2 * kPi);
    for (int t = 0; t < 5; ++t) EXPECT_LT(rel(at(std::polar(1.0, a(rng)), {0, 0}), ref), 1e-9);
    EXPECT_LT(rel(crlb_static_offsets(cfg, OffsetSet::table_ii()), ref), 1e-12);
}

TEST(CrlbStatic, RejectsDegenerateOffsets) {
    const OffsetSet bad{{Dpv{0.1, 0.1}, Dpv{0.1, 0.1}, Dpv{0.1, 0.1}}};
    EXPECT_THROW(crlb_static_offsets(square(8), bad), SingularFisher);
}

TEST(CrlbStaticAsymptotic, KernelAtZero) {
    const cplx k = detail::sa_kernel(0.0);
    EXPECT_NEAR(std::abs(k * k - 1.0), 0.0, 1e-15);
    // first-moment kernel against a midpoint-rule integral
    for (double d : {0.0, 1e-4, 0.3, -0.7}) {
        const int n = 20000;
        cplx s = 0;
        for (int i = 0; i < n; ++i) {
            const double u = (i + 0.5) / n;
            s += u * std::exp(cplx(0, -2 * kPi * d * u));
        }
        const cplx ref = cplx(0, 2 * kPi) * s / double(n);
        EXPECT_NEAR(std::abs(detail::sa_derivative_kernel(d) - ref), 0.0, 1e-7);
    }
}

TEST(CrlbStaticAsymptotic, FiniteSizesConverge) {
    const double lim = crlb_static_asymptotic(OffsetSet::table_ii());
    double prev_gap = 1e9;
    for (int n : {16, 32, 64}) {
        const double v = n * n * crlb_static_offsets(square(n), OffsetSet::table_ii());
        const double gap = std::abs(v - lim);
        EXPECT_LT(gap, prev_gap);
        prev_gap = gap;
    }
    EXPECT_LT(prev_gap / lim, 0.01);
    EXPECT_LT(rel(crlb_static_asymptotic(OffsetSet::table_ii(), 1, 1, cplx(0, 2)), lim), 1e-12);
}

// ---- Rayleigh-gain model -----------------------------------------------------

TEST(SigmaDi, ZeroGainVariance) {
    ArrayConfig cfg = square(8);
    cfg.noise_var = 1.7;
    const Ebm e = build_ebm(cfg, {0.3, 0.1}, OffsetSet::table_iii());
    const SigmaDi s = sigma_di(cfg, {0.2, 0.2}, DiModel{0.0}, e);
    EXPECT_NEAR(s.det, std::pow(1.7, 3), 1e-12);
    EXPECT_LT((s.inv - CMat3::Identity() / 1.7).norm(), 1e-14);
}

TEST(SigmaDi, MatchesDirectInverseAndDeterminant) {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-2, 2), d(-0.5, 0.5);
    for (int t = 0; t < 20; ++t) {
        ArrayConfig cfg = square(8, 1.3);
        cfg.noise_var = 0.8;
        const Dpv x{u(rng), u(rng)};
        const Ebm e = build_ebm(cfg, x + Dpv{d(rng), d(rng)}, OffsetSet::table_iii());
        const SigmaDi s = sigma_di(cfg, x, DiModel{1.4}, e);
        const CMat full = oracle::sigma_di(cfg, e.columns, x, 1.4);
        EXPECT_LT((s.inv - CMat(full.inverse())).norm(), 1e-10);
        EXPECT_NEAR(s.det, full.determinant().real(), 1e-10 * s.det);
    }
}

TEST(FisherDi, MatchesSlepianBangs) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-2, 2), d(-0.5, 0.5);
    for (double sb2 : {0.1, 1.0, 10.0}) {
        ArrayConfig cfg = square(8);
        const Dpv x{u(rng), u(rng)};
        const Ebm e = build_ebm(cfg, x + Dpv{d(rng), d(rng)}, OffsetSet::table_iii());
        const Mat2 f = fisher_di(cfg, x, DiModel{sb2}, e);
        const Mat2 o = oracle::fisher_di(cfg, e.columns, x, sb2);
        EXPECT_LT((f - o).norm() / o.norm(), 1e-6) << "sb2 " << sb2;
    }
}

TEST(FisherDi, MatchesScoreCovariance) {
    const ArrayConfig cfg = square(8);
    const Dpv x{0.4, -0.9};
    const double sb2 = 1.0;
    const CMat w = oracle::beams(8, 8, x, OffsetSet::table_iii());
    const CMat s = oracle::sigma_di(cfg, w, x, sb2);
    const CMat l = Eigen::LLT<CMat>(s).matrixL();
    const double h = 1e-6;
    std::array<CMat, 4> inv;
    std::array<double, 4> logdet;
    const std::array<Dpv, 4> shift{Dpv{h, 0}, Dpv{-h, 0}, Dpv{0, h}, Dpv{0, -h}};
    for (std::size_t i = 0; i < 4; ++i) {
        const CMat si = oracle::sigma_di(cfg, w, x + shift[i], sb2);
        inv[i] = si.inverse();
        logdet[i] = std::log(si.determinant().real());
    }
    std::mt19937_64 rng(8);
    Mat2 acc = Mat2::Zero();
    const int draws = 200000;
    for (int t = 0; t < draws; ++t) {
        CVec z(3);
        for (int i = 0; i < 3; ++i) z(i) = oracle::cn(rng, 1.0);
        const CVec y = l * z;
        std::array<double, 4> ll;
        for (std::size_t i = 0; i < 4; ++i) ll[i] = -logdet[i] - (y.adjoint() * inv[i] * y)(0).real();
        const Vec2 sc{(ll[0] - ll[1]) / (2 * h), (ll[2] - ll[3]) / (2 * h)};
        acc += sc * sc.transpose();
    }
    acc /= draws;
    const Mat2 f = fisher_di(cfg, x, DiModel{sb2}, build_ebm(cfg, x, OffsetSet::table_iii()));
    EXPECT_LT((acc - f).norm() / f.norm(), 0.03);
}

TEST(FisherDi, InvariantToDirection) {
    const ArrayConfig cfg = square(8);
    auto at = [&](Dpv x) { return fisher_di(cfg, x, DiModel{1.0}, build_ebm(cfg, x, OffsetSet::table_iii())); };
    const Mat2 a = at({0, 0}), b = at({2.2, -1.4});
    EXPECT_LT((a - b).norm() / a.norm(), 1e-9);
}

TEST(FisherDi, GainGradientMatchesDifference) {
    const ArrayConfig cfg = square(8);
    const Dpv x{0.3, 0.8};
    const Ebm e = build_ebm(cfg, x + Dpv{0.2, -0.1}, OffsetSet::table_iii());
    const DiTerms t = di_terms(cfg, x, e);
    const double h = 1e-6;
    for (int p = 0; p < 2; ++p) {
        Dpv d{};
        d[p] = h;
        const double fd = ((e.columns.adjoint() * oracle::steering(8, 8, x + d)).squaredNorm() -
                           (e.columns.adjoint() * oracle::steering(8, 8, x - d)).squaredNorm()) /
                          (2 * h);
        EXPECT_LT(std::abs(t.g_tilde[static_cast<std::size_t>(p)] - fd) / std::abs(fd), 1e-6);
    }
}

TEST(CrlbDi, HighSnrScaling) {
    const ArrayConfig cfg = square(8);
    double prev = 0, change = 1;
    for (double db : {10.0, 20.0, 30.0, 40.0}) {
        const double snr = std::pow(10.0, db / 10);
        const double v = snr * crlb_di_offsets(cfg, DiModel{snr}, OffsetSet::table_iii());
        if (prev > 0) change = std::abs(v - prev) / prev;
        prev = v;
    }
    EXPECT_LT(change, 0.01);
}

TEST(CrlbDi, MoreNoiseMeansLargerBound) {
    ArrayConfig a = square(8), b = square(8);
    b.noise_var = 2.0;
    EXPECT_GT(crlb_di_offsets(b, DiModel{1.0}, OffsetSet::table_iii()),
              crlb_di_offsets(a, DiModel{1.0}, OffsetSet::table_iii()));
}

TEST(CrlbDiAsymptotic, FiniteSizesConverge) {
    const double snr = 100.0;
    const double lim = crlb_di_asymptotic(OffsetSet::table_iii(), snr);
    double prev_gap = 1e9;
    for (int n : {16, 32, 64}) {
        const double v = n * n * crlb_di_offsets(square(n), DiModel{snr}, OffsetSet::table_iii());
        const double gap = std::abs(v - lim);
        EXPECT_LT(gap, prev_gap);
        prev_gap = gap;
    }
    EXPECT_LT(prev_gap / lim, 0.02);
}

TEST(CrlbDiAsymptotic, AxisSwapSymmetry) {
    OffsetSet o = OffsetSet::table_iii(), s;
    for (std::size_t i = 0; i < 3; ++i) s.deltas[i] = {o.deltas[i].x2, o.deltas[i].x1};
    EXPECT_LT(rel(crlb_di_asymptotic(s, 1.0), crlb_di_asymptotic(o, 1.0)), 1e-12);
    EXPECT_LT(rel(crlb_static_asymptotic(s), crlb_static_asymptotic(o)), 1e-12);
}

TEST(FisherLimits, ScaledFisherApproachesLimit) {
    double prev_s = 1e9, prev_d = 1e9;
    const Mat4 ls = fisher_static_limit(OffsetSet::table_ii(), 1.0, 1.0, 1.0);
    const Mat2 ld = fisher_di_limit(OffsetSet::table_iii(), 1.0);
    for (int n : {8, 16, 32, 64}) {
        const ArrayConfig cfg = square(n);
        const double mn = n * n;
        const double es = (fisher_static_offsets(cfg, 1.0, OffsetSet::table_ii()) / mn - ls).norm();
        const double ed = (fisher_di_offsets(cfg, DiModel{1.0}, OffsetSet::table_iii()) / mn - ld).norm();
        EXPECT_LT(es, prev_s);
        EXPECT_LT(ed, prev_d);
        prev_s = es;
        prev_d = ed;
    }
}
