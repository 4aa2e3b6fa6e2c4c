// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any FAIL.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "../tests/oracles.hpp"
#include "beamtrack/beamtrack.hpp"

using namespace beamtrack;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

std::string fmt(const char* f, auto... v) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, v...);
    return buf;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

ChannelParams random_psi(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> g(-1, 1), x(-3, 3);
    cplx b(g(rng), g(rng));
    if (std::abs(b) < 0.2) b += 0.6;
    return ChannelParams::make(b, Dpv{x(rng), x(rng)});
}

ArrayConfig square(int n, double pilot = 1.0) {
    ArrayConfig c;
    c.M = c.N = n;
    c.pilot_amp = pilot;
    return c;
}

// ---- large-array references from direct one-dimensional sums ------------------
//
// With beams centered at x = 0 every inner product factors over the two axes,
// so M = N in the thousands stays cheap. Finite-size errors decay like 1/n^2 and
// two sizes are combined by Richardson extrapolation.

struct AxisSums {
    cplx s0, s1; // sum_m (j 2 pi m / n)^k exp(-j 2 pi m d / n), k = 0, 1
};

AxisSums axis_sums(double d, int n) {
    AxisSums s{0, 0};
    for (int m = 0; m < n; ++m) {
        const cplx e = std::exp(cplx(0, -2 * oracle::kPi * m * d / n));
        s.s0 += e;
        s.s1 += cplx(0, 2 * oracle::kPi * m / n) * e;
    }
    return s;
}

struct ProbeSums {
    CVec g{3}, d1{3}, d2{3}; // w_i^H a(x), d/dx1, d/dx2 at x = 0
};

ProbeSums probe_sums(const OffsetSet& o, int n) {
    ProbeSums p;
    for (int i = 0; i < 3; ++i) {
        const Dpv d = o.deltas[static_cast<std::size_t>(i)];
        const AxisSums a = axis_sums(d.x1, n), b = axis_sums(d.x2, n);
        p.g(i) = a.s0 * b.s0 / double(n);
        p.d1(i) = a.s1 * b.s0 / double(n);
        p.d2(i) = a.s0 * b.s1 / double(n);
    }
    return p;
}

// MN * C_S at M = N = n, unit pilot, noise and gain.
double mn_crlb_static_direct(const OffsetSet& o, int n) {
    const ProbeSums p = probe_sums(o, n);
    CMat j(3, 4);
    j << p.g, cplx(0, 1) * p.g, p.d1, p.d2;
    const Mat4 f = 2.0 * (j.adjoint() * j).real();
    // columns a, ja, da/dx1, da/dx2 of dh/dpsi, each coef * f(m) * h(n)
    cplx a1 = 0;
    double a2 = 0;
    for (int m = 0; m < n; ++m) {
        a1 += cplx(0, 2 * oracle::kPi * m / n);
        a2 += std::pow(2 * oracle::kPi * m / n, 2);
    }
    auto inner = [&](int p, int q) -> cplx {
        if (p == 0 && q == 0) return double(n);
        if (p == 0) return a1;
        if (q == 0) return std::conj(a1);
        return a2;
    };
    const std::array<cplx, 4> coef{1.0, cplx(0, 1), 1.0, 1.0};
    const std::array<int, 4> row{0, 0, 1, 0}, col{0, 0, 0, 1};
    Mat4 gram;
    for (int c = 0; c < 4; ++c)
        for (int d = 0; d < 4; ++d)
            gram(c, d) = (std::conj(coef[c]) * coef[d] * inner(row[c], row[d]) * inner(col[c], col[d])).real();
    return (f.inverse() * gram).trace();
}

// MN * C_DI at M = N = n, unit pilot and noise, gain variance snr.
double mn_crlb_di_direct(const OffsetSet& o, int n, double snr) {
    const ProbeSums p = probe_sums(o, n);
    const CMat s = snr * p.g * p.g.adjoint() + CMat::Identity(3, 3);
    const CMat si = s.inverse();
    const std::array<CMat, 2> ds{snr * (p.d1 * p.g.adjoint() + p.g * p.d1.adjoint()),
                                 snr * (p.d2 * p.g.adjoint() + p.g * p.d2.adjoint())};
    Mat2 f;
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) f(a, b) = (si * ds[a] * si * ds[b]).trace().real();
    return double(n) * n * f.inverse().trace();
}

template <class F>
double extrapolated(F value_at) {
    const double lo = value_at(1024), hi = value_at(2048);
    return (4 * hi - lo) / 3;
}

// ---- CLI ----------------------------------------------------------------------

std::string run_capture(const std::string& cmd, int& status) {
    std::string out;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) {
        status = -1;
        return out;
    }
    char buf[4096];
    while (std::size_t n = std::fread(buf, 1, sizeof buf, p)) out.append(buf, n);
    status = pclose(p);
    return out;
}

bool parse_offsets_line(const std::string& text, OffsetSet& o, double& crlb) {
    std::istringstream in(text);
    std::string line;
    bool got_o = false, got_c = false;
    while (std::getline(in, line)) {
        if (line.rfind("offsets:", 0) == 0) {
            std::array<double, 6> z{};
            if (std::sscanf(line.c_str(), "offsets: (%lf, %lf) (%lf, %lf) (%lf, %lf)", &z[0], &z[1],
                            &z[2], &z[3], &z[4], &z[5]) == 6) {
                o = OffsetSet::from_flat(z.data());
                got_o = true;
            }
        } else if (line.rfind("crlb:", 0) == 0) {
            got_c = std::sscanf(line.c_str(), "crlb: %lf", &crlb) == 1;
        }
    }
    return got_o && got_c;
}

Outcome cli_reproduction(const std::string& args, std::function<double(const OffsetSet&)> reference,
                         const OffsetSet& published) {
    int status = 0;
    const std::string out = run_capture(std::string(BEAMTRACK_CLI) + " " + args + " 2>&1", status);
    OffsetSet found;
    double reported = 0;
    if (status != 0 || !parse_offsets_line(out, found, reported))
        return {false, "cli failed or printed no offsets (status " + std::to_string(status) + ")"};
    const double at_found = reference(found);
    const double at_published = reference(published);
    const double gap = (at_found - at_published) / at_published;
    // the printed offsets are rounded, so the reported value is checked loosely
    const double consistency = rel(reported, at_found);
    return {std::abs(gap) < 1e-3 && consistency < 1e-4,
            fmt("found %.8g vs published %.8g, rel %.2e (limit 1e-3); cli value vs direct %.1e", at_found,
                at_published, gap, consistency)};
}

// ---- criteria -----------------------------------------------------------------

Outcome c1_table_ii() {
    return cli_reproduction(
        "offsets --objective static-asymptotic",
        [](const OffsetSet& o) { return extrapolated([&](int n) { return mn_crlb_static_direct(o, n); }); },
        OffsetSet::table_ii());
}

Outcome c2_table_iii() {
    return cli_reproduction(
        "offsets --objective di-asymptotic --snr-beta-db 0",
        [](const OffsetSet& o) { return extrapolated([&](int n) { return mn_crlb_di_direct(o, n, 1.0); }); },
        OffsetSet::table_iii());
}

Outcome c3_robustness() {
    struct Case {
        ObjectiveKind kind;
        double snr_db;
        OffsetSet offsets;
    };
    const std::vector<Case> cases{{ObjectiveKind::StaticFinite, 0, OffsetSet::table_ii()},
                                  {ObjectiveKind::DiFinite, 0, OffsetSet::table_iii()},
                                  {ObjectiveKind::DiFinite, 10, OffsetSet::table_iii()},
                                  {ObjectiveKind::DiFinite, 20, OffsetSet::table_iii()}};
    const ArrayConfig cfg = square(8);
    auto direct = [&](const Case& c, const OffsetSet& o) {
        if (c.kind == ObjectiveKind::StaticFinite) {
            const ChannelParams psi = ChannelParams::make(1.0, {0.0, 0.0});
            return oracle::crlb_static(cfg, oracle::beams(8, 8, psi.x, o), psi);
        }
        const double sb2 = std::pow(10.0, c.snr_db / 10);
        return oracle::fisher_di(cfg, oracle::beams(8, 8, {0, 0}, o), {0, 0}, sb2).inverse().trace();
    };
    bool ok = true;
    std::string d;
    for (const Case& c : cases) {
        SearchConfig sc;
        sc.objective = c.kind;
        sc.snr_beta_db = c.snr_db;
        sc.extra_seeds = {c.offsets};
        const SearchResult r = optimize_offsets(sc);
        const double at = direct(c, c.offsets), best = direct(c, r.offsets);
        const double gap = (at - best) / best;
        const double agree = rel(r.crlb_value, best);
        ok = ok && gap < 1e-3 && agree < 1e-6;
        d += fmt("%s%s %gdB gap %.1e", d.empty() ? "" : "; ",
                 c.kind == ObjectiveKind::StaticFinite ? "static" : "di", c.snr_db, gap);
    }
    return {ok, d + " (limit 1e-3)"};
}

Outcome c4_invariances() {
    std::mt19937_64 rng(11);
    const ArrayConfig cfg = square(8);
    std::uniform_real_distribution<double> u(-1, 1), xs(-3, 3);
    auto cs = [&](cplx b, Dpv x) {
        return crlb_static(cfg, ChannelParams::make(b, x), build_ebm(cfg, x, OffsetSet::table_ii()));
    };
    const double ref = cs(1.0, {0, 0});
    double worst = 0;
    for (int t = 0; t < 10; ++t) {
        cplx b(u(rng), u(rng));
        if (std::abs(b) < 0.1) b += 0.5;
        worst = std::max(worst, rel(cs(b, {0, 0}), ref));
        worst = std::max(worst, rel(cs(1.0, {xs(rng), xs(rng)}), ref));
    }
    auto fd = [&](Dpv x) { return fisher_di(cfg, x, DiModel{1.0}, build_ebm(cfg, x, OffsetSet::table_iii())); };
    const Mat2 fref = fd({0, 0});
    double worst_di = 0;
    for (int t = 0; t < 10; ++t)
        worst_di = std::max(worst_di, (fd({xs(rng), xs(rng)}) - fref).norm() / fref.norm());
    return {worst < 1e-9 && worst_di < 1e-9,
            fmt("crlb_static max rel dev %.1e, fisher_di max rel dev %.1e (limit 1e-9)", worst, worst_di)};
}

Outcome c5_identifiability() {
    ArrayConfig cfg;
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-0.45, 0.45), c(-3, 3);
    double worst = 0;
    int failures = 0;
    for (int t = 0; t < 100; ++t) {
        const Dpv center{c(rng), c(rng)};
        ChannelParams psi = random_psi(rng);
        psi.x = center + Dpv{u(rng), u(rng)};
        const Ebm e = build_ebm(cfg, center, OffsetSet::table_ii());
        const CVec y = oracle::mean(cfg, oracle::beams(cfg.M, cfg.N, center, OffsetSet::table_ii()), psi);
        try {
            const ChannelParams r =
                recover_from_noiseless(cfg, e, y, {center + Dpv{-0.5, -0.5}, center + Dpv{0.5, 0.5}});
            worst = std::max(worst, (r.vec() - psi.vec()).cwiseAbs().maxCoeff());
        } catch (const NoSolution&) {
            ++failures;
        }
    }
    const std::array<Dpv, 2> two{OffsetSet::table_ii().deltas[0], OffsetSet::table_ii().deltas[1]};
    double min_ratio = 1e300;
    for (int t = 0; t < 100; ++t) {
        const ChannelParams psi = random_psi(rng);
        const Ebm e = build_ebm(cfg, psi.x + Dpv{0.1, -0.2}, std::span<const Dpv>(two));
        const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(observation_jacobian(cfg, psi, e)).singularValues();
        min_ratio = std::min(min_ratio, sv(2) / std::max(sv(3), 1e-300));
    }
    return {failures == 0 && worst < 1e-9 && min_ratio > 1e6,
            fmt("recovery max err %.1e over 100 (limit 1e-9, %d unsolved); two-probe min s3/s4 %.1e (limit 1e6)",
                worst, failures, min_ratio)};
}

Outcome c6_mean_field() {
    std::mt19937_64 rng(13);
    double worst_f = 0, worst_j = 0;
    for (int t = 0; t < 50; ++t) {
        ArrayConfig cfg;
        cfg.M = 4 + int(rng() % 9);
        cfg.N = 4 + int(rng() % 9);
        cfg.pilot_amp = 0.5 + double(rng() % 100) / 50.0;
        cfg.noise_var = 0.5 + double(rng() % 100) / 100.0;
        const ChannelParams psi = random_psi(rng);
        worst_f = std::max(worst_f, mean_field(psi, psi, cfg, OffsetSet::table_ii()).norm());
        const double h = 1e-6;
        for (int c = 0; c < 4; ++c) {
            const Vec4 col = (mean_field(oracle::shifted(psi, c, h), psi, cfg, OffsetSet::table_ii()) -
                              mean_field(oracle::shifted(psi, c, -h), psi, cfg, OffsetSet::table_ii())) /
                             (2 * h);
            for (int r = 0; r < 4; ++r) worst_j = std::max(worst_j, std::abs(col(r) - (r == c ? -1.0 : 0.0)));
        }
    }
    return {worst_f < 1e-12 && worst_j < 1e-5,
            fmt("max |f| %.1e (limit 1e-12), max Jacobian entry err %.1e (limit 1e-5)", worst_f, worst_j)};
}

Outcome c7_fisher_mc() {
    const int draws = 200000;
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
    std::mt19937_64 rng(14);
    Mat4 acc = Mat4::Zero();
    for (int t = 0; t < draws; ++t) {
        CVec y = mu;
        for (int i = 0; i < 3; ++i) y(i) += oracle::cn(rng, cfg.noise_var);
        Vec4 s;
        for (std::size_t c = 0; c < 4; ++c)
            s(static_cast<Eigen::Index>(c)) =
                ((y - mm[c]).squaredNorm() - (y - mp[c]).squaredNorm()) / (cfg.noise_var * 2 * h);
        acc += s * s.transpose();
    }
    acc /= draws;
    const Mat4 fs = fisher_static(cfg, psi, build_ebm(cfg, psi.x + Dpv{0.05, -0.1}, OffsetSet::table_ii()));
    const double es = (acc - fs).norm() / fs.norm();

    const Dpv x{0.4, -0.9};
    const double sb2 = 1.0, hd = 1e-6;
    const CMat wd = oracle::beams(8, 8, x, OffsetSet::table_iii());
    const CMat l = Eigen::LLT<CMat>(oracle::sigma_di(cfg, wd, x, sb2)).matrixL();
    std::array<CMat, 4> inv;
    std::array<double, 4> logdet;
    const std::array<Dpv, 4> shift{Dpv{hd, 0}, Dpv{-hd, 0}, Dpv{0, hd}, Dpv{0, -hd}};
    for (std::size_t i = 0; i < 4; ++i) {
        const CMat si = oracle::sigma_di(cfg, wd, x + shift[i], sb2);
        inv[i] = si.inverse();
        logdet[i] = std::log(si.determinant().real());
    }
    Mat2 accd = Mat2::Zero();
    for (int t = 0; t < draws; ++t) {
        CVec z(3);
        for (int i = 0; i < 3; ++i) z(i) = oracle::cn(rng, 1.0);
        const CVec y = l * z;
        std::array<double, 4> ll;
        for (std::size_t i = 0; i < 4; ++i) ll[i] = -logdet[i] - (y.adjoint() * inv[i] * y)(0).real();
        const Vec2 sc{(ll[0] - ll[1]) / (2 * hd), (ll[2] - ll[3]) / (2 * hd)};
        accd += sc * sc.transpose();
    }
    accd /= draws;
    const Mat2 fd = fisher_di(cfg, x, DiModel{sb2}, build_ebm(cfg, x, OffsetSet::table_iii()));
    const double ed = (accd - fd).norm() / fd.norm();
    return {es < 0.03 && ed < 0.03, fmt("static rel err %.2f%%, di rel err %.2f%% (limit 3%%)", 100 * es, 100 * ed)};
}

Outcome c8_asymptotic() {
    const Mat4 ls = fisher_static_limit(OffsetSet::table_ii(), 1.0, 1.0, 1.0);
    const Mat2 ld = fisher_di_limit(OffsetSet::table_iii(), 1.0);
    double prev_s = 1e300, prev_d = 1e300;
    bool mono = true;
    std::string d = "fisher err";
    for (int n : {8, 16, 32, 64}) {
        const ArrayConfig cfg = square(n);
        const double mn = n * n;
        const double es = (fisher_static_offsets(cfg, 1.0, OffsetSet::table_ii()) / mn - ls).norm();
        const double ed = (fisher_di_offsets(cfg, DiModel{1.0}, OffsetSet::table_iii()) / mn - ld).norm();
        mono = mono && es < prev_s && ed < prev_d;
        prev_s = es;
        prev_d = ed;
        d += fmt(" %d:%.1e/%.1e", n, es, ed);
    }
    const double gs = rel(64.0 * 64 * crlb_static_offsets(square(64), OffsetSet::table_ii()),
                          crlb_static_asymptotic(OffsetSet::table_ii()));
    const double gd = rel(64.0 * 64 * crlb_di_offsets(square(64), DiModel{1.0}, OffsetSet::table_iii()),
                          crlb_di_asymptotic(OffsetSet::table_iii(), 1.0));
    return {mono && gs < 0.01 && gd < 0.01,
            d + fmt("; crlb gap at 64 static %.2e, di %.2e (limit 1e-2)", gs, gd)};
}

ExperimentConfig experiment(TrackerKind t, ScenarioKind k, long trials, long eccs, long every) {
    ExperimentConfig ec;
    ec.tracker = t;
    ec.scenario.kind = k;
    ec.scenario.apply_region();
    ec.num_trials = trials;
    ec.num_eccs = eccs;
    ec.record_every = every;
    return ec;
}

Outcome c9_jbct() {
    SearchConfig sc;
    sc.objective = ObjectiveKind::StaticFinite;
    sc.extra_seeds = {OffsetSet::table_ii()};
    const double cmin = optimize_offsets(sc).crlb_value;
    const auto rec = run_experiment(experiment(TrackerKind::JbctS, ScenarioKind::QuasiStatic, 500, 2000, 2000));
    const MetricsRecord& r = rec.back();
    const double ratio = double(r.ecc) * r.mse_h / cmin;
    return {r.ecc == 2000 && ratio >= 0.85 && ratio <= 1.25,
            fmt("JBCT_S k*mse_h/C_S^min = %.3f at k=%ld (C_S^min %.6g; bound [0.85, 1.25])", ratio, r.ecc, cmin)};
}

Outcome c9_rbt() {
    SearchConfig sc;
    sc.objective = ObjectiveKind::DiFinite;
    sc.extra_seeds = {OffsetSet::table_iii()};
    const double cmin0 = optimize_offsets(sc).crlb_value;
    ExperimentConfig ec = experiment(TrackerKind::RbtDi, ScenarioKind::DynamicI, 500, 2000, 2000);
    ec.rbt_mode = RbtMode::Perfect;
    const auto rec = run_experiment(ec);
    const MetricsRecord& r = rec.back();
    // per-trial gain variance includes the element pattern, so the bound is the
    // trial average of the finite-size minimum at each trial's SNR_beta
    const double bound = r.crlb_ref * double(r.ecc);
    const double ratio = r.mse_x / r.crlb_ref;
    return {r.ecc == 2000 && ratio >= 0.85 && ratio <= 1.25,
            fmt("RBT k*mse_x/C_DI = %.3f at k=%ld (trial-averaged C_DI %.6g, C_DI^min at 0 dB %.6g; bound "
                "[0.85, 1.25])",
                ratio, r.ecc, bound, cmin0)};
}

// two runs, each limited to 10 minutes
Outcome c9_convergence() {
    const auto t0 = std::chrono::steady_clock::now();
    const Outcome a = c9_jbct();
    const double ta = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const Outcome b = c9_rbt();
    const double tb = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() - ta;
    return {a.pass && b.pass && ta < 600 && tb < 600,
            a.detail + fmt(" [%.1f s]; ", ta) + b.detail + fmt(" [%.1f s]", tb)};
}

Outcome c10_op_counts() {
    std::mt19937_64 rng(15);
    auto y3 = [&] {
        CVec3 y;
        for (int i = 0; i < 3; ++i) y(i) = oracle::cn(rng, 9.0);
        return y;
    };
    ArrayConfig cfg;
    cfg.pilot_amp = 1.7;
    cfg.noise_var = 0.6;
    const FastUpdateCache jc = build_fast_cache(cfg, OffsetSet::table_ii());
    const DiModel model{0.7};
    const RbtCache rc = build_rbt_cache(cfg, OffsetSet::table_iii(), model.sigma_beta_sq);
    bool counts = true;
    double worst = 0;
    for (int t = 0; t < 100; ++t) {
        const ChannelParams ph = random_psi(rng);
        const CVec3 y = y3();
        OpCounter a;
        const Vec4 fast = jbct_direction_fast(jc, ph.beta(), y, a);
        worst = std::max(worst, (fast - jbct_direction_naive(cfg, ph, OffsetSet::table_ii(), y)).cwiseAbs().maxCoeff());
        OpCounter b;
        const Vec2 rf = rbt_direction_fast(rc, y, b);
        worst = std::max(worst, (rf - rbt_direction_naive(cfg, ph.x, OffsetSet::table_iii(), model, y)).cwiseAbs().maxCoeff());
        counts = counts && a.count == 45 && b.count == 28;
    }
    auto js = make_jbct_state(cfg, OffsetSet::table_ii(), StepSchedule::constant(0.7), ChannelParams::make(1.0, {0.1, 0.2}));
    auto rs = make_rbt_state(cfg, OffsetSet::table_iii(), StepSchedule::diminishing(), {0.1, 0.2}, model);
    for (int k = 0; k < 10; ++k) {
        js = jbct_static_step(std::move(js), cfg, y3());
        counts = counts && js.op_count_last_ecc == 45;
        js = jbct_dii_step(std::move(js), cfg, y3());
        counts = counts && js.op_count_last_ecc == 45;
        rs = rbt_di_step(std::move(rs), cfg, model, y3());
        counts = counts && rs.op_count_last_ecc == 28;
    }
    return {counts && worst < 1e-10,
            fmt("counts %s (45 JBCT, 28 RBT), fast vs naive max diff %.1e (limit 1e-10)",
                counts ? "exact" : "WRONG", worst)};
}

Outcome c11_dii_ordering() {
    auto avg = [](TrackerKind t) {
        const auto rec = run_experiment(experiment(t, ScenarioKind::DynamicII, 200, 500, 1));
        double s = 0;
        for (const auto& r : rec) s += r.mse_h;
        return s / double(rec.size());
    };
    const double j = avg(TrackerKind::JbctDii), b = avg(TrackerKind::BeamSwitch), e = avg(TrackerKind::Ekf);
    return {j < b && j < e, fmt("time-averaged mse_h JBCT_DII %.4g, BeamSwitch %.4g, EKF %.4g", j, b, e)};
}

Outcome c12_channel_moments() {
    ArrayConfig cfg;
    std::mt19937_64 rng(16);
    const int n = 100000;

    ScenarioConfig qs;
    qs.apply_region();
    double m2 = 0, m4 = 0;
    for (int t = 0; t < n; ++t) {
        const double a = std::norm(draw_rician(qs.rician_k_db, rng));
        m2 += a;
        m4 += a * a;
    }
    m2 /= n;
    m4 /= n;
    const double los = std::sqrt(2 * m2 * m2 - m4);
    const double k_hat = los / (m2 - los), k = std::pow(10.0, qs.rician_k_db / 10);

    ScenarioConfig di;
    di.kind = ScenarioKind::DynamicI;
    di.apply_region();
    ChannelState st = init_channel(di, cfg, rng);
    double r2 = 0;
    for (int t = 0; t < n; ++t) {
        st = evolve(st, di, cfg, rng);
        r2 += std::norm(st.beta_c);
    }
    r2 /= n;

    // independent stationary chains: one long chain at rho near 1 has few
    // effective samples
    ScenarioConfig gm;
    gm.kind = ScenarioKind::DynamicII;
    gm.apply_region();
    double g2 = 0, lag_pow = 0;
    cplx lag = 0;
    for (int c = 0; c < n / 10; ++c) {
        ChannelState s = init_channel(gm, cfg, rng);
        cplx prev = s.beta_c;
        for (int t = 0; t < 10; ++t) {
            s = evolve(s, gm, cfg, rng);
            g2 += std::norm(s.beta_c);
            lag += s.beta_c * std::conj(prev);
            lag_pow += std::norm(prev);
            prev = s.beta_c;
        }
    }
    g2 /= n;
    const double rho_hat = lag.real() / lag_pow;

    const double ek = rel(k_hat, k), ep = rel(m2, 1.0), er = rel(r2, di.sigma_beta_c_sq), eg = rel(g2, 1.0),
                 el = rel(rho_hat, gm.rho);
    const bool ok = ek < 0.03 && ep < 0.03 && er < 0.03 && eg < 0.03 && el < 0.03;
    return {ok, fmt("Rician K %.3f/%.3f power %.4f; Rayleigh var %.4f; GM var %.4f lag-1 %.5f/%.3f (limit 3%%)",
                    k_hat, k, m2, r2, g2, rho_hat, gm.rho)};
}

struct Criterion {
    int id;
    const char* name;
    double limit_s;
    std::function<Outcome()> run;
};

} // namespace

int main() {
    const std::vector<Criterion> all{
        {1, "table-ii-reproduction", 120, c1_table_ii},
        {2, "table-iii-reproduction", 180, c2_table_iii},
        {3, "finite-size-robustness", 300, c3_robustness},
        {4, "bound-invariances", 10, c4_invariances},
        {5, "identifiability", 30, c5_identifiability},
        {6, "mean-field-invariants", 30, c6_mean_field},
        {7, "fisher-monte-carlo", 120, c7_fisher_mc},
        {8, "asymptotic-consistency", 60, c8_asymptotic},
        {9, "convergence-to-bound", 1200, c9_convergence},
        {10, "operation-counts", 10, c10_op_counts},
        {11, "dynamic-ii-ordering", 300, c11_dii_ordering},
        {12, "channel-moments", 30, c12_channel_moments},
    };
    int failed = 0;
    for (const Criterion& c : all) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = secs < c.limit_s;
        const bool pass = o.pass && in_time;
        if (!pass) ++failed;
        std::cout << (pass ? "PASS " : "FAIL ") << c.id << " " << c.name << ": " << o.detail
                  << fmt(" [%.1f s, limit %.0f s%s]", secs, c.limit_s, in_time ? "" : ", too slow") << std::endl;
    }
    std::cout << (failed ? fmt("%d check(s) failed", failed) : std::string("all checks passed")) << std::endl;
    return failed ? 1 : 0;
}
