#pragma once

// Recursive trackers: the joint gain/direction stochastic Newton tracker
// (static and fast-varying variants), the Rayleigh-gain direction tracker,
// and two baselines (codebook beam switching and an EKF).

#include <algorithm>
#include <array>
#include <cmath>

#include "beamtrack/estimation_theory.hpp"

namespace beamtrack {

// Counts scalar multiplications and divisions of the online update path.
// Real and complex operands count alike.
struct OpCounter {
    long count = 0;

    template <class A, class B>
    auto mul(const A& a, const B& b) {
        ++count;
        return a * b;
    }
    template <class A, class B>
    auto div(const A& a, const B& b) {
        ++count;
        return a / b;
    }
};

struct StepSchedule {
    enum class Kind { Diminishing, Constant };
    Kind kind = Kind::Diminishing;
    double epsilon = 1.0;
    double k0 = 0.0;
    double b = 0.7;

    static StepSchedule diminishing(double epsilon = 1.0, double k0 = 0.0) {
        return {Kind::Diminishing, epsilon, k0, 0.0};
    }
    static StepSchedule constant(double b) { return {Kind::Constant, 1.0, 0.0, b}; }

    double at(long k) const {
        return kind == Kind::Constant ? b : epsilon / (double(k) + k0);
    }

    void validate() const {
        if (kind == Kind::Diminishing && !(epsilon > 0 && k0 >= 0))
            throw ConfigError("schedule: epsilon must be positive and k0 >= 0");
        if (kind == Kind::Constant && !(b > 0)) throw ConfigError("schedule: b must be positive");
    }
};

// ---- joint gain/direction tracker -----------------------------------------

// Offline quantities of the fast update. All depend on the offsets, the array
// size and the pilot level only; the running estimate never enters.
struct FastUpdateCache {
    OffsetSet offsets;
    int M = 0, N = 0;
    double pilot_amp = 1.0, noise_var = 1.0;

    Eigen::Matrix<cplx, 3, 2> U1; // W^H [a, j a]
    Eigen::Matrix<cplx, 3, 2> U2; // W^H [da/dx1, da/dx2]
    Mat2 A_tilde_inv;
    Eigen::Matrix2cd B_tilde;
    Mat2 Is_tilde_inv;

    CVec3 e0, d1, d2; // offset-only kernels
    CVec3 s_e0;       // |s| e0

    // inverse pieces, pre-scaled by 1/|s|
    double p11 = 0;
    cplx zeta;
    Eigen::RowVector2cd kvec;
    Mat2 q22;
};

inline FastUpdateCache build_fast_cache(const ArrayConfig& cfg, const OffsetSet& offsets) {
    FastUpdateCache c;
    c.offsets = offsets;
    c.M = cfg.M;
    c.N = cfg.N;
    c.pilot_amp = cfg.pilot_amp;
    c.noise_var = cfg.noise_var;
    const ProbeKernels k = probe_kernels(cfg.M, cfg.N, offsets);
    c.e0 = k.g;
    c.d1 = k.d1;
    c.d2 = k.d2;
    c.s_e0 = cfg.pilot_amp * c.e0;
    c.U1.col(0) = c.e0;
    c.U1.col(1) = cplx(0, 1) * c.e0;
    c.U2.col(0) = c.d1;
    c.U2.col(1) = c.d2;
    const Mat2 A = (c.U1.adjoint() * c.U1).real();
    c.A_tilde_inv = small_inverse(A, "gain block");
    c.B_tilde = c.U1.adjoint() * c.U2;
    const Mat2 D = (c.U2.adjoint() * c.U2).real();
    const Mat2 Is = D - (c.B_tilde.adjoint() * c.A_tilde_inv.cast<cplx>() * c.B_tilde).real() / 2.0;
    c.Is_tilde_inv = small_inverse(Is, "direction Schur complement");

    const double a = c.e0.squaredNorm();
    const Eigen::RowVector2cd crow = c.e0.adjoint() * c.U2;
    const Mat2& Q = c.Is_tilde_inv;
    const double cqch = (crow * Q.cast<cplx>() * crow.adjoint())(0, 0).real();
    const cplx cqct = (crow * Q.cast<cplx>() * crow.transpose())(0, 0);
    const double s = cfg.pilot_amp;
    c.p11 = (1.0 / a + cqch / (2.0 * a * a)) / s;
    c.zeta = cqct / (2.0 * a * a) / s;
    c.kvec = crow * Q.cast<cplx>() / a / s;
    c.q22 = Q / s;
    return c;
}

// Stochastic Newton direction I_S^{-1} * score via the cached block inverse.
// 11 operations build the inverse, 18 the score, 16 the product.
inline Vec4 jbct_direction_fast(const FastUpdateCache& c, cplx beta, const CVec3& y, OpCounter& ops) {
    // inverse
    const double nb = ops.mul(beta, std::conj(beta)).real();
    if (!(nb > kPivotGuard)) throw SingularFisher("gain estimate vanishes");
    const double inv = ops.div(1.0, nb);
    const double q00 = ops.mul(c.q22(0, 0), inv);
    const double q01 = ops.mul(c.q22(0, 1), inv);
    const double q11 = ops.mul(c.q22(1, 1), inv);
    const cplx w = ops.mul(beta, inv);
    const cplx wk0 = ops.mul(w, c.kvec(0));
    const cplx wk1 = ops.mul(w, c.kvec(1));
    const cplx rot = ops.mul(ops.mul(ops.mul(beta, beta), inv), c.zeta);
    Mat4 P;
    P << c.p11 + rot.real(), rot.imag(), -wk0.real(), -wk1.real(),
        rot.imag(), c.p11 - rot.real(), -wk0.imag(), -wk1.imag(),
        -wk0.real(), -wk0.imag(), q00, q01,
        -wk1.real(), -wk1.imag(), q01, q11;

    // score
    CVec3 r, et1, et2;
    for (int i = 0; i < 3; ++i) {
        r(i) = y(i) - ops.mul(beta, c.s_e0(i));
        et1(i) = ops.mul(beta, c.d1(i));
        et2(i) = ops.mul(beta, c.d2(i));
    }
    cplx s0 = 0, s1 = 0, s2 = 0;
    for (int i = 0; i < 3; ++i) {
        s0 += ops.mul(std::conj(c.e0(i)), r(i));
        s1 += ops.mul(std::conj(et1(i)), r(i));
        s2 += ops.mul(std::conj(et2(i)), r(i));
    }
    const Vec4 g(s0.real(), s0.imag(), s1.real(), s2.real());

    // product
    Vec4 out = Vec4::Zero();
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) out(i) += ops.mul(P(i, j), g(j));
    return out;
}

// Reference path: explicit Fisher build from full-length vectors, inverse and
// score.
inline Vec4 jbct_direction_naive(const ArrayConfig& cfg, const ChannelParams& psi_hat,
                                 const OffsetSet& offsets, const CVec& y) {
    const Ebm ebm = build_ebm(cfg, psi_hat.x, offsets);
    const CMat g = ebm.columns.adjoint() * jacobian(cfg, psi_hat);
    const Mat4 fisher = detail::fisher_from_projection(g, cfg.pilot_amp, cfg.noise_var);
    const CVec resid = y - noiseless_mean(cfg, psi_hat, ebm);
    const Vec4 score = (2.0 * cfg.pilot_amp / cfg.noise_var) * (g.adjoint() * resid).real();
    return fisher_inverse(fisher, "static Fisher matrix") * score;
}

// f(psi_hat): expected update direction when the truth is psi, with the
// exploring beams centered at psi_hat.
inline Vec4 mean_field(const ChannelParams& psi_hat, const ChannelParams& psi_true,
                       const ArrayConfig& cfg, const Ebm& ebm) {
    const CMat g = ebm.columns.adjoint() * jacobian(cfg, psi_hat);
    const Mat4 fisher = detail::fisher_from_projection(g, cfg.pilot_amp, cfg.noise_var);
    const CVec resid = noiseless_mean(cfg, psi_true, ebm) - noiseless_mean(cfg, psi_hat, ebm);
    const Vec4 score = (2.0 * cfg.pilot_amp / cfg.noise_var) * (g.adjoint() * resid).real();
    return fisher_inverse(fisher, "static Fisher matrix") * score;
}

inline Vec4 mean_field(const ChannelParams& psi_hat, const ChannelParams& psi_true,
                       const ArrayConfig& cfg, const OffsetSet& offsets) {
    return mean_field(psi_hat, psi_true, cfg, build_ebm(cfg, psi_hat.x, offsets));
}

struct TrackerState {
    ChannelParams psi_hat;
    long k = 0;
    StepSchedule schedule;
    OffsetSet offsets;
    FastUpdateCache cache;
    long op_count_last_ecc = 0;
    double max_direction_step = 0.5; // per-coordinate cap on |dx| per ECC; 0 disables
    bool last_step_skipped = false;
};

inline TrackerState make_jbct_state(const ArrayConfig& cfg, const OffsetSet& offsets,
                                    StepSchedule schedule, const ChannelParams& psi0) {
    schedule.validate();
    TrackerState s;
    s.psi_hat = psi0;
    s.schedule = schedule;
    s.offsets = offsets;
    s.cache = build_fast_cache(cfg, offsets);
    return s;
}

inline TrackerState jbct_static_step(TrackerState s, const ArrayConfig& /*cfg*/, const CVec& y) {
    s.k += 1;
    s.last_step_skipped = false;
    OpCounter ops;
    Vec4 dir;
    try {
        dir = jbct_direction_fast(s.cache, s.psi_hat.beta(), y.head<3>(), ops);
    } catch (const SingularFisher&) {
        s.op_count_last_ecc = ops.count;
        s.last_step_skipped = true;
        return s;
    }
    s.op_count_last_ecc = ops.count;
    Vec4 step = s.schedule.at(s.k) * dir;
    if (s.max_direction_step > 0) {
        step(2) = std::clamp(step(2), -s.max_direction_step, s.max_direction_step);
        step(3) = std::clamp(step(3), -s.max_direction_step, s.max_direction_step);
    }
    if (!step.allFinite()) {
        s.last_step_skipped = true;
        return s;
    }
    s.psi_hat = ChannelParams::from_vec(s.psi_hat.vec() + step);
    return s;
}

// The fast-varying variant runs the same update with a constant step.
inline TrackerState jbct_dii_step(TrackerState s, const ArrayConfig& cfg, const CVec& y) {
    return jbct_static_step(std::move(s), cfg, y);
}

// ---- Rayleigh-gain direction tracker ----------------------------------------

struct RbtCache {
    OffsetSet offsets;
    int M = 0, N = 0;
    double pilot_amp = 1.0, noise_var = 1.0, sigma_beta_sq = 1.0;
    Vec2 c;                    // -(1/|Sigma|) d|Sigma|/dx_p
    std::array<CMat3, 2> Mq;   // -dSigma^{-1}/dx_p
    Mat2 fisher_inv;
};

namespace detail {

struct DiScoreParts {
    Vec2 c;
    std::array<CMat3, 2> Mq;
};

inline DiScoreParts di_score_parts(const DiTerms& t, double pilot_amp, double sigma_beta_sq,
                                   double noise_var) {
    const double ps = pilot_amp * pilot_amp * sigma_beta_sq;
    const double s2 = noise_var;
    const double det = s2 * s2 * (ps * t.g.squaredNorm() + s2);
    const CMat3 ggh = t.g * t.g.adjoint();
    DiScoreParts out;
    for (std::size_t p = 0; p < 2; ++p) {
        const double ddet = s2 * s2 * ps * t.g_tilde[p];
        out.c(static_cast<Eigen::Index>(p)) = -ddet / det;
        const CMat3 dinv = -s2 * ps * (t.G[p] * det - ggh * ddet) / (det * det);
        out.Mq[p] = -dinv;
    }
    return out;
}

} // namespace detail

inline RbtCache build_rbt_cache(const ArrayConfig& cfg, const OffsetSet& offsets,
                                double sigma_beta_sq) {
    RbtCache c;
    c.offsets = offsets;
    c.M = cfg.M;
    c.N = cfg.N;
    c.pilot_amp = cfg.pilot_amp;
    c.noise_var = cfg.noise_var;
    c.sigma_beta_sq = sigma_beta_sq;
    const DiTerms t = di_terms(probe_kernels(cfg.M, cfg.N, offsets));
    const auto parts = detail::di_score_parts(t, cfg.pilot_amp, sigma_beta_sq, cfg.noise_var);
    c.c = parts.c;
    c.Mq = parts.Mq;
    c.fisher_inv = fisher_inverse(
        fisher_di_from_terms(t, cfg.pilot_amp, sigma_beta_sq, cfg.noise_var),
        "Rayleigh-gain Fisher matrix");
    return c;
}

// Two Hermitian quadratic forms (12 operations each) and a 2x2 product.
inline Vec2 rbt_direction_fast(const RbtCache& c, const CVec3& y, OpCounter& ops) {
    Vec2 grad;
    for (std::size_t p = 0; p < 2; ++p) {
        const CMat3& m = c.Mq[p];
        cplx quad = 0;
        for (int i = 0; i < 3; ++i) {
            cplx row = 0;
            for (int j = 0; j < 3; ++j) row += ops.mul(m(i, j), y(j));
            quad += ops.mul(std::conj(y(i)), row);
        }
        grad(static_cast<Eigen::Index>(p)) = c.c(static_cast<Eigen::Index>(p)) + quad.real();
    }
    Vec2 out = Vec2::Zero();
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) out(i) += ops.mul(c.fisher_inv(i, j), grad(j));
    return out;
}

// d log p(y | x) / dx for the Rayleigh-gain likelihood, beams centered at x_hat.
inline Vec2 di_score(const ArrayConfig& cfg, Dpv x, const DiModel& model, const Ebm& ebm,
                     const CVec& y) {
    const DiTerms t = di_terms(cfg, x, ebm);
    const auto parts = detail::di_score_parts(t, cfg.pilot_amp, model.sigma_beta_sq, cfg.noise_var);
    const CVec3 y3 = y.head<3>();
    Vec2 g;
    for (std::size_t p = 0; p < 2; ++p)
        g(static_cast<Eigen::Index>(p)) =
            parts.c(static_cast<Eigen::Index>(p)) + y3.dot(parts.Mq[p] * y3).real();
    return g;
}

inline Vec2 rbt_direction_naive(const ArrayConfig& cfg, Dpv x_hat, const OffsetSet& offsets,
                                const DiModel& model, const CVec& y) {
    const Ebm ebm = build_ebm(cfg, x_hat, offsets);
    const Mat2 f = fisher_di(cfg, x_hat, model, ebm);
    return fisher_inverse(f, "Rayleigh-gain Fisher matrix") * di_score(cfg, x_hat, model, ebm, y);
}

struct RbtState {
    Dpv x_hat;
    long k = 0;
    StepSchedule schedule;
    OffsetSet offsets;
    RbtCache cache;
    long op_count_last_ecc = 0;
    long cache_rebuilds = 0;
    double max_direction_step = 0.5;
    bool last_step_skipped = false;
};

inline RbtState make_rbt_state(const ArrayConfig& cfg, const OffsetSet& offsets,
                               StepSchedule schedule, Dpv x0, const DiModel& model) {
    schedule.validate();
    RbtState s;
    s.x_hat = x0;
    s.schedule = schedule;
    s.offsets = offsets;
    s.cache = build_rbt_cache(cfg, offsets, model.sigma_beta_sq);
    return s;
}

inline RbtState rbt_di_step(RbtState s, const ArrayConfig& cfg, const DiModel& model,
                            const CVec& y) {
    s.k += 1;
    s.last_step_skipped = false;
    OpCounter ops;
    Vec2 dir;
    try {
        if (model.sigma_beta_sq != s.cache.sigma_beta_sq) {
            s.cache = build_rbt_cache(cfg, s.offsets, model.sigma_beta_sq);
            s.cache_rebuilds += 1;
        }
        dir = rbt_direction_fast(s.cache, y.head<3>(), ops);
    } catch (const SingularFisher&) {
        s.op_count_last_ecc = ops.count;
        s.last_step_skipped = true;
        return s;
    }
    s.op_count_last_ecc = ops.count;
    Vec2 step = s.schedule.at(s.k) * dir;
    if (s.max_direction_step > 0)
        step = step.cwiseMax(-s.max_direction_step).cwiseMin(s.max_direction_step);
    if (!step.allFinite()) {
        s.last_step_skipped = true;
        return s;
    }
    s.x_hat = s.x_hat + Dpv{step(0), step(1)};
    return s;
}

// Audited online operation count per ECC of the fast paths.
enum class StepKind { JbctStatic, JbctDii, Rbt };

inline long count_ops(StepKind kind) {
    ArrayConfig cfg;
    OpCounter ops;
    const CVec3 y(cplx(0.3, -0.1), cplx(-0.2, 0.4), cplx(0.1, 0.1));
    if (kind == StepKind::Rbt) {
        const RbtCache c = build_rbt_cache(cfg, OffsetSet::table_iii(), 1.0);
        rbt_direction_fast(c, y, ops);
    } else {
        const FastUpdateCache c = build_fast_cache(cfg, OffsetSet::table_ii());
        jbct_direction_fast(c, cplx(0.8, 0.3), y, ops);
    }
    return ops.count;
}

// ---- baselines ------------------------------------------------------------------

// Codebook beam switching: the current beam and its two neighbours along one
// axis (alternating per ECC) are probed; the strongest becomes current.
struct BeamSwitchState {
    Dpv current;
    double spacing = 0.5; // oversampling 2 per axis
    long k = 0;
    cplx beta_hat = 1.0;

    int axis() const { return (k % 2 == 0) ? 1 : 2; }

    std::array<Dpv, 3> probe_offsets() const {
        const Dpv e = axis() == 1 ? Dpv{spacing, 0} : Dpv{0, spacing};
        return {Dpv{0, 0}, e, -1.0 * e};
    }
    ChannelParams estimate() const { return ChannelParams::make(beta_hat, current); }
};

inline Dpv snap_to_codebook(Dpv x, double spacing) {
    return {spacing * std::round(x.x1 / spacing), spacing * std::round(x.x2 / spacing)};
}

inline BeamSwitchState make_beam_switch(Dpv x0, cplx beta0, int oversampling = 2) {
    BeamSwitchState s;
    s.spacing = 1.0 / oversampling;
    s.current = snap_to_codebook(x0, s.spacing);
    s.beta_hat = beta0;
    return s;
}

inline BeamSwitchState baseline_beam_switch_step(BeamSwitchState s, const ArrayConfig& cfg,
                                                 const CVec& y) {
    const auto offs = s.probe_offsets();
    Eigen::Index best = 0;
    y.head<3>().cwiseAbs().maxCoeff(&best);
    s.current = s.current + offs[static_cast<std::size_t>(best)];
    s.beta_hat = y(best) / (cfg.pilot_amp * std::sqrt(double(cfg.size())));
    s.k += 1;
    return s;
}

// Two-state EKF on the direction with the gain refit by least squares each ECC.
struct EkfState {
    Dpv x_hat;
    Mat2 P = Mat2::Identity() / 12.0;
    Mat2 P0 = Mat2::Identity() / 12.0;
    double q = 1e-4;
    long k = 0;
    cplx beta_hat = 1.0;
    long resets = 0;

    static std::array<Dpv, 3> probe_offsets(double radius = 0.5) {
        std::array<Dpv, 3> o;
        for (int i = 0; i < 3; ++i) {
            const double ang = kPi / 2 + 2.0 * kPi * i / 3.0;
            o[static_cast<std::size_t>(i)] = {radius * std::cos(ang), radius * std::sin(ang)};
        }
        return o;
    }
    ChannelParams estimate() const { return ChannelParams::make(beta_hat, x_hat); }
};

inline EkfState make_ekf(Dpv x0, cplx beta0, double q = 1e-4) {
    EkfState s;
    s.x_hat = x0;
    s.beta_hat = beta0;
    s.q = q;
    return s;
}

inline EkfState baseline_ekf_step(EkfState s, const ArrayConfig& cfg, const CVec& y) {
    s.k += 1;
    s.P += s.q * Mat2::Identity();
    const auto offs = EkfState::probe_offsets();
    const Ebm ebm = build_ebm(cfg, s.x_hat, std::span<const Dpv>(offs));
    const CMat wh = ebm.columns.adjoint();
    const CVec e = wh * steering_vector(cfg, s.x_hat);
    const double sa = cfg.pilot_amp;
    const cplx beta = e.dot(y) / (sa * e.squaredNorm());
    const CVec nu = y - sa * beta * e;
    CMat hc(3, 2);
    hc.col(0) = sa * beta * (wh * steering_derivative(cfg, s.x_hat, 1));
    hc.col(1) = sa * beta * (wh * steering_derivative(cfg, s.x_hat, 2));
    Eigen::Matrix<double, 6, 2> H;
    H.topRows<3>() = hc.real();
    H.bottomRows<3>() = hc.imag();
    Eigen::Matrix<double, 6, 1> v;
    v.head<3>() = nu.real();
    v.tail<3>() = nu.imag();
    const Eigen::Matrix<double, 6, 6> R =
        (cfg.noise_var / 2.0) * Eigen::Matrix<double, 6, 6>::Identity();
    const Eigen::Matrix<double, 6, 6> S = H * s.P * H.transpose() + R;
    const Eigen::Matrix<double, 2, 6> K = s.P * H.transpose() * S.ldlt().solve(
                                                 Eigen::Matrix<double, 6, 6>::Identity());
    const Vec2 dx = K * v;
    const Mat2 IKH = Mat2::Identity() - K * H;
    Mat2 P = IKH * s.P * IKH.transpose() + K * R * K.transpose();
    P = 0.5 * (P + P.transpose());
    Eigen::SelfAdjointEigenSolver<Mat2> es(P);
    if (!dx.allFinite() || !P.allFinite() || es.eigenvalues().minCoeff() < 0) {
        s.P = s.P0;
        s.resets += 1;
    } else {
        s.P = P;
        s.x_hat = s.x_hat + Dpv{dx(0), dx(1)};
    }
    const CVec e2 = wh * steering_vector(cfg, s.x_hat);
    s.beta_hat = e2.dot(y) / (sa * e2.squaredNorm());
    return s;
}

} // namespace beamtrack
