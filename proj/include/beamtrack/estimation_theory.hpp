#pragma once

// Fisher information and CRLBs for the quasi-static model (joint gain and
// direction) and the Rayleigh-gain model (direction only), including their
// large-array limits.

#include <array>
#include <cmath>

#include "beamtrack/signal_model.hpp"

namespace beamtrack {

using CMat4 = Eigen::Matrix4cd;

// V = [a, j a, beta da/dx1, beta da/dx2], size MN x 4.
inline CMat jacobian(const ArrayConfig& cfg, const ChannelParams& psi) {
    const cplx b = psi.beta();
    CMat v(cfg.size(), 4);
    v.col(0) = steering_vector(cfg, psi.x);
    v.col(1) = cplx(0, 1) * v.col(0);
    v.col(2) = b * steering_derivative(cfg, psi.x, 1);
    v.col(3) = b * steering_derivative(cfg, psi.x, 2);
    return v;
}

// Closed form of V^H V, which does not depend on x.
inline CMat4 gram_closed_form(int M, int N, cplx beta) {
    const double mn = double(M) * N;
    const cplx j(0, 1);
    const double pi2 = kPi * kPi;
    const double b2 = std::norm(beta);
    const double fm = double(M - 1) / M, fn = double(N - 1) / N;
    CMat4 h;
    h(0, 0) = 1.0;
    h(0, 1) = j;
    h(0, 2) = j * kPi * beta * fm;
    h(0, 3) = j * kPi * beta * fn;
    h(1, 1) = 1.0;
    h(1, 2) = kPi * beta * fm;
    h(1, 3) = kPi * beta * fn;
    h(2, 2) = (2.0 / 3.0) * pi2 * b2 * (M - 1.0) * (2.0 * M - 1.0) / (double(M) * M);
    h(2, 3) = pi2 * b2 * fm * fn;
    h(3, 3) = (2.0 / 3.0) * pi2 * b2 * (N - 1.0) * (2.0 * N - 1.0) / (double(N) * N);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < r; ++c) h(r, c) = std::conj(h(c, r));
    return mn * h;
}

inline CMat4 gram_closed_form(const ArrayConfig& cfg, cplx beta) {
    return gram_closed_form(cfg.M, cfg.N, beta);
}

namespace detail {

// I = (2|s|^2/sigma^2) Re{G^H G} with G = W^H V (q x 4).
inline Mat4 fisher_from_projection(const CMat& g, double pilot_amp, double noise_var) {
    return (2.0 * pilot_amp * pilot_amp / noise_var) * (g.adjoint() * g).real();
}

inline CMat projection_from_kernels(const ProbeKernels& k, cplx beta) {
    CMat g(k.g.size(), 4);
    g.col(0) = k.g;
    g.col(1) = cplx(0, 1) * k.g;
    g.col(2) = beta * k.d1;
    g.col(3) = beta * k.d2;
    return g;
}

inline double normalized_trace(const Mat4& fisher, const CMat4& gram, double mn) {
    const Mat4 inv = fisher_inverse(fisher, "static Fisher matrix");
    return (inv.cast<cplx>() * gram).trace().real() / mn;
}

} // namespace detail

inline Mat4 fisher_static(const ArrayConfig& cfg, const ChannelParams& psi, const Ebm& ebm) {
    const CMat g = ebm.columns.adjoint() * jacobian(cfg, psi);
    return detail::fisher_from_projection(g, cfg.pilot_amp, cfg.noise_var);
}

// C_S = Tr{I_S^{-1} V^H V} / MN.
inline double crlb_static(const ArrayConfig& cfg, const ChannelParams& psi, const Ebm& ebm) {
    const CMat v = jacobian(cfg, psi);
    const CMat g = ebm.columns.adjoint() * v;
    const Mat4 f = detail::fisher_from_projection(g, cfg.pilot_amp, cfg.noise_var);
    return detail::normalized_trace(f, v.adjoint() * v, cfg.size());
}

// Same quantity from offset-only kernels; used where speed matters.
inline Mat4 fisher_static_offsets(const ArrayConfig& cfg, cplx beta, const OffsetSet& offsets) {
    const CMat g = detail::projection_from_kernels(probe_kernels(cfg.M, cfg.N, offsets), beta);
    return detail::fisher_from_projection(g, cfg.pilot_amp, cfg.noise_var);
}

inline double crlb_static_offsets(const ArrayConfig& cfg, const OffsetSet& offsets,
                                  cplx beta = 1.0) {
    return detail::normalized_trace(fisher_static_offsets(cfg, beta, offsets),
                                    gram_closed_form(cfg, beta), cfg.size());
}

// ---- large-array limits ---------------------------------------------------

namespace detail {

inline double nudge(double d) {
    if (std::abs(d) >= 1e-6) return d;
    return d < 0 ? -1e-6 : 1e-6;
}

// lim (1/sqrt L) sum_m e^{-j 2 pi m d / L} / sqrt L = Sa(pi d) e^{-j pi d}
inline cplx sa_kernel(double d) {
    const double t = kPi * d;
    const double sa = std::abs(t) < 1e-8 ? 1.0 - t * t / 6.0 : std::sin(t) / t;
    return sa * std::polar(1.0, -t);
}

// lim of the derivative kernel: j 2 pi int_0^1 u e^{-j 2 pi d u} du
inline cplx sa_derivative_kernel(double d) {
    const double c = 2.0 * kPi * d;
    const cplx j(0, 1);
    cplx integral;
    if (std::abs(c) < 1e-2) {
        // sum_n (-j c)^n / (n! (n + 2))
        cplx term = 1.0;
        integral = 0.0;
        for (int n = 0; n < 12; ++n) {
            integral += term / double(n + 2);
            term *= -j * c / double(n + 1);
        }
    } else {
        integral = (std::exp(-j * c) * (1.0 + j * c) - 1.0) / (c * c);
    }
    return j * 2.0 * kPi * integral;
}

inline ProbeKernels limit_kernels(const OffsetSet& offsets) {
    ProbeKernels k{CVec(3), CVec(3), CVec(3)};
    for (int i = 0; i < 3; ++i) {
        const double a = nudge(offsets.deltas[static_cast<std::size_t>(i)].x1);
        const double b = nudge(offsets.deltas[static_cast<std::size_t>(i)].x2);
        k.g(i) = sa_kernel(a) * sa_kernel(b);
        k.d1(i) = sa_derivative_kernel(a) * sa_kernel(b);
        k.d2(i) = sa_kernel(a) * sa_derivative_kernel(b);
    }
    return k;
}

} // namespace detail

// lim V^H V / MN.
inline CMat4 gram_limit(cplx beta) {
    const cplx j(0, 1);
    const double b2 = std::norm(beta) * kPi * kPi;
    const cplx pb = kPi * beta;
    CMat4 h;
    h << 1.0, j, j * pb, j * pb,
        -j, 1.0, pb, pb,
        -j * std::conj(pb), std::conj(pb), 4.0 / 3.0 * b2, b2,
        -j * std::conj(pb), std::conj(pb), b2, 4.0 / 3.0 * b2;
    return h;
}

// lim I_S / MN.
inline Mat4 fisher_static_limit(const OffsetSet& offsets, double pilot_amp, double noise_var,
                                cplx beta) {
    const CMat g = detail::projection_from_kernels(detail::limit_kernels(offsets), beta);
    return detail::fisher_from_projection(g, pilot_amp, noise_var);
}

// lim MN * C_S.
inline double crlb_static_asymptotic(const OffsetSet& offsets, double pilot_amp = 1.0,
                                     double noise_var = 1.0, cplx beta = 1.0) {
    return detail::normalized_trace(fisher_static_limit(offsets, pilot_amp, noise_var, beta),
                                    gram_limit(beta), 1.0);
}

// ---- Rayleigh-gain model ----------------------------------------------------

struct DiModel {
    double sigma_beta_sq = 1.0;
};

struct SigmaDi {
    double det;
    CMat3 inv;
};

// Work quantities g = W^H a, g~_p = d|g|^2/dx_p, G_p = d(g g^H)/dx_p.
struct DiTerms {
    CVec3 g;
    std::array<CVec3, 2> dg;
    std::array<double, 2> g_tilde;
    std::array<CMat3, 2> G;
};

inline DiTerms di_terms(const CVec3& g, const CVec3& dg1, const CVec3& dg2) {
    DiTerms t;
    t.g = g;
    t.dg = {dg1, dg2};
    for (int p = 0; p < 2; ++p) {
        const auto& d = t.dg[static_cast<std::size_t>(p)];
        t.g_tilde[static_cast<std::size_t>(p)] = 2.0 * g.dot(d).real();
        t.G[static_cast<std::size_t>(p)] = d * g.adjoint() + g * d.adjoint();
    }
    return t;
}

inline DiTerms di_terms(const ArrayConfig& cfg, Dpv x, const Ebm& ebm) {
    const CMat wh = ebm.columns.adjoint();
    return di_terms(wh * steering_vector(cfg, x), wh * steering_derivative(cfg, x, 1),
                    wh * steering_derivative(cfg, x, 2));
}

inline DiTerms di_terms(const ProbeKernels& k) { return di_terms(k.g, k.d1, k.d2); }

// |Sigma| and Sigma^{-1} for Sigma = |s|^2 sb2 g g^H + sigma^2 I.
inline SigmaDi sigma_di(const CVec3& g, double pilot_amp, double sigma_beta_sq, double noise_var) {
    const double ps = pilot_amp * pilot_amp * sigma_beta_sq;
    const double s2 = noise_var;
    const double det = s2 * s2 * (ps * g.squaredNorm() + s2);
    const CMat3 inv = CMat3::Identity() / s2 - (s2 * ps / det) * (g * g.adjoint());
    return {det, inv};
}

inline SigmaDi sigma_di(const ArrayConfig& cfg, Dpv x, const DiModel& model, const Ebm& ebm) {
    const CVec3 g = ebm.columns.adjoint() * steering_vector(cfg, x);
    return sigma_di(g, cfg.pilot_amp, model.sigma_beta_sq, cfg.noise_var);
}

// Element formula of the Rayleigh-gain Fisher matrix.
inline Mat2 fisher_di_from_terms(const DiTerms& t, double pilot_amp, double sigma_beta_sq,
                                 double noise_var) {
    const double ps = pilot_amp * pilot_amp * sigma_beta_sq;
    const double s2 = noise_var;
    const double gg = t.g.squaredNorm();
    const double det = s2 * s2 * (ps * gg + s2);
    const double front = s2 * s2 * s2 * ps * ps * ps / (det * det);
    Mat2 f;
    for (std::size_t p = 0; p < 2; ++p) {
        for (std::size_t j = 0; j < 2; ++j) {
            const CMat3 gpj = t.G[p] * t.G[j];
            const CMat3 gjp = t.G[j] * t.G[p];
            const double tr = gpj.trace().real();
            const double quad = t.g.dot((gpj + gjp) * t.g).real();
            double body = -2.0 * gg * t.g_tilde[p] * t.g_tilde[j] + quad;
            if (ps > 0) body += (s2 / ps) * tr;
            f(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(j)) = front * body;
        }
    }
    return f;
}

inline Mat2 fisher_di(const ArrayConfig& cfg, Dpv x, const DiModel& model, const Ebm& ebm) {
    return fisher_di_from_terms(di_terms(cfg, x, ebm), cfg.pilot_amp, model.sigma_beta_sq,
                                cfg.noise_var);
}

inline double crlb_di(const ArrayConfig& cfg, Dpv x, const DiModel& model, const Ebm& ebm) {
    return fisher_inverse(fisher_di(cfg, x, model, ebm), "Rayleigh-gain Fisher matrix").trace();
}

inline Mat2 fisher_di_offsets(const ArrayConfig& cfg, const DiModel& model,
                              const OffsetSet& offsets) {
    return fisher_di_from_terms(di_terms(probe_kernels(cfg.M, cfg.N, offsets)), cfg.pilot_amp,
                                model.sigma_beta_sq, cfg.noise_var);
}

inline double crlb_di_offsets(const ArrayConfig& cfg, const DiModel& model,
                              const OffsetSet& offsets) {
    return fisher_inverse(fisher_di_offsets(cfg, model, offsets), "Rayleigh-gain Fisher matrix")
        .trace();
}

// lim I_DI / MN for SNR_beta = |s|^2 sb2 / sigma^2 (linear).
inline Mat2 fisher_di_limit(const OffsetSet& offsets, double snr_beta) {
    const DiTerms t = di_terms(detail::limit_kernels(offsets));
    const double gg = t.g.squaredNorm();
    Mat2 f;
    for (std::size_t p = 0; p < 2; ++p) {
        for (std::size_t j = 0; j < 2; ++j) {
            const double quad = t.g.dot((t.G[p] * t.G[j] + t.G[j] * t.G[p]) * t.g).real();
            f(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(j)) =
                snr_beta / (gg * gg) * (-2.0 * gg * t.g_tilde[p] * t.g_tilde[j] + quad);
        }
    }
    return f;
}

// lim MN * C_DI.
inline double crlb_di_asymptotic(const OffsetSet& offsets, double snr_beta) {
    return fisher_inverse(fisher_di_limit(offsets, snr_beta), "Rayleigh-gain limit Fisher")
        .trace();
}

} // namespace beamtrack
