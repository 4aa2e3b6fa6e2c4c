#pragma once

// Exploring beams, observation synthesis and the noiseless identifiability
// solver.

#include <array>
#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "beamtrack/array_core.hpp"

namespace beamtrack {

// psi = [beta_re, beta_im, x1, x2].
struct ChannelParams {
    double beta_re = 1.0;
    double beta_im = 0.0;
    Dpv x{};

    cplx beta() const { return {beta_re, beta_im}; }
    Vec4 vec() const { return {beta_re, beta_im, x.x1, x.x2}; }
    static ChannelParams from_vec(const Vec4& v) { return {v(0), v(1), {v(2), v(3)}}; }
    static ChannelParams make(cplx beta, Dpv x) { return {beta.real(), beta.imag(), x}; }
};

struct OffsetSet {
    std::array<Dpv, 3> deltas{};

    void validate() const {
        for (const auto& d : deltas) {
            if (!(std::abs(d.x1) < 1.0 && std::abs(d.x2) < 1.0))
                throw ConfigError("offsets: every offset must lie in the open square (-1,1)^2");
        }
        for (int i = 0; i < 3; ++i)
            for (int j = i + 1; j < 3; ++j)
                if (deltas[i] == deltas[j]) throw ConfigError("offsets: offsets must be distinct");
    }

    std::array<double, 6> flat() const {
        return {deltas[0].x1, deltas[0].x2, deltas[1].x1, deltas[1].x2, deltas[2].x1, deltas[2].x2};
    }
    static OffsetSet from_flat(const double* z) {
        return {{Dpv{z[0], z[1]}, Dpv{z[2], z[3]}, Dpv{z[4], z[5]}}};
    }

    // Published optimum for the quasi-static objective.
    static OffsetSet table_ii() {
        return {{Dpv{-0.0963, 0.5098}, Dpv{-0.2906, -0.2906}, Dpv{0.5098, -0.0963}}};
    }
    // Published optimum for the Rayleigh-gain objective.
    static OffsetSet table_iii() {
        return {{Dpv{0.5486, 0.2451}, Dpv{-0.5462, 0.2482}, Dpv{-0.0012, -0.6837}}};
    }
};

// Exploring beamforming matrix; column i is a(directions[i]) / sqrt(MN).
struct Ebm {
    CMat columns;
    std::vector<Dpv> directions;

    int probes() const { return static_cast<int>(directions.size()); }
};

inline Ebm build_ebm(const ArrayConfig& cfg, Dpv center, std::span<const Dpv> offsets) {
    Ebm w;
    w.columns.resize(cfg.size(), static_cast<Eigen::Index>(offsets.size()));
    const double scale = 1.0 / std::sqrt(double(cfg.size()));
    for (std::size_t i = 0; i < offsets.size(); ++i) {
        const Dpv dir = center + offsets[i];
        w.directions.push_back(dir);
        w.columns.col(static_cast<Eigen::Index>(i)) = steering_vector(cfg, dir) * scale;
    }
    return w;
}

inline Ebm build_ebm(const ArrayConfig& cfg, Dpv center, const OffsetSet& offsets) {
    return build_ebm(cfg, center, std::span<const Dpv>(offsets.deltas));
}

// Draws CN(0, var): independent real and imaginary parts with variance var/2.
template <class Rng>
cplx complex_normal(Rng& rng, double var) {
    std::normal_distribution<double> nd(0.0, std::sqrt(var / 2.0));
    const double re = nd(rng);
    const double im = nd(rng);
    return {re, im};
}

inline CVec noiseless_mean(const ArrayConfig& cfg, const ChannelParams& psi, const Ebm& ebm) {
    return cfg.pilot_amp * psi.beta() * (ebm.columns.adjoint() * steering_vector(cfg, psi.x));
}

template <class Rng>
CVec observe(const ArrayConfig& cfg, const ChannelParams& psi, const Ebm& ebm, Rng& rng) {
    CVec y = noiseless_mean(cfg, psi, ebm);
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += complex_normal(rng, cfg.noise_var);
    return y;
}

// Offset-only inner products w(x+delta)^H a(x), w(x+delta)^H da/dx_p, which do
// not depend on x. Evaluated as separable one-dimensional sums.
struct OffsetKernel {
    cplx g;     // w^H a
    cplx dg1;   // w^H da/dx1
    cplx dg2;   // w^H da/dx2
};

inline OffsetKernel offset_kernel(int M, int N, Dpv delta) {
    auto sums = [](int L, double d) {
        cplx s0 = 0.0, s1 = 0.0;
        for (int m = 0; m < L; ++m) {
            const cplx e = std::polar(1.0, -2.0 * kPi * m * d / L);
            s0 += e;
            s1 += cplx(0.0, 2.0 * kPi * m / L) * e;
        }
        const double r = 1.0 / std::sqrt(double(L));
        return std::pair{s0 * r, s1 * r};
    };
    const auto [a0, a1] = sums(M, delta.x1);
    const auto [b0, b1] = sums(N, delta.x2);
    return {a0 * b0, a1 * b0, a0 * b1};
}

// Stacked kernels for a probe set: g = W^H a, d_p = W^H da/dx_p.
struct ProbeKernels {
    CVec g;
    CVec d1;
    CVec d2;
};

inline ProbeKernels probe_kernels(int M, int N, std::span<const Dpv> offsets) {
    const auto q = static_cast<Eigen::Index>(offsets.size());
    ProbeKernels k{CVec(q), CVec(q), CVec(q)};
    for (Eigen::Index i = 0; i < q; ++i) {
        const auto o = offset_kernel(M, N, offsets[static_cast<std::size_t>(i)]);
        k.g(i) = o.g;
        k.d1(i) = o.dg1;
        k.d2(i) = o.dg2;
    }
    return k;
}

inline ProbeKernels probe_kernels(int M, int N, const OffsetSet& offsets) {
    return probe_kernels(M, N, std::span<const Dpv>(offsets.deltas));
}

// Real Jacobian of psi -> (Re y, Im y) for the noiseless mean.
inline Eigen::MatrixXd observation_jacobian(const ArrayConfig& cfg, const ChannelParams& psi,
                                            const Ebm& ebm) {
    const CVec a = steering_vector(cfg, psi.x);
    const cplx b = psi.beta();
    const CMat wh = ebm.columns.adjoint();
    CMat g(ebm.probes(), 4);
    g.col(0) = wh * a;
    g.col(1) = cplx(0, 1) * g.col(0);
    g.col(2) = b * (wh * steering_derivative(cfg, psi.x, 1));
    g.col(3) = b * (wh * steering_derivative(cfg, psi.x, 2));
    g *= cfg.pilot_amp;
    Eigen::MatrixXd j(2 * ebm.probes(), 4);
    j.topRows(ebm.probes()) = g.real();
    j.bottomRows(ebm.probes()) = g.imag();
    return j;
}

struct SearchBox {
    Dpv lo;
    Dpv hi;
};

namespace detail {

// log |y_a(delta)| along one axis and its derivative in delta.
inline std::pair<double, double> log_dirichlet(double d, int L) {
    const double v = dirichlet(d, L);
    const double val = std::log(std::abs(v));
    double der;
    if (std::abs(d) < 1e-6) {
        der = -(kPi * kPi * d / 3.0) * (1.0 - 1.0 / (double(L) * L));
    } else {
        der = kPi / std::tan(kPi * d) - (kPi / L) / std::tan(kPi * d / L);
    }
    return {val, der};
}

} // namespace detail

// Recovers psi from a noiseless 3-probe observation: the two relative-amplitude
// equations fix x, then beta follows from the first probe.
inline ChannelParams recover_from_noiseless(const ArrayConfig& cfg, const Ebm& ebm, const CVec& y,
                                            SearchBox box) {
    if (ebm.probes() < 3 || y.size() != ebm.probes())
        throw NoSolution("recovery needs three probes");
    if (std::abs(y(0)) <= 1e-9) throw NoSolution("first probe output vanishes");
    const int M = cfg.M, N = cfg.N;
    const Eigen::Index q = y.size();
    Eigen::VectorXd target(q - 1);
    for (Eigen::Index i = 1; i < q; ++i) target(i - 1) = std::log(std::abs(y(i)) / std::abs(y(0)));

    // residual r_i = log|y_i/y_0| - [L(w_i - x) - L(w_0 - x)]
    auto residual = [&](Dpv x, Eigen::MatrixXd* jac) {
        Eigen::VectorXd r(q - 1);
        if (jac) jac->resize(q - 1, 2);
        double l0 = 0, d01 = 0, d02 = 0;
        {
            const Dpv d = ebm.directions[0] - x;
            const auto [v1, g1] = detail::log_dirichlet(d.x1, M);
            const auto [v2, g2] = detail::log_dirichlet(d.x2, N);
            l0 = v1 + v2;
            d01 = g1;
            d02 = g2;
        }
        for (Eigen::Index i = 1; i < q; ++i) {
            const Dpv d = ebm.directions[static_cast<std::size_t>(i)] - x;
            const auto [v1, g1] = detail::log_dirichlet(d.x1, M);
            const auto [v2, g2] = detail::log_dirichlet(d.x2, N);
            r(i - 1) = target(i - 1) - (v1 + v2 - l0);
            if (jac) {
                // d/dx of -(L_i - L_0) with d = w - x flips sign once
                (*jac)(i - 1, 0) = g1 - d01;
                (*jac)(i - 1, 1) = g2 - d02;
            }
        }
        return r;
    };

    constexpr int grid = 41;
    struct Root {
        Dpv x;
        double res;
    };
    std::vector<Root> seeds;
    for (int i = 0; i < grid; ++i) {
        for (int j = 0; j < grid; ++j) {
            const Dpv x{box.lo.x1 + (box.hi.x1 - box.lo.x1) * i / (grid - 1),
                        box.lo.x2 + (box.hi.x2 - box.lo.x2) * j / (grid - 1)};
            const double r = residual(x, nullptr).norm();
            if (std::isfinite(r)) seeds.push_back({x, r});
        }
    }
    std::sort(seeds.begin(), seeds.end(), [](const Root& a, const Root& b) { return a.res < b.res; });
    if (seeds.size() > 12) seeds.resize(12);

    auto inside = [&](Dpv x) {
        return x.x1 >= box.lo.x1 && x.x1 <= box.hi.x1 && x.x2 >= box.lo.x2 && x.x2 <= box.hi.x2;
    };
    std::vector<Root> roots;
    for (const auto& s : seeds) {
        Dpv x = s.x;
        Eigen::MatrixXd jac;
        Eigen::VectorXd r = residual(x, &jac);
        for (int it = 0; it < 100 && r.norm() > 1e-15; ++it) {
            const Vec2 step = jac.colPivHouseholderQr().solve(-r);
            double t = 1.0;
            bool moved = false;
            for (int h = 0; h < 30; ++h, t *= 0.5) {
                const Dpv xn{x.x1 + t * step(0), x.x2 + t * step(1)};
                if (!inside(xn)) continue;
                Eigen::MatrixXd jn;
                const Eigen::VectorXd rn = residual(xn, &jn);
                if (std::isfinite(rn.norm()) && rn.norm() < r.norm()) {
                    x = xn;
                    r = rn;
                    jac = jn;
                    moved = true;
                    break;
                }
            }
            if (!moved) break;
        }
        if (std::isfinite(r.norm())) roots.push_back({x, r.norm()});
    }
    std::sort(roots.begin(), roots.end(), [](const Root& a, const Root& b) { return a.res < b.res; });
    if (roots.empty() || roots.front().res > 1e-6) throw NoSolution("amplitude equations not satisfied");
    const Root best = roots.front();
    for (const auto& r : roots) {
        if (r.res < 1e-9 && std::sqrt((r.x - best.x).norm_sq()) > 1e-6)
            throw AmbiguousSolution("two distinct directions fit the amplitudes");
    }
    const cplx e0 = ebm.columns.col(0).dot(steering_vector(cfg, best.x)); // w0^H a(x)
    const cplx beta = y(0) / (cfg.pilot_amp * e0);
    const ChannelParams psi = ChannelParams::make(beta, best.x);
    // relative phases are fixed by the offsets alone and must match as well
    if ((noiseless_mean(cfg, psi, ebm) - y).norm() > 1e-6 * y.norm())
        throw NoSolution("observation phases fit no channel");
    return psi;
}

} // namespace beamtrack
