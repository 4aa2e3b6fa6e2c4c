#pragma once

// Ground-truth channel generation: quasi-static Rician, i.i.d. Rayleigh gain,
// and Gauss-Markov gain with a reflected random-walk direction.

#include <cmath>
#include <limits>
#include <random>

#include "beamtrack/signal_model.hpp"

namespace beamtrack {

struct AngleRange {
    double lo;
    double hi;
};

enum class ScenarioKind { QuasiStatic, DynamicI, DynamicII };
enum class AoaRegion { Central, Edge, Custom };

struct ScenarioConfig {
    ScenarioKind kind = ScenarioKind::QuasiStatic;
    double rician_k_db = 15.0;   // QuasiStatic; +inf gives a pure LOS gain
    double sigma_beta_c_sq = 1.0; // DynamicI
    double rho = 0.995;           // DynamicII
    double delta_a = 0.3 * kPi / 180.0; // DynamicII, radians per ECC
    AoaRegion region = AoaRegion::Central;
    AngleRange theta_range{-kPi / 6, kPi / 6};
    AngleRange phi_range{kPi / 3, 2 * kPi / 3};
    PatternConfig pattern{};

    // Resolves the named region into explicit ranges.
    void apply_region() {
        switch (region) {
        case AoaRegion::Central:
            theta_range = {-kPi / 6, kPi / 6};
            phi_range = {kPi / 3, 2 * kPi / 3};
            break;
        case AoaRegion::Edge:
            if (kind == ScenarioKind::QuasiStatic) {
                theta_range = {kPi / 2 - kPi / 60, kPi / 2};
                phi_range = {kPi - kPi / 60, kPi};
            } else {
                theta_range = {kPi / 3, kPi / 2};
                phi_range = {5 * kPi / 6, kPi};
            }
            break;
        case AoaRegion::Custom:
            break;
        }
    }

    void validate() const {
        if (!(rho > 0 && rho <= 1)) throw ConfigError("scenario: rho must lie in (0, 1]");
        if (!(delta_a > 0)) throw ConfigError("scenario: delta_a must be positive");
        if (!(sigma_beta_c_sq > 0)) throw ConfigError("scenario: sigma_beta_c_sq must be positive");
        if (!(theta_range.lo <= theta_range.hi && phi_range.lo <= phi_range.hi))
            throw ConfigError("scenario: angle ranges must be ordered");
        pattern.validate();
    }
};

struct ChannelState {
    Aoa aoa;
    Dpv x;
    cplx beta_c;
    cplx beta_eff;
    long ecc_index = 0;

    ChannelParams params() const { return ChannelParams::make(beta_eff, x); }
};

inline double rician_kappa(double k_db) {
    return std::isinf(k_db) && k_db > 0 ? std::numeric_limits<double>::infinity()
                                        : std::pow(10.0, k_db / 10.0);
}

// beta_c = sqrt(k/(k+1)) e^{j phi0} + sqrt(1/(k+1)) CN(0,1).
template <class Rng>
cplx draw_rician(double k_db, Rng& rng) {
    const double kappa = rician_kappa(k_db);
    std::uniform_real_distribution<double> u(0.0, 2.0 * kPi);
    const double phi0 = u(rng);
    if (std::isinf(kappa)) return std::polar(1.0, phi0);
    return std::sqrt(kappa / (kappa + 1.0)) * std::polar(1.0, phi0) +
           std::sqrt(1.0 / (kappa + 1.0)) * complex_normal(rng, 1.0);
}

inline void refresh_derived(ChannelState& st, const ScenarioConfig& sc, const ArrayConfig& cfg) {
    st.x = dpv_from_aoa(cfg, st.aoa);
    st.beta_eff = element_gain_linear(sc.pattern, st.aoa) * st.beta_c;
}

template <class Rng>
ChannelState init_channel(const ScenarioConfig& sc, const ArrayConfig& cfg, Rng& rng) {
    ChannelState st;
    auto draw = [&](AngleRange r) {
        if (r.hi <= r.lo) return r.lo;
        std::uniform_real_distribution<double> u(r.lo, r.hi);
        return u(rng);
    };
    st.aoa = {draw(sc.theta_range), draw(sc.phi_range)};
    switch (sc.kind) {
    case ScenarioKind::QuasiStatic:
        st.beta_c = draw_rician(sc.rician_k_db, rng);
        break;
    case ScenarioKind::DynamicI:
        st.beta_c = complex_normal(rng, sc.sigma_beta_c_sq);
        break;
    case ScenarioKind::DynamicII:
        st.beta_c = complex_normal(rng, 1.0);
        break;
    }
    refresh_derived(st, sc, cfg);
    return st;
}

namespace detail {
// One random-walk step reflected into [lo, hi].
inline double reflect_step(double v, double step, AngleRange r) {
    double n = v + step;
    if (n < r.lo || n > r.hi) n = v - step;
    return std::clamp(n, r.lo, r.hi);
}
} // namespace detail

template <class Rng>
ChannelState evolve(ChannelState st, const ScenarioConfig& sc, const ArrayConfig& cfg, Rng& rng) {
    st.ecc_index += 1;
    switch (sc.kind) {
    case ScenarioKind::QuasiStatic:
        return st;
    case ScenarioKind::DynamicI:
        st.beta_c = complex_normal(rng, sc.sigma_beta_c_sq);
        break;
    case ScenarioKind::DynamicII: {
        st.beta_c = sc.rho * st.beta_c + complex_normal(rng, 1.0 - sc.rho * sc.rho);
        std::normal_distribution<double> nd(0.0, sc.delta_a);
        const double dt = nd(rng);
        const double dp = nd(rng);
        st.aoa.theta = detail::reflect_step(st.aoa.theta, dt, sc.theta_range);
        st.aoa.phi = detail::reflect_step(st.aoa.phi, dp, sc.phi_range);
        break;
    }
    }
    refresh_derived(st, sc, cfg);
    return st;
}

// Initial estimate inside the main lobe: x_hat0 uniform on x0 +- halfwidth, and
// beta_hat0 from a least-squares fit to one bootstrap ECC probed at x_hat0.
template <class Rng>
ChannelParams initial_estimate(const ChannelState& st, const ArrayConfig& cfg, Rng& rng,
                               double halfwidth = 0.5,
                               const OffsetSet& offsets = OffsetSet::table_ii()) {
    if (!(halfwidth >= 0 && halfwidth < 1)) throw ConfigError("initial estimate: halfwidth in [0,1)");
    Dpv x0 = st.x;
    if (halfwidth > 0) {
        std::uniform_real_distribution<double> u(-halfwidth, halfwidth);
        const double a = u(rng);
        const double b = u(rng);
        x0 = x0 + Dpv{a, b};
    }
    const Ebm ebm = build_ebm(cfg, x0, offsets);
    const CVec y0 = observe(cfg, st.params(), ebm, rng);
    const CVec e0 = ebm.columns.adjoint() * steering_vector(cfg, x0);
    const cplx beta0 = e0.dot(y0) / (e0.squaredNorm() * cfg.pilot_amp);
    return ChannelParams::make(beta0, x0);
}

} // namespace beamtrack
