#pragma once

// Planar-array geometry: direction parameters, steering vectors, element
// pattern and the beam-gain kernel.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "beamtrack/errors.hpp"
#include "beamtrack/linalg.hpp"

namespace beamtrack {

inline constexpr double kPi = std::numbers::pi;

struct ArrayConfig {
    int M = 8;
    int N = 8;
    double d1 = 0.5;
    double d2 = 0.5;
    double lambda = 1.0;
    double pilot_amp = 1.0; // |s|
    double noise_var = 1.0; // sigma_z^2

    int size() const { return M * N; }

    void validate() const {
        if (M < 1 || N < 1) throw ConfigError("array: M and N must be >= 1");
        if (!(d1 > 0 && d2 > 0 && lambda > 0))
            throw ConfigError("array: d1, d2 and lambda must be positive");
        if (!(pilot_amp >= 0)) throw ConfigError("array: pilot_amp must be >= 0");
        if (!(noise_var > 0)) throw ConfigError("array: noise_var must be positive");
    }
};

struct Aoa {
    double theta = 0.0; // elevation, [-pi/2, pi/2)
    double phi = kPi / 2; // azimuth, [0, pi)
};

struct Dpv {
    double x1 = 0.0;
    double x2 = 0.0;

    double operator[](int p) const { return p == 0 ? x1 : x2; }
    double& operator[](int p) { return p == 0 ? x1 : x2; }
    friend Dpv operator+(Dpv a, Dpv b) { return {a.x1 + b.x1, a.x2 + b.x2}; }
    friend Dpv operator-(Dpv a, Dpv b) { return {a.x1 - b.x1, a.x2 - b.x2}; }
    friend Dpv operator*(double s, Dpv a) { return {s * a.x1, s * a.x2}; }
    friend bool operator==(Dpv a, Dpv b) = default;
    double norm_sq() const { return x1 * x1 + x2 * x2; }
};

struct PatternConfig {
    double theta_3db = 13.0 * kPi / 36.0;
    double phi_3db = 13.0 * kPi / 36.0;
    double eta_max_db = 30.0;

    void validate() const {
        if (!(theta_3db > 0 && phi_3db > 0 && eta_max_db > 0))
            throw ConfigError("pattern: beamwidths and eta_max must be positive");
    }
};

inline Dpv dpv_from_aoa(const ArrayConfig& cfg, Aoa aoa) {
    return {cfg.M * cfg.d1 * std::cos(aoa.theta) * std::cos(aoa.phi) / cfg.lambda,
            cfg.N * cfg.d2 * std::sin(aoa.theta) / cfg.lambda};
}

// Inverse of dpv_from_aoa on the branch cos(theta) >= 0.
inline Aoa aoa_from_dpv(const ArrayConfig& cfg, Dpv x) {
    constexpr double slack = 1e-12;
    double s = cfg.lambda * x.x2 / (cfg.N * cfg.d2);
    if (!(std::abs(s) <= 1.0 + slack))
        throw OutOfPhysicalRange("dpv x2 outside the visible region");
    s = std::clamp(s, -1.0, 1.0);
    const double theta = std::asin(s);
    const double ct = std::cos(theta);
    const double num = cfg.lambda * x.x1 / (cfg.M * cfg.d1);
    if (ct <= slack) {
        if (std::abs(num) > slack) throw OutOfPhysicalRange("dpv x1 nonzero at the pole");
        return {theta, kPi / 2};
    }
    double c = num / ct;
    if (!(std::abs(c) <= 1.0 + slack))
        throw OutOfPhysicalRange("dpv x1 outside the visible region");
    c = std::clamp(c, -1.0, 1.0);
    return {theta, std::acos(c)};
}

// Flat index (m-1)*N + (n-1): m-major, n-minor, i.e. a1(x1) kron a2(x2).
inline CVec steering_vector(int M, int N, Dpv x) {
    CVec a(M * N);
    for (int m = 0; m < M; ++m) {
        for (int n = 0; n < N; ++n) {
            const double ph = 2.0 * kPi * (m * x.x1 / M + n * x.x2 / N);
            a(m * N + n) = std::polar(1.0, ph);
        }
    }
    return a;
}

inline CVec steering_vector(const ArrayConfig& cfg, Dpv x) {
    return steering_vector(cfg.M, cfg.N, x);
}

// Derivative of the steering vector along axis 1 (x1) or 2 (x2).
inline CVec steering_derivative(int M, int N, Dpv x, int axis) {
    if (axis != 1 && axis != 2) throw std::invalid_argument("axis must be 1 or 2");
    CVec a = steering_vector(M, N, x);
    for (int m = 0; m < M; ++m) {
        for (int n = 0; n < N; ++n) {
            const double f = axis == 1 ? 2.0 * kPi * m / M : 2.0 * kPi * n / N;
            a(m * N + n) *= cplx(0.0, f);
        }
    }
    return a;
}

inline CVec steering_derivative(const ArrayConfig& cfg, Dpv x, int axis) {
    return steering_derivative(cfg.M, cfg.N, x, axis);
}

namespace detail {
inline double dirichlet(double d, int L) {
    const double den = std::sin(kPi * d / L);
    if (std::abs(den) < 1e-12) {
        // limit at d = 0 mod L: sin(pi d)/sin(pi d / L) -> L * (-1)^{(L-1) d / L}
        const long r = std::lround(d / L);
        return (((L - 1) * r) % 2 == 0) ? double(L) : -double(L);
    }
    return std::sin(kPi * d) / den;
}
} // namespace detail

// y_a(delta) = [sin(pi d1)/sin(pi d1/M)] [sin(pi d2)/sin(pi d2/N)].
inline double beam_gain_kernel(double d1, double d2, int M, int N) {
    return detail::dirichlet(d1, M) * detail::dirichlet(d2, N);
}

inline double element_gain_db(const PatternConfig& pc, Aoa aoa) {
    const double tv = aoa.theta / pc.theta_3db;
    const double th = (aoa.phi - kPi / 2) / pc.phi_3db;
    const double eta_v = -std::min(12.0 * tv * tv, pc.eta_max_db);
    const double eta_h = -std::min(12.0 * th * th, pc.eta_max_db);
    return -std::min(-(eta_v + eta_h), pc.eta_max_db);
}

// Amplitude gain eta with 20 log10(eta) = element_gain_db.
inline double element_gain_linear(const PatternConfig& pc, Aoa aoa) {
    return std::pow(10.0, element_gain_db(pc, aoa) / 20.0);
}

inline bool in_main_lobe(Dpv center, Dpv candidate) {
    return std::abs(candidate.x1 - center.x1) < 1.0 && std::abs(candidate.x2 - center.x2) < 1.0;
}

// Largest physical |x1|, |x2| for the array.
inline Dpv physical_extent(const ArrayConfig& cfg) {
    return {cfg.M * cfg.d1 / cfg.lambda, cfg.N * cfg.d2 / cfg.lambda};
}

} // namespace beamtrack
