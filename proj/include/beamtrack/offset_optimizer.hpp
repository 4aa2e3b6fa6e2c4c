#pragma once

// Multi-start Nelder-Mead search for exploration offsets that minimize the
// normalized CRLB, plus symmetry canonicalization and finite-size sweeps.

#include <gsl/gsl_multimin.h>
#include <gsl/gsl_vector.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "beamtrack/estimation_theory.hpp"
#include "beamtrack/parallel.hpp"
#include "beamtrack/rng.hpp"

namespace beamtrack {

enum class ObjectiveKind { StaticAsymptotic, StaticFinite, DiAsymptotic, DiFinite };

struct SearchConfig {
    ObjectiveKind objective = ObjectiveKind::StaticAsymptotic;
    int M = 8, N = 8;          // finite objectives only
    double snr_beta_db = 0.0;  // Rayleigh-gain objectives only
    int grid_points_per_axis = 21;
    int refine_iters = 400;
    int restarts = 16;
    std::uint64_t seed = 1;
    double box_halfwidth = 0.95;
    std::optional<OffsetSet> start; // skips the grid and seeds every restart here
    std::vector<OffsetSet> extra_seeds; // appended to the grid seeds

    void validate() const {
        if (!(box_halfwidth > 0 && box_halfwidth < 1))
            throw ConfigError("search: box_halfwidth must lie in (0, 1)");
        if (grid_points_per_axis < 2) throw ConfigError("search: grid needs >= 2 points per axis");
        if (refine_iters < 1 || restarts < 1) throw ConfigError("search: iterations and restarts >= 1");
        if (M < 1 || N < 1) throw ConfigError("search: M and N must be >= 1");
    }
};

struct SearchResult {
    OffsetSet offsets;
    double crlb_value = 0;
    int restarts_used = 0;
};

// Objective value; throws SingularFisher for degenerate offsets.
inline double evaluate_objective(const SearchConfig& sc, const OffsetSet& o) {
    const double snr = std::pow(10.0, sc.snr_beta_db / 10.0);
    switch (sc.objective) {
    case ObjectiveKind::StaticAsymptotic:
        return crlb_static_asymptotic(o);
    case ObjectiveKind::StaticFinite: {
        ArrayConfig cfg;
        cfg.M = sc.M;
        cfg.N = sc.N;
        return crlb_static_offsets(cfg, o);
    }
    case ObjectiveKind::DiAsymptotic:
        return crlb_di_asymptotic(o, snr);
    case ObjectiveKind::DiFinite: {
        ArrayConfig cfg;
        cfg.M = sc.M;
        cfg.N = sc.N;
        return crlb_di_offsets(cfg, DiModel{snr}, o);
    }
    }
    return std::numeric_limits<double>::infinity();
}

inline double penalized_objective(const SearchConfig& sc, const OffsetSet& o) {
    try {
        const double v = evaluate_objective(sc, o);
        return (std::isfinite(v) && v > 0) ? v : std::numeric_limits<double>::infinity();
    } catch (const SingularFisher&) {
        return std::numeric_limits<double>::infinity();
    }
}

// Lexicographically smallest image under offset permutation, per-axis sign
// flips and (for square arrays) the axis swap.
inline OffsetSet canonicalize(const OffsetSet& o, bool allow_axis_swap = true) {
    std::optional<std::array<double, 6>> best;
    for (int swap = 0; swap < (allow_axis_swap ? 2 : 1); ++swap) {
        for (int s1 : {1, -1}) {
            for (int s2 : {1, -1}) {
                std::array<Dpv, 3> d;
                for (std::size_t i = 0; i < 3; ++i) {
                    Dpv v{s1 * o.deltas[i].x1, s2 * o.deltas[i].x2};
                    if (swap) std::swap(v.x1, v.x2);
                    // avoid -0.0 so that equal images compare equal
                    d[i] = {v.x1 + 0.0, v.x2 + 0.0};
                }
                std::sort(d.begin(), d.end(), [](Dpv a, Dpv b) {
                    return a.x1 != b.x1 ? a.x1 < b.x1 : a.x2 < b.x2;
                });
                const auto flat = OffsetSet{d}.flat();
                if (!best || flat < *best) best = flat;
            }
        }
    }
    return OffsetSet::from_flat(best->data());
}

namespace detail {

struct NmContext {
    const SearchConfig* sc;
    long evaluations = 0;
};

// Offsets are confined to the open box through o = h * tanh(z).
inline OffsetSet offsets_from_z(const gsl_vector* z, double h) {
    std::array<double, 6> v;
    for (std::size_t i = 0; i < 6; ++i) v[i] = h * std::tanh(gsl_vector_get(z, i));
    return OffsetSet::from_flat(v.data());
}

inline double nm_objective(const gsl_vector* z, void* params) {
    auto* ctx = static_cast<NmContext*>(params);
    ctx->evaluations += 1;
    const double v = penalized_objective(*ctx->sc, offsets_from_z(z, ctx->sc->box_halfwidth));
    return std::isfinite(v) ? v : 1e300;
}

inline std::pair<OffsetSet, double> nelder_mead(const SearchConfig& sc, const OffsetSet& seed,
                                                Rng& rng) {
    const double h = sc.box_halfwidth;
    NmContext ctx{&sc};
    gsl_multimin_function fn{&nm_objective, 6, &ctx};
    gsl_vector* x = gsl_vector_alloc(6);
    gsl_vector* step = gsl_vector_alloc(6);
    const auto flat = seed.flat();
    std::normal_distribution<double> jitter(0.0, 0.01);
    for (std::size_t i = 0; i < 6; ++i) {
        const double o = std::clamp(flat[i] + jitter(rng), -0.999 * h, 0.999 * h);
        gsl_vector_set(x, i, std::atanh(o / h));
    }
    gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 6);
    double best = std::numeric_limits<double>::infinity();
    // simplex restarts from the incumbent until a round stops improving
    for (int round = 0; round < 6; ++round) {
        gsl_vector_set_all(step, round == 0 ? 0.1 : 0.02);
        gsl_multimin_fminimizer_set(s, &fn, x, step);
        for (int it = 0; it < sc.refine_iters; ++it) {
            if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
            if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), 1e-10) == GSL_SUCCESS) break;
        }
        const double v = gsl_multimin_fminimizer_minimum(s);
        gsl_vector_memcpy(x, gsl_multimin_fminimizer_x(s));
        const bool improved = v < best * (1.0 - 1e-12);
        best = std::min(best, v);
        if (!improved && round > 0) break;
    }
    const OffsetSet out = offsets_from_z(x, h);
    gsl_multimin_fminimizer_free(s);
    gsl_vector_free(step);
    gsl_vector_free(x);
    return {out, penalized_objective(sc, out)};
}

// Coarse grid over the slice D1 = (0, r), D2 = (u, v2), D3 = (-u, v3).
inline std::vector<std::pair<double, OffsetSet>> grid_seeds(const SearchConfig& sc) {
    const int n = sc.grid_points_per_axis;
    const double h = sc.box_halfwidth;
    auto lin = [&](double lo, double hi, int i) { return lo + (hi - lo) * i / (n - 1); };
    std::vector<std::pair<double, OffsetSet>> all(static_cast<std::size_t>(n) * n * n * n);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t ir) {
        const int i0 = static_cast<int>(ir);
        for (int i1 = 0; i1 < n; ++i1)
            for (int i2 = 0; i2 < n; ++i2)
                for (int i3 = 0; i3 < n; ++i3) {
                    const double r = lin(0, h, i0), u = lin(0, h, i1);
                    const double v2 = lin(-h, h, i2), v3 = lin(-h, h, i3);
                    const OffsetSet o{{Dpv{0, r}, Dpv{u, v2}, Dpv{-u, v3}}};
                    const std::size_t idx = ((static_cast<std::size_t>(i0) * n + i1) * n + i2) * n + i3;
                    all[idx] = {penalized_objective(sc, o), o};
                }
    });
    std::stable_sort(all.begin(), all.end(),
                     [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<std::pair<double, OffsetSet>> picked;
    for (const auto& c : all) {
        if (!std::isfinite(c.first)) break;
        bool far = true;
        for (const auto& p : picked) {
            const auto a = c.second.flat(), b = p.second.flat();
            double d2 = 0;
            for (std::size_t i = 0; i < 6; ++i) d2 += (a[i] - b[i]) * (a[i] - b[i]);
            if (d2 < 0.15 * 0.15) {
                far = false;
                break;
            }
        }
        if (far) picked.push_back(c);
        if (static_cast<int>(picked.size()) >= sc.restarts) break;
    }
    return picked;
}

} // namespace detail

inline SearchResult optimize_offsets(const SearchConfig& sc) {
    sc.validate();
    std::vector<OffsetSet> seeds;
    double incumbent = std::numeric_limits<double>::infinity();
    if (sc.start) {
        seeds.assign(static_cast<std::size_t>(sc.restarts), *sc.start);
        incumbent = penalized_objective(sc, *sc.start);
    } else {
        for (const auto& [v, o] : detail::grid_seeds(sc)) {
            seeds.push_back(o);
            incumbent = std::min(incumbent, v);
        }
    }
    for (const auto& o : sc.extra_seeds) {
        seeds.push_back(o);
        incumbent = std::min(incumbent, penalized_objective(sc, o));
    }
    if (seeds.empty()) throw NoImprovement("no finite grid point to start from");

    std::vector<std::pair<OffsetSet, double>> results(seeds.size());
    parallel_for(seeds.size(), [&](std::size_t i) {
        Rng rng = make_stream(sc.seed, i);
        results[i] = detail::nelder_mead(sc, seeds[i], rng);
    });
    std::size_t best = 0;
    for (std::size_t i = 1; i < results.size(); ++i)
        if (results[i].second < results[best].second) best = i;
    const double v = results[best].second;
    if (!std::isfinite(v) || (std::isfinite(incumbent) && v > incumbent))
        throw NoImprovement("no restart improved on the starting incumbent");
    return {results[best].first, v, static_cast<int>(results.size())};
}

struct RobustnessRow {
    int M, N;
    double snr_beta_db;
    double crlb_at_offsets;
    double crlb_min;
    double rel_gap;
};

// Finite-size check of fixed offsets against a fresh finite-size search. The
// fixed offsets are added as one extra seed, so the reported minimum is never
// above their own value.
inline std::vector<RobustnessRow> robustness_sweep(const OffsetSet& offsets,
                                                   const std::vector<std::pair<int, int>>& sizes,
                                                   ObjectiveKind kind, double snr_beta_db = 0.0,
                                                   SearchConfig base = {}) {
    if (kind == ObjectiveKind::StaticAsymptotic) kind = ObjectiveKind::StaticFinite;
    if (kind == ObjectiveKind::DiAsymptotic) kind = ObjectiveKind::DiFinite;
    std::vector<RobustnessRow> rows;
    for (auto [M, N] : sizes) {
        SearchConfig sc = base;
        sc.objective = kind;
        sc.M = M;
        sc.N = N;
        sc.snr_beta_db = snr_beta_db;
        sc.extra_seeds = {offsets};
        const double at = evaluate_objective(sc, offsets);
        const SearchResult r = optimize_offsets(sc);
        rows.push_back({M, N, snr_beta_db, at, r.crlb_value, (at - r.crlb_value) / r.crlb_value});
    }
    return rows;
}

} // namespace beamtrack
