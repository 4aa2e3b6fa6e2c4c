#pragma once

// Monte-Carlo experiment driver, metrics and CSV output.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "beamtrack/channel_sim.hpp"
#include "beamtrack/parallel.hpp"
#include "beamtrack/rng.hpp"
#include "beamtrack/trackers.hpp"

namespace beamtrack {

enum class TrackerKind { JbctS, RbtDi, JbctDii, BeamSwitch, Ekf };
enum class RbtMode { Perfect, Estimated };

struct ExperimentConfig {
    ScenarioConfig scenario{};
    ArrayConfig array{};
    TrackerKind tracker = TrackerKind::JbctS;
    RbtMode rbt_mode = RbtMode::Perfect;
    std::optional<OffsetSet> offsets; // default: preset for the tracker
    std::optional<StepSchedule> schedule; // default: per tracker
    long num_trials = 100;
    long num_eccs = 1000;
    std::uint64_t seed = 1;
    double snr_db = 0.0;
    long record_every = 1;
    double init_halfwidth = 0.5;
    double ekf_q = 1e-4;
    int beam_oversampling = 2;

    // Pilot amplitude |s| = sqrt(10^{snr/10}); snr_db is the pilot SNR at unit
    // noise power, so lowering noise_var raises the working SNR.
    ArrayConfig effective_array() const {
        ArrayConfig a = array;
        a.pilot_amp = std::sqrt(std::pow(10.0, snr_db / 10.0));
        return a;
    }

    OffsetSet effective_offsets() const {
        if (offsets) return *offsets;
        return tracker == TrackerKind::RbtDi ? OffsetSet::table_iii() : OffsetSet::table_ii();
    }

    StepSchedule effective_schedule() const {
        if (schedule) return *schedule;
        return tracker == TrackerKind::JbctDii ? StepSchedule::constant(0.7)
                                               : StepSchedule::diminishing(1.0, 0.0);
    }

    void validate() const {
        array.validate();
        scenario.validate();
        effective_offsets().validate();
        effective_schedule().validate();
        if (num_trials < 1) throw ConfigError("trials: must be >= 1");
        if (num_eccs < 1) throw ConfigError("eccs: must be >= 1");
        if (record_every < 1) throw ConfigError("record_every: must be >= 1");
        if (!(init_halfwidth >= 0 && init_halfwidth < 1))
            throw ConfigError("init_halfwidth: must lie in [0, 1)");
        if (!std::isfinite(snr_db)) throw ConfigError("snr_db: must be finite");
        if (tracker == TrackerKind::RbtDi && scenario.kind != ScenarioKind::DynamicI)
            throw ConfigError("tracker: rbt requires the dynamic-i scenario");
        if (!(ekf_q >= 0)) throw ConfigError("ekf_q: must be >= 0");
        if (beam_oversampling < 1) throw ConfigError("beam_oversampling: must be >= 1");
    }
};

struct MetricsRecord {
    long ecc = 0;
    long explorations_total = 0;
    double mse_h = 0;
    double mse_x = 0;
    double crlb_ref = std::numeric_limits<double>::quiet_NaN();
    long trials = 0;
};

// Noiseless mean from separable offset kernels; equals noiseless_mean for the
// EBM centered at `center`.
inline CVec3 kernel_mean(const ArrayConfig& cfg, const ChannelParams& psi, Dpv center,
                         const std::array<Dpv, 3>& offsets) {
    CVec3 m;
    for (std::size_t i = 0; i < 3; ++i)
        m(static_cast<Eigen::Index>(i)) =
            cfg.pilot_amp * psi.beta() * offset_kernel(cfg.M, cfg.N, center + offsets[i] - psi.x).g;
    return m;
}

// (1/MN) || beta_hat a(x_hat) - beta a(x) ||^2
inline double channel_error(const ArrayConfig& cfg, const ChannelParams& est,
                            const ChannelParams& truth) {
    const double mn = cfg.size();
    const cplx cross = std::sqrt(mn) * offset_kernel(cfg.M, cfg.N, est.x - truth.x).g; // a(x_hat)^H a(x)
    const double v = std::norm(est.beta()) * mn + std::norm(truth.beta()) * mn -
                     2.0 * (std::conj(est.beta()) * truth.beta() * cross).real();
    return std::max(0.0, v / mn);
}

inline Dpv clamp_physical(const ArrayConfig& cfg, Dpv x) {
    const Dpv e = physical_extent(cfg);
    return {std::clamp(x.x1, -e.x1, e.x1), std::clamp(x.x2, -e.x2, e.x2)};
}

namespace detail {

struct TrialTrace {
    std::vector<double> err_h;
    std::vector<double> err_x;
    double crlb = std::numeric_limits<double>::quiet_NaN();
};

inline std::vector<long> record_points(const ExperimentConfig& ec) {
    std::vector<long> pts;
    for (long k = 1; k <= ec.num_eccs; ++k)
        if (k % ec.record_every == 0 || k == ec.num_eccs) pts.push_back(k);
    return pts;
}

inline double di_sigma_beta_sq(const ScenarioConfig& sc, const ArrayConfig& cfg, Dpv x) {
    const double eta = element_gain_linear(sc.pattern, aoa_from_dpv(cfg, x));
    return eta * eta * sc.sigma_beta_c_sq;
}

inline TrialTrace run_trial(const ExperimentConfig& ec, long trial, const std::vector<long>& pts,
                            double static_crlb) {
    const ArrayConfig cfg = ec.effective_array();
    const OffsetSet offs = ec.effective_offsets();
    const StepSchedule sched = ec.effective_schedule();
    Rng rng = make_stream(ec.seed, static_cast<std::uint64_t>(trial));

    ChannelState ch = init_channel(ec.scenario, cfg, rng);
    const OffsetSet boot = ec.tracker == TrackerKind::RbtDi ? offs : OffsetSet::table_ii();
    const ChannelParams psi0 = initial_estimate(ch, cfg, rng, ec.init_halfwidth, boot);

    TrialTrace tr;
    tr.err_h.reserve(pts.size());
    tr.err_x.reserve(pts.size());
    switch (ec.scenario.kind) {
    case ScenarioKind::QuasiStatic:
        tr.crlb = static_crlb;
        break;
    case ScenarioKind::DynamicI: {
        const OffsetSet ref = ec.tracker == TrackerKind::RbtDi ? offs : OffsetSet::table_iii();
        try {
            tr.crlb = crlb_di_offsets(cfg, DiModel{di_sigma_beta_sq(ec.scenario, cfg, ch.x)}, ref);
        } catch (const SingularFisher&) {
        }
        break;
    }
    case ScenarioKind::DynamicII:
        break;
    }

    std::variant<TrackerState, RbtState, BeamSwitchState, EkfState> trk;
    switch (ec.tracker) {
    case TrackerKind::JbctS:
    case TrackerKind::JbctDii:
        trk = make_jbct_state(cfg, offs, sched, psi0);
        break;
    case TrackerKind::RbtDi: {
        double sb2 = di_sigma_beta_sq(ec.scenario, cfg,
                                      ec.rbt_mode == RbtMode::Perfect ? ch.x : psi0.x);
        trk = make_rbt_state(cfg, offs, sched, psi0.x, DiModel{sb2});
        break;
    }
    case TrackerKind::BeamSwitch:
        trk = make_beam_switch(psi0.x, psi0.beta(), ec.beam_oversampling);
        break;
    case TrackerKind::Ekf:
        trk = make_ekf(psi0.x, psi0.beta(), ec.ekf_q);
        break;
    }

    std::size_t next = 0;
    for (long k = 1; k <= ec.num_eccs; ++k) {
        // beams for this ECC come from the previous estimate
        Dpv center;
        std::array<Dpv, 3> probe;
        if (auto* s = std::get_if<TrackerState>(&trk)) {
            center = s->psi_hat.x;
            probe = s->offsets.deltas;
        } else if (auto* s = std::get_if<RbtState>(&trk)) {
            center = s->x_hat;
            probe = s->offsets.deltas;
        } else if (auto* s = std::get_if<BeamSwitchState>(&trk)) {
            center = s->current;
            probe = s->probe_offsets();
        } else {
            center = std::get<EkfState>(trk).x_hat;
            probe = EkfState::probe_offsets();
        }
        ch = evolve(ch, ec.scenario, cfg, rng);
        const ChannelParams truth = ch.params();
        CVec y = kernel_mean(cfg, truth, center, probe);
        for (int i = 0; i < 3; ++i) y(i) += complex_normal(rng, cfg.noise_var);

        ChannelParams est;
        if (auto* s = std::get_if<TrackerState>(&trk)) {
            *s = jbct_static_step(std::move(*s), cfg, y);
            s->psi_hat.x = clamp_physical(cfg, s->psi_hat.x);
            est = s->psi_hat;
        } else if (auto* s = std::get_if<RbtState>(&trk)) {
            double sb2 = s->cache.sigma_beta_sq;
            if (ec.rbt_mode == RbtMode::Estimated) {
                try {
                    sb2 = di_sigma_beta_sq(ec.scenario, cfg, s->x_hat);
                } catch (const OutOfPhysicalRange&) {
                }
            }
            *s = rbt_di_step(std::move(*s), cfg, DiModel{sb2}, y);
            s->x_hat = clamp_physical(cfg, s->x_hat);
            // per-ECC gain fit at the new direction for the channel error
            CVec3 e;
            for (std::size_t i = 0; i < 3; ++i)
                e(static_cast<Eigen::Index>(i)) =
                    offset_kernel(cfg.M, cfg.N, center + probe[i] - s->x_hat).g;
            const cplx bh = e.dot(y.head<3>()) / (cfg.pilot_amp * e.squaredNorm());
            est = ChannelParams::make(bh, s->x_hat);
        } else if (auto* s = std::get_if<BeamSwitchState>(&trk)) {
            *s = baseline_beam_switch_step(std::move(*s), cfg, y);
            s->current = clamp_physical(cfg, s->current);
            est = s->estimate();
        } else {
            auto& ek = std::get<EkfState>(trk);
            ek = baseline_ekf_step(std::move(ek), cfg, y);
            ek.x_hat = clamp_physical(cfg, ek.x_hat);
            est = ek.estimate();
        }

        if (next < pts.size() && pts[next] == k) {
            tr.err_h.push_back(channel_error(cfg, est, truth));
            tr.err_x.push_back((est.x - truth.x).norm_sq());
            ++next;
        }
    }
    return tr;
}

} // namespace detail

inline std::vector<MetricsRecord> run_experiment(const ExperimentConfig& ec) {
    ec.validate();
    const auto pts = detail::record_points(ec);
    double static_crlb = std::numeric_limits<double>::quiet_NaN();
    if (ec.scenario.kind == ScenarioKind::QuasiStatic) {
        const bool own = ec.tracker == TrackerKind::JbctS || ec.tracker == TrackerKind::JbctDii;
        static_crlb = crlb_static_offsets(ec.effective_array(),
                                          own ? ec.effective_offsets() : OffsetSet::table_ii());
    }
    std::vector<detail::TrialTrace> traces(static_cast<std::size_t>(ec.num_trials));
    parallel_for(traces.size(), [&](std::size_t t) {
        traces[t] = detail::run_trial(ec, static_cast<long>(t), pts, static_crlb);
    });

    std::vector<MetricsRecord> out;
    out.reserve(pts.size());
    for (std::size_t r = 0; r < pts.size(); ++r) {
        MetricsRecord m;
        m.ecc = pts[r];
        m.explorations_total = 3 * pts[r] + 3;
        m.trials = ec.num_trials;
        double sh = 0, sx = 0, sc = 0;
        for (const auto& t : traces) {
            sh += t.err_h[r];
            sx += t.err_x[r];
            sc += t.crlb;
        }
        const double n = double(ec.num_trials);
        m.mse_h = sh / n;
        m.mse_x = sx / n;
        m.crlb_ref = std::isfinite(sc) ? sc / n / double(pts[r])
                                       : std::numeric_limits<double>::quiet_NaN();
        out.push_back(m);
    }
    return out;
}

inline std::string format_value(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline const char* kCsvHeader = "ecc,explorations_total,mse_h,mse_x,crlb_ref,trials";

inline std::string csv_text(const std::vector<MetricsRecord>& records) {
    std::string s = kCsvHeader;
    s += '\n';
    for (const auto& r : records) {
        s += std::to_string(r.ecc) + ',' + std::to_string(r.explorations_total) + ',' +
             format_value(r.mse_h) + ',' + format_value(r.mse_x) + ',' +
             format_value(r.crlb_ref) + ',' + std::to_string(r.trials) + '\n';
    }
    return s;
}

inline void emit_csv(const std::vector<MetricsRecord>& records, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
    f << csv_text(records);
    if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

inline std::vector<MetricsRecord> parse_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader) throw std::runtime_error("bad CSV header");
    std::vector<MetricsRecord> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string f[6];
        for (auto& x : f)
            if (!std::getline(ls, x, ',')) throw std::runtime_error("short CSV row");
        auto num = [](const std::string& s) {
            return s == "nan" ? std::numeric_limits<double>::quiet_NaN() : std::stod(s);
        };
        out.push_back({std::stol(f[0]), std::stol(f[1]), num(f[2]), num(f[3]), num(f[4]),
                       std::stol(f[5])});
    }
    return out;
}

} // namespace beamtrack
