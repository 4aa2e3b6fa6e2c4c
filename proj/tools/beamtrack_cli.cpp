// Command-line entry point: track, crlb, offsets, verify.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <sstream>

#include "beamtrack/beamtrack.hpp"

using namespace beamtrack;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitVerify = 2;

std::vector<int> parse_int_list(const std::string& s, const char* what) {
    std::vector<int> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        try {
            out.push_back(std::stoi(tok));
        } catch (const std::exception&) {
            throw ConfigError(std::string(what) + ": expected comma-separated integers");
        }
    }
    if (out.empty()) throw ConfigError(std::string(what) + ": empty list");
    return out;
}

ObjectiveKind parse_objective(const std::string& s) {
    if (s == "static-asymptotic") return ObjectiveKind::StaticAsymptotic;
    if (s == "static-finite") return ObjectiveKind::StaticFinite;
    if (s == "di-asymptotic") return ObjectiveKind::DiAsymptotic;
    if (s == "di-finite") return ObjectiveKind::DiFinite;
    throw ConfigError("objective: expected static-asymptotic, static-finite, di-asymptotic or di-finite");
}

bool is_static(ObjectiveKind k) {
    return k == ObjectiveKind::StaticAsymptotic || k == ObjectiveKind::StaticFinite;
}

std::string offsets_text(const OffsetSet& o) {
    std::string s;
    for (const auto& d : o.deltas) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "(%.4f, %.4f) ", d.x1, d.x2);
        s += buf;
    }
    if (!s.empty()) s.pop_back();
    return s;
}

// ---- verify -------------------------------------------------------------------

struct Suite {
    std::string name;
    bool ok;
    std::string detail;
};

Suite verify_identifiability() {
    ArrayConfig cfg;
    Rng rng = make_stream(11, 0);
    std::uniform_real_distribution<double> u(-0.4, 0.4), g(-1.0, 1.0);
    double worst = 0;
    for (int t = 0; t < 20; ++t) {
        const Dpv center{3 * g(rng), 3 * g(rng)};
        const ChannelParams psi = ChannelParams::make({g(rng), g(rng)}, center + Dpv{u(rng), u(rng)});
        const Ebm ebm = build_ebm(cfg, center, OffsetSet::table_ii());
        const CVec y = noiseless_mean(cfg, psi, ebm);
        try {
            const auto rec = recover_from_noiseless(cfg, ebm, y, {center + Dpv{-0.45, -0.45}, center + Dpv{0.45, 0.45}});
            worst = std::max(worst, (rec.vec() - psi.vec()).cwiseAbs().maxCoeff());
        } catch (const std::exception&) {
            worst = 1;
        }
    }
    return {"identifiability", worst < 1e-9, "max recovery error " + format_value(worst)};
}

Suite verify_mean_field() {
    ArrayConfig cfg;
    Rng rng = make_stream(12, 0);
    std::uniform_real_distribution<double> g(-1.0, 1.0);
    double worst_f = 0, worst_j = 0;
    for (int t = 0; t < 10; ++t) {
        const ChannelParams psi = ChannelParams::make({g(rng), g(rng)}, Dpv{3 * g(rng), 3 * g(rng)});
        worst_f = std::max(worst_f, mean_field(psi, psi, cfg, OffsetSet::table_ii()).norm());
        const double h = 1e-6;
        for (int c = 0; c < 4; ++c) {
            Vec4 p = psi.vec(), m = psi.vec();
            p(c) += h;
            m(c) -= h;
            const Vec4 col = (mean_field(ChannelParams::from_vec(p), psi, cfg, OffsetSet::table_ii()) -
                              mean_field(ChannelParams::from_vec(m), psi, cfg, OffsetSet::table_ii())) /
                             (2 * h);
            Vec4 e = Vec4::Zero();
            e(c) = -1;
            worst_j = std::max(worst_j, (col - e).cwiseAbs().maxCoeff());
        }
    }
    return {"mean-field", worst_f < 1e-12 && worst_j < 1e-5,
            "|f(psi)| " + format_value(worst_f) + ", Jacobian error " + format_value(worst_j)};
}

Suite verify_op_counts() {
    const long j = count_ops(StepKind::JbctStatic), r = count_ops(StepKind::Rbt);
    ArrayConfig cfg;
    Rng rng = make_stream(13, 0);
    std::uniform_real_distribution<double> g(-1.0, 1.0);
    const FastUpdateCache cache = build_fast_cache(cfg, OffsetSet::table_ii());
    double worst = 0;
    for (int t = 0; t < 20; ++t) {
        const ChannelParams ph = ChannelParams::make({g(rng), g(rng)}, Dpv{3 * g(rng), 3 * g(rng)});
        CVec y(3);
        for (int i = 0; i < 3; ++i) y(i) = cplx(3 * g(rng), 3 * g(rng));
        OpCounter ops;
        const Vec4 fast = jbct_direction_fast(cache, ph.beta(), y, ops);
        const Vec4 naive = jbct_direction_naive(cfg, ph, OffsetSet::table_ii(), y);
        worst = std::max(worst, (fast - naive).cwiseAbs().maxCoeff());
    }
    return {"op-count", j == 45 && r == 28 && worst < 1e-10,
            "jbct " + std::to_string(j) + ", rbt " + std::to_string(r) + ", fast/naive " + format_value(worst)};
}

Suite verify_fisher() {
    ArrayConfig cfg;
    const ChannelParams psi = ChannelParams::make({0.8, -0.4}, Dpv{0.7, -1.2});
    const Ebm ebm = build_ebm(cfg, psi.x + Dpv{0.1, -0.05}, OffsetSet::table_ii());
    const Mat4 f = fisher_static(cfg, psi, ebm);
    Rng rng = make_stream(14, 0);
    const CVec mu = noiseless_mean(cfg, psi, ebm);
    CMat g = ebm.columns.adjoint() * jacobian(cfg, psi);
    Mat4 acc = Mat4::Zero();
    const int draws = 50000;
    for (int t = 0; t < draws; ++t) {
        CVec z(3);
        for (int i = 0; i < 3; ++i) z(i) = complex_normal(rng, cfg.noise_var);
        const Vec4 s = (2.0 * cfg.pilot_amp / cfg.noise_var) * (g.adjoint() * z).real();
        acc += s * s.transpose();
    }
    acc /= draws;
    const double err = (acc - f).norm() / f.norm();
    return {"fisher-oracle", err < 0.03, "static score-covariance error " + format_value(err)};
}

int run_verify() {
    const std::vector<Suite> suites = {verify_identifiability(), verify_mean_field(), verify_op_counts(),
                                       verify_fisher()};
    bool all = true;
    for (const auto& s : suites) {
        std::cout << (s.ok ? "PASS " : "FAIL ") << s.name << ": " << s.detail << '\n';
        all = all && s.ok;
    }
    return all ? kExitOk : kExitVerify;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Planar-array beam and channel tracking simulator"};
    app.require_subcommand(1);

    // track
    auto* track = app.add_subcommand("track", "Run a Monte-Carlo tracking experiment");
    std::string config_path, out_path, scenario, tracker, offsets;
    long seed = -1, trials = -1, eccs = -1;
    double snr_db = std::numeric_limits<double>::quiet_NaN();
    track->add_option("--config", config_path, "Experiment config file (key = value)");
    track->add_option("--seed", seed, "RNG seed");
    track->add_option("--out", out_path, "CSV output path (default: stdout)");
    track->add_option("--trials", trials, "Number of trials");
    track->add_option("--eccs", eccs, "Number of ECCs per trial");
    track->add_option("--snr-db", snr_db, "Pilot SNR |s|^2/sigma^2 in dB");
    track->add_option("--scenario", scenario, "quasi-static | dynamic-i | dynamic-ii");
    track->add_option("--tracker", tracker, "jbct-s | rbt | jbct-dii | beam-switch | ekf");
    track->add_option("--offsets", offsets, "tableII | tableIII | six comma-separated numbers");

    // crlb
    auto* crlb = app.add_subcommand("crlb", "Evaluate normalized CRLBs over array sizes");
    std::string model = "static", sizes = "8,16,32,64", crlb_offsets;
    double snr_beta_db = 0.0, crlb_snr_db = 0.0;
    crlb->add_option("--model", model, "static | di")->check(CLI::IsMember({"static", "di"}));
    crlb->add_option("--sizes", sizes, "Comma-separated M=N values");
    crlb->add_option("--offsets", crlb_offsets, "tableII | tableIII | six numbers");
    crlb->add_option("--snr-db", crlb_snr_db, "Pilot SNR in dB (static model)");
    crlb->add_option("--snr-beta-db", snr_beta_db, "Gain SNR in dB (di model)");

    // offsets
    auto* offs = app.add_subcommand("offsets", "Search optimal exploration offsets");
    std::string objective = "static-asymptotic", sweep, off_ref, off_out;
    int off_m = 8, off_n = 8;
    long off_seed = 1;
    double off_snr_beta = 0.0;
    offs->add_option("--objective", objective,
                     "static-asymptotic | static-finite | di-asymptotic | di-finite");
    offs->add_option("--m", off_m, "Array size along x (finite objectives)");
    offs->add_option("--n", off_n, "Array size along z (finite objectives)");
    offs->add_option("--snr-beta-db", off_snr_beta, "Gain SNR in dB (di objectives)");
    offs->add_option("--seed", off_seed, "RNG seed for restarts");
    offs->add_option("--sweep", sweep, "Comma-separated M=N sizes for a robustness sweep");
    offs->add_option("--offsets", off_ref, "Reference offsets (default: published preset)");
    offs->add_option("--out", off_out, "CSV output path for the result or sweep");

    app.add_subcommand("verify", "Run built-in self-checks");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return e.get_exit_code() == 0 ? kExitOk : kExitConfig;
    }

    try {
        if (track->parsed()) {
            ExperimentConfig ec;
            if (!config_path.empty()) apply_config(ec, load_config_file(config_path));
            ConfigMap flags;
            if (!scenario.empty()) flags["scenario"] = scenario;
            if (!tracker.empty()) flags["tracker"] = tracker;
            if (!offsets.empty()) flags["offsets"] = offsets;
            if (seed >= 0) flags["seed"] = std::to_string(seed);
            if (trials >= 0) flags["trials"] = std::to_string(trials);
            if (eccs >= 0) flags["eccs"] = std::to_string(eccs);
            if (!std::isnan(snr_db)) flags["snr_db"] = format_value(snr_db);
            apply_config(ec, flags);
            const auto records = run_experiment(ec);
            if (out_path.empty()) std::cout << csv_text(records);
            else emit_csv(records, out_path);
            return kExitOk;
        }
        if (crlb->parsed()) {
            const bool st = model == "static";
            const OffsetSet o = crlb_offsets.empty() ? (st ? OffsetSet::table_ii() : OffsetSet::table_iii())
                                                     : parse_offsets(crlb_offsets);
            const double snr = std::pow(10.0, (st ? crlb_snr_db : snr_beta_db) / 10.0);
            const double lim = st ? crlb_static_asymptotic(o, std::sqrt(snr), 1.0) : crlb_di_asymptotic(o, snr);
            std::cout << "m,n,crlb,mn_crlb,asymptotic_mn_crlb\n";
            for (int s : parse_int_list(sizes, "sizes")) {
                ArrayConfig cfg;
                cfg.M = cfg.N = s;
                cfg.validate();
                double c;
                if (st) {
                    cfg.pilot_amp = std::sqrt(snr);
                    c = crlb_static_offsets(cfg, o);
                } else {
                    c = crlb_di_offsets(cfg, DiModel{snr}, o);
                }
                std::cout << s << ',' << s << ',' << format_value(c) << ',' << format_value(c * cfg.size()) << ','
                          << format_value(lim) << '\n';
            }
            return kExitOk;
        }
        if (offs->parsed()) {
            SearchConfig sc;
            sc.objective = parse_objective(objective);
            sc.M = off_m;
            sc.N = off_n;
            sc.snr_beta_db = off_snr_beta;
            sc.seed = static_cast<std::uint64_t>(off_seed);
            const OffsetSet ref = !off_ref.empty() ? parse_offsets(off_ref)
                                                   : (is_static(sc.objective) ? OffsetSet::table_ii()
                                                                              : OffsetSet::table_iii());
            if (!sweep.empty()) {
                std::vector<std::pair<int, int>> sz;
                for (int s : parse_int_list(sweep, "sweep")) sz.push_back({s, s});
                const auto rows = robustness_sweep(ref, sz, sc.objective, sc.snr_beta_db, sc);
                std::ostringstream os;
                os << "m,n,snr_beta_db,crlb_at_offsets,crlb_min,rel_gap\n";
                for (const auto& r : rows)
                    os << r.M << ',' << r.N << ',' << format_value(r.snr_beta_db) << ','
                       << format_value(r.crlb_at_offsets) << ',' << format_value(r.crlb_min) << ','
                       << format_value(r.rel_gap) << '\n';
                if (off_out.empty()) std::cout << os.str();
                else std::ofstream(off_out, std::ios::binary) << os.str();
                return kExitOk;
            }
            const SearchResult r = optimize_offsets(sc);
            const OffsetSet canon = canonicalize(r.offsets, sc.M == sc.N);
            const double at_ref = evaluate_objective(sc, ref);
            const double gap = (r.crlb_value - at_ref) / at_ref;
            std::cout << "offsets: " << offsets_text(canon) << '\n'
                      << "crlb: " << format_value(r.crlb_value) << '\n'
                      << "reference offsets: " << offsets_text(ref) << '\n'
                      << "reference crlb: " << format_value(at_ref) << '\n'
                      << "relative difference: " << format_value(gap) << '\n'
                      << "restarts: " << r.restarts_used << '\n';
            if (!off_out.empty()) {
                std::ofstream f(off_out, std::ios::binary);
                f << "d11,d12,d21,d22,d31,d32,crlb,reference_crlb,restarts\n";
                for (double v : canon.flat()) f << format_value(v) << ',';
                f << format_value(r.crlb_value) << ',' << format_value(at_ref) << ',' << r.restarts_used << '\n';
            }
            return kExitOk;
        }
        return run_verify();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    }
}
