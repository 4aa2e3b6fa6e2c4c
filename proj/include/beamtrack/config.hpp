#pragma once

// Flat `key = value` experiment configuration (a TOML subset: comments with
// '#', bare or double-quoted values, no tables).

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "beamtrack/harness.hpp"

namespace beamtrack {

using ConfigMap = std::map<std::string, std::string>;

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double to_double(const std::string& key, const std::string& v) {
    std::string t = v;
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
    if (t == "inf" || t == "+inf") return std::numeric_limits<double>::infinity();
    if (t == "-inf") return -std::numeric_limits<double>::infinity();
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    }
}

inline long to_long(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const long d = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected an integer, got '" + v + "'");
    }
}

} // namespace detail

inline ConfigMap parse_config_text(const std::string& text) {
    ConfigMap out;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') quoted = !quoted;
            if (line[i] == '#' && !quoted) {
                line.resize(i);
                break;
            }
        }
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (line.front() == '[' || eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        std::string val = detail::trim(line.substr(eq + 1));
        if (val.size() >= 2 && val.front() == '"' && val.back() == '"') val = val.substr(1, val.size() - 2);
        if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        out[key] = val;
    }
    return out;
}

inline ConfigMap load_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("config: file not found: " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str());
}

inline OffsetSet parse_offsets(const std::string& v) {
    if (v == "tableII" || v == "table-ii") return OffsetSet::table_ii();
    if (v == "tableIII" || v == "table-iii") return OffsetSet::table_iii();
    std::vector<double> xs;
    std::stringstream ss(v);
    std::string tok;
    while (std::getline(ss, tok, ',')) xs.push_back(detail::to_double("offsets", detail::trim(tok)));
    if (xs.size() != 6)
        throw ConfigError("offsets: expected tableII, tableIII or six comma-separated numbers");
    OffsetSet o = OffsetSet::from_flat(xs.data());
    o.validate();
    return o;
}

// Applies one key to the experiment; unknown keys are rejected.
inline void apply_config_key(ExperimentConfig& ec, const std::string& key, const std::string& v) {
    using detail::to_double;
    using detail::to_long;
    auto& sc = ec.scenario;
    if (key == "scenario") {
        if (v == "quasi-static") sc.kind = ScenarioKind::QuasiStatic;
        else if (v == "dynamic-i") sc.kind = ScenarioKind::DynamicI;
        else if (v == "dynamic-ii") sc.kind = ScenarioKind::DynamicII;
        else throw ConfigError("scenario: expected quasi-static, dynamic-i or dynamic-ii");
        sc.apply_region();
    } else if (key == "tracker") {
        if (v == "jbct-s") ec.tracker = TrackerKind::JbctS;
        else if (v == "rbt") ec.tracker = TrackerKind::RbtDi;
        else if (v == "jbct-dii") ec.tracker = TrackerKind::JbctDii;
        else if (v == "beam-switch") ec.tracker = TrackerKind::BeamSwitch;
        else if (v == "ekf") ec.tracker = TrackerKind::Ekf;
        else throw ConfigError("tracker: expected jbct-s, rbt, jbct-dii, beam-switch or ekf");
    } else if (key == "region") {
        if (v == "central") sc.region = AoaRegion::Central;
        else if (v == "edge") sc.region = AoaRegion::Edge;
        else if (v == "custom") sc.region = AoaRegion::Custom;
        else throw ConfigError("region: expected central, edge or custom");
        sc.apply_region();
    } else if (key == "theta_min") {
        sc.theta_range.lo = to_double(key, v);
    } else if (key == "theta_max") {
        sc.theta_range.hi = to_double(key, v);
    } else if (key == "phi_min") {
        sc.phi_range.lo = to_double(key, v);
    } else if (key == "phi_max") {
        sc.phi_range.hi = to_double(key, v);
    } else if (key == "rbt_mode") {
        if (v == "perfect") ec.rbt_mode = RbtMode::Perfect;
        else if (v == "estimated") ec.rbt_mode = RbtMode::Estimated;
        else throw ConfigError("rbt_mode: expected perfect or estimated");
    } else if (key == "offsets") {
        ec.offsets = parse_offsets(v);
    } else if (key == "step") {
        StepSchedule s = ec.effective_schedule();
        if (v == "diminishing") s.kind = StepSchedule::Kind::Diminishing;
        else if (v == "constant") s.kind = StepSchedule::Kind::Constant;
        else throw ConfigError("step: expected diminishing or constant");
        if (s.kind == StepSchedule::Kind::Constant && !(s.b > 0)) s.b = 0.7;
        ec.schedule = s;
    } else if (key == "epsilon" || key == "k0" || key == "step_b") {
        StepSchedule s = ec.effective_schedule();
        const double d = to_double(key, v);
        if (key == "epsilon") s.epsilon = d;
        else if (key == "k0") s.k0 = d;
        else s.b = d;
        ec.schedule = s;
    } else if (key == "trials") {
        ec.num_trials = to_long(key, v);
    } else if (key == "eccs") {
        ec.num_eccs = to_long(key, v);
    } else if (key == "seed") {
        const long s = to_long(key, v);
        if (s < 0) throw ConfigError("seed: must be >= 0");
        ec.seed = static_cast<std::uint64_t>(s);
    } else if (key == "snr_db") {
        ec.snr_db = to_double(key, v);
    } else if (key == "record_every") {
        ec.record_every = to_long(key, v);
    } else if (key == "m") {
        ec.array.M = static_cast<int>(to_long(key, v));
    } else if (key == "n") {
        ec.array.N = static_cast<int>(to_long(key, v));
    } else if (key == "d1") {
        ec.array.d1 = to_double(key, v);
    } else if (key == "d2") {
        ec.array.d2 = to_double(key, v);
    } else if (key == "lambda") {
        ec.array.lambda = to_double(key, v);
    } else if (key == "noise_var") {
        ec.array.noise_var = to_double(key, v);
    } else if (key == "rician_k_db") {
        sc.rician_k_db = to_double(key, v);
    } else if (key == "sigma_beta_c_sq") {
        sc.sigma_beta_c_sq = to_double(key, v);
    } else if (key == "rho") {
        sc.rho = to_double(key, v);
    } else if (key == "delta_a_deg") {
        sc.delta_a = to_double(key, v) * kPi / 180.0;
    } else if (key == "init_halfwidth") {
        ec.init_halfwidth = to_double(key, v);
    } else if (key == "ekf_q") {
        ec.ekf_q = to_double(key, v);
    } else if (key == "beam_oversampling") {
        ec.beam_oversampling = static_cast<int>(to_long(key, v));
    } else {
        throw ConfigError("config: unknown key '" + key + "'");
    }
}

// Scenario and tracker first so that dependent defaults resolve in order.
inline void apply_config(ExperimentConfig& ec, const ConfigMap& m) {
    for (const char* first : {"scenario", "tracker", "region"})
        if (auto it = m.find(first); it != m.end()) apply_config_key(ec, it->first, it->second);
    for (const auto& [k, v] : m)
        if (k != "scenario" && k != "tracker" && k != "region") apply_config_key(ec, k, v);
}

} // namespace beamtrack
