#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "conclab/common.hpp"

namespace conclab {

// Line-oriented config: `[section]` headers, `key = value` pairs, dotted keys
// for nesting, `#` comments. Every key is validated against the schema of the
// chosen experiment kind; unknown keys are rejected with their location.
struct RawConfig {
    struct Entry {
        std::string value;
        int line = 0;
    };
    std::map<std::string, Entry> values; // full dotted key -> entry
    std::string path;

    bool has(const std::string& key) const { return values.count(key) != 0; }

    std::string get(const std::string& key) const {
        auto it = values.find(key);
        if (it == values.end()) throw config_error(path + ": missing required key `" + key + "`");
        return it->second.value;
    }

    std::string get_or(const std::string& key, const std::string& fallback) const {
        auto it = values.find(key);
        return it == values.end() ? fallback : it->second.value;
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

} // namespace detail

inline RawConfig parse_raw_config(std::istream& in, const std::string& path) {
    RawConfig cfg;
    cfg.path = path;
    std::string line, section;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string::size_type h = line.find('#');
        if (h != std::string::npos) line.erase(h);
        std::string t = detail::trim(line);
        if (t.empty()) continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw config_error(path + ":" + std::to_string(lineno) + ": malformed section header");
            section = detail::trim(t.substr(1, t.size() - 2));
            if (section.empty())
                throw config_error(path + ":" + std::to_string(lineno) + ": empty section name");
            continue;
        }
        std::string::size_type eq = t.find('=');
        if (eq == std::string::npos)
            throw config_error(path + ":" + std::to_string(lineno) + ": expected `key = value`");
        std::string key = detail::trim(t.substr(0, eq));
        std::string value = detail::trim(t.substr(eq + 1));
        if (key.empty()) throw config_error(path + ":" + std::to_string(lineno) + ": empty key");
        std::string full = section.empty() ? key : section + "." + key;
        if (cfg.values.count(full))
            throw config_error(path + ":" + std::to_string(lineno) + ": duplicate key `" + full + "`");
        cfg.values[full] = {value, lineno};
    }
    return cfg;
}

inline RawConfig parse_raw_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot open config file " + path);
    return parse_raw_config(in, path);
}

enum class ExperimentKind { verify, certify, tails, constants, scan };

inline ExperimentKind parse_kind(const std::string& s) {
    if (s == "verify") return ExperimentKind::verify;
    if (s == "certify") return ExperimentKind::certify;
    if (s == "tails") return ExperimentKind::tails;
    if (s == "constants") return ExperimentKind::constants;
    if (s == "scan") return ExperimentKind::scan;
    throw config_error("unknown experiment kind `" + s + "` (expected verify, certify, tails, constants or scan)");
}

inline const char* kind_name(ExperimentKind k) {
    switch (k) {
        case ExperimentKind::verify: return "verify";
        case ExperimentKind::certify: return "certify";
        case ExperimentKind::tails: return "tails";
        case ExperimentKind::constants: return "constants";
        case ExperimentKind::scan: return "scan";
    }
    return "?";
}

struct ExperimentConfig {
    ExperimentKind kind = ExperimentKind::verify;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    double tolerance = 1e-9;
    int threads = 1;

    // model
    std::string model_type = "curie_weiss"; // curie_weiss | random | zero
    int n = 5;
    double beta0 = 0.5;
    double field = 0.0;
    double j_row = 0.5;
    double h_max = 0.0;
    int enum_limit = 24;
    int slice_r = -1; // constants: slice occupancy, default n/2

    // verify
    int instances = 20;

    // observable (tails / scan)
    int degree = 2;
    std::string tensor_file; // empty: all-ones coefficients

    // chain (tails)
    long long steps = 100000;
    long long burn_in = -1; // negative: use the 10 n log n heuristic
    long long thinning = 1;

    // tail grid
    double t_min = 0.0;
    double t_max = 0.0; // 0: auto from the certificate scale
    int t_points = 25;

    // scan
    std::string scan_parameter = "beta0";
    double scan_from = 0.0;
    double scan_to = 0.8;
    int scan_points = 9;
};

namespace detail {

inline double to_real(const RawConfig& cfg, const std::string& key, const std::string& text) {
    try {
        std::size_t pos = 0;
        double v = std::stod(text, &pos);
        if (pos != text.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw config_error(cfg.path + ": key `" + key + "`: expected a real number, got `" + text + "`");
    }
}

inline long long to_int(const RawConfig& cfg, const std::string& key, const std::string& text) {
    try {
        std::size_t pos = 0;
        long long v = std::stoll(text, &pos);
        if (pos != text.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw config_error(cfg.path + ": key `" + key + "`: expected an integer, got `" + text + "`");
    }
}

inline std::uint64_t to_u64(const RawConfig& cfg, const std::string& key, const std::string& text) {
    try {
        std::size_t pos = 0;
        unsigned long long v = std::stoull(text, &pos);
        if (pos != text.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw config_error(cfg.path + ": key `" + key + "`: expected an unsigned integer, got `" + text + "`");
    }
}

} // namespace detail

inline ExperimentConfig validate_config(const RawConfig& raw) {
    ExperimentConfig cfg;
    cfg.kind = parse_kind(raw.get("experiment.kind"));

    std::set<std::string> allowed = {"experiment.kind", "experiment.seed", "experiment.out",
                                     "experiment.tolerance", "experiment.threads",
                                     "model.type", "model.n", "model.beta0", "model.field",
                                     "model.j_row", "model.h_max", "model.limit"};
    switch (cfg.kind) {
        case ExperimentKind::verify: allowed.insert("experiment.instances"); break;
        case ExperimentKind::certify: break;
        case ExperimentKind::tails:
            allowed.insert({"observable.d", "observable.tensor", "chain.steps", "chain.burn_in",
                            "chain.thinning", "tails.t_min", "tails.t_max", "tails.points"});
            break;
        case ExperimentKind::constants: allowed.insert("model.r"); break;
        case ExperimentKind::scan:
            allowed.insert({"scan.parameter", "scan.from", "scan.to", "scan.points"});
            break;
    }

    for (const auto& [key, entry] : raw.values)
        if (!allowed.count(key))
            throw config_error(raw.path + ":" + std::to_string(entry.line) + ": unknown key `" + key + "`");

    // the seed requirement for tails and scan is enforced at invocation time,
    // after command-line overrides have been applied
    if (raw.has("experiment.seed")) cfg.seed = detail::to_u64(raw, "experiment.seed", raw.get("experiment.seed"));

    cfg.out_dir = raw.get_or("experiment.out", ".");
    if (raw.has("experiment.tolerance"))
        cfg.tolerance = detail::to_real(raw, "experiment.tolerance", raw.get("experiment.tolerance"));
    if (raw.has("experiment.threads"))
        cfg.threads = static_cast<int>(detail::to_int(raw, "experiment.threads", raw.get("experiment.threads")));
    if (raw.has("experiment.instances"))
        cfg.instances = static_cast<int>(detail::to_int(raw, "experiment.instances", raw.get("experiment.instances")));

    cfg.model_type = raw.get_or("model.type", "curie_weiss");
    if (cfg.model_type != "curie_weiss" && cfg.model_type != "random" && cfg.model_type != "zero")
        throw config_error(raw.path + ": model.type must be curie_weiss, random or zero");
    if (raw.has("model.n")) cfg.n = static_cast<int>(detail::to_int(raw, "model.n", raw.get("model.n")));
    require(cfg.n >= 1, "model.n must be >= 1");
    if (raw.has("model.beta0")) cfg.beta0 = detail::to_real(raw, "model.beta0", raw.get("model.beta0"));
    if (raw.has("model.field")) cfg.field = detail::to_real(raw, "model.field", raw.get("model.field"));
    if (raw.has("model.j_row")) cfg.j_row = detail::to_real(raw, "model.j_row", raw.get("model.j_row"));
    if (raw.has("model.h_max")) cfg.h_max = detail::to_real(raw, "model.h_max", raw.get("model.h_max"));
    if (raw.has("model.limit"))
        cfg.enum_limit = static_cast<int>(detail::to_int(raw, "model.limit", raw.get("model.limit")));
    if (raw.has("model.r")) cfg.slice_r = static_cast<int>(detail::to_int(raw, "model.r", raw.get("model.r")));

    if (cfg.kind == ExperimentKind::tails) {
        if (raw.has("observable.d"))
            cfg.degree = static_cast<int>(detail::to_int(raw, "observable.d", raw.get("observable.d")));
        require(cfg.degree >= 1 && cfg.degree <= 4, "observable.d must be in 1..4");
        cfg.tensor_file = raw.get_or("observable.tensor", "");
        if (raw.has("chain.steps"))
            cfg.steps = detail::to_int(raw, "chain.steps", raw.get("chain.steps"));
        if (raw.has("chain.burn_in"))
            cfg.burn_in = detail::to_int(raw, "chain.burn_in", raw.get("chain.burn_in"));
        if (raw.has("chain.thinning"))
            cfg.thinning = detail::to_int(raw, "chain.thinning", raw.get("chain.thinning"));
        if (raw.has("tails.t_min")) cfg.t_min = detail::to_real(raw, "tails.t_min", raw.get("tails.t_min"));
        if (raw.has("tails.t_max")) cfg.t_max = detail::to_real(raw, "tails.t_max", raw.get("tails.t_max"));
        if (raw.has("tails.points"))
            cfg.t_points = static_cast<int>(detail::to_int(raw, "tails.points", raw.get("tails.points")));
        require(cfg.t_points >= 2, "tails.points must be >= 2");
    }

    if (cfg.kind == ExperimentKind::scan) {
        cfg.scan_parameter = raw.get_or("scan.parameter", "beta0");
        if (cfg.scan_parameter != "beta0" && cfg.scan_parameter != "field")
            throw config_error(raw.path + ": scan.parameter must be beta0 or field");
        if (raw.has("scan.from")) cfg.scan_from = detail::to_real(raw, "scan.from", raw.get("scan.from"));
        if (raw.has("scan.to")) cfg.scan_to = detail::to_real(raw, "scan.to", raw.get("scan.to"));
        if (raw.has("scan.points"))
            cfg.scan_points = static_cast<int>(detail::to_int(raw, "scan.points", raw.get("scan.points")));
        require(cfg.scan_points >= 1, "scan.points must be >= 1");
    }

    return cfg;
}

inline ExperimentConfig parse_config(const std::string& path) { return validate_config(parse_raw_config_file(path)); }

} // namespace conclab
