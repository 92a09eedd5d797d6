#pragma once

// Plain-text experiment configuration. Lines are `key = value`; `[name]`
// opens a section that applies only when running experiment `name`. Keys
// before the first section apply to every experiment. Unknown keys and
// sections are errors.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "gsurf/errors.hpp"
#include "gsurf/process.hpp"

namespace gsurf::harness {

enum class Experiment {
    density_check,
    shell_convergence,
    ibp_flat,
    ibp_halfspace,
    ibp_joint,
    limit,
    neumann,
    lemma21,
    moments
};

inline constexpr std::string_view kExperimentNames[] = {
    "density-check", "shell-convergence", "ibp-flat", "ibp-halfspace", "ibp-joint",
    "limit",         "neumann",           "lemma21",  "moments"};

inline std::string_view to_string(Experiment e) { return kExperimentNames[static_cast<int>(e)]; }

inline Experiment parse_experiment(std::string_view s) {
    for (std::size_t i = 0; i < std::size(kExperimentNames); ++i)
        if (kExperimentNames[i] == s) return static_cast<Experiment>(i);
    std::string known;
    for (auto n : kExperimentNames) known += std::string(known.empty() ? "" : ", ") + std::string(n);
    throw ConfigError("unknown experiment '" + std::string(s) + "' (known: " + known + ")");
}

struct ExperimentConfig {
    Experiment experiment = Experiment::density_check;
    ProcessKind process_kind = ProcessKind::bm;
    double b = 1.0;      // distorted / geometric / tilted limit
    double sigma = 1.0;  // distorted / geometric / tilted limit
    double a = 1.0;      // ou
    std::vector<double> r;    // empty: experiment default
    std::vector<double> eps{0.2, 0.1, 0.05, 0.025};
    std::size_t n_paths = 200000;
    int grid = 2000;
    std::uint64_t seed = 20240917;
    double cutoff_a = 1.0;
    int K = 1;
    double bandwidth = 0.0;
    double time_bandwidth = 0.0;
    std::vector<std::string> phi;  // empty: standard suite
    std::string limit_kind = "all";
    std::vector<double> levels{-0.08, -0.04, -0.02};
    double level_bandwidth_ratio = 0.25;
    bool joint = false;
    std::size_t rhs_paths = 0;
    int tilt_sign = 1;
    std::string limit_lhs = "level";

    // Parameters the process does not use are dropped.
    ProcessSpec process() const {
        switch (process_kind) {
            case ProcessKind::bm: return ProcessSpec::brownian();
            case ProcessKind::distorted: return ProcessSpec::distorted(b, sigma);
            case ProcessKind::geometric: return ProcessSpec::geometric(b, sigma);
            case ProcessKind::bridge: return ProcessSpec::bridge();
            case ProcessKind::ou: return ProcessSpec::ou(a);
        }
        return {};
    }
};

// Documented defaults, one line per key, for --help and the README.
inline const std::vector<std::pair<std::string, std::string>>& config_keys() {
    static const std::vector<std::pair<std::string, std::string>> keys = {
        {"process", "bm | distorted | geometric | bridge | ou (default bm)"},
        {"b", "drift of distorted/geometric and the tilted limit (default 1)"},
        {"sigma", "volatility of distorted/geometric and the tilted limit (default 1)"},
        {"a", "ou mean reversion (default 1)"},
        {"r", "comma list of levels (default per experiment)"},
        {"eps", "comma list of decreasing shell half-widths (default 0.2,0.1,0.05,0.025)"},
        {"n_paths", "paths per seed stream (default 200000)"},
        {"grid", "time steps n (default 2000)"},
        {"seed", "master seed (default 20240917)"},
        {"cutoff_a", "cutoff threshold a for lemma21/moments (default 1)"},
        {"K", "eigen truncation for neumann (default 1)"},
        {"bandwidth", "level kernel bandwidth, 0 = halved Silverman rule (default 0)"},
        {"time_bandwidth", "argmin-angle bandwidth, 0 = rule (default 0)"},
        {"phi", "comma list of test functionals (default: suite)"},
        {"limit_kind", "meander | tilted | bessel | all (default all)"},
        {"levels", "comma list of levels for r -> 0 extrapolation (default -0.08,-0.04,-0.02)"},
        {"level_bandwidth_ratio", "limit level bandwidth as a fraction of |r| (default 0.25)"},
        {"joint", "true requests the joint-density variant of ibp-halfspace (default false)"},
        {"rhs_paths", "samples for limit right sides, 0 = n_paths (default 0)"},
        {"tilt_sign", "sign s of the tilted-meander weight exp(s (b/sigma) m(1)); -1 flips the sign (default 1)"},
        {"limit_lhs", "level | joint: limit left side from the level regression or the (level, argmin) regression (default level)"},
    };
    return keys;
}

namespace detail {

inline std::string trim(std::string_view s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return std::string(s.substr(a, b - a));
}

inline double parse_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto* end = v.data() + v.size();
    const auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end) throw ConfigError("key '" + key + "': '" + v + "' is not a number");
    return out;
}

inline long long parse_int(const std::string& key, const std::string& v) {
    long long out = 0;
    const auto* end = v.data() + v.size();
    const auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end) throw ConfigError("key '" + key + "': '" + v + "' is not an integer");
    return out;
}

inline std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        auto t = trim(item);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    for (const auto& s : split_list(v)) out.push_back(parse_double(key, s));
    if (out.empty()) throw ConfigError("key '" + key + "' needs a non-empty list");
    return out;
}

}  // namespace detail

inline void apply_key(ExperimentConfig& c, const std::string& key, const std::string& value) {
    using namespace detail;
    if (key == "process") c.process_kind = parse_process_kind(value);
    else if (key == "b") c.b = parse_double(key, value);
    else if (key == "sigma") c.sigma = parse_double(key, value);
    else if (key == "a") c.a = parse_double(key, value);
    else if (key == "r") c.r = parse_list(key, value);
    else if (key == "eps") c.eps = parse_list(key, value);
    else if (key == "n_paths") {
        const auto n = parse_int(key, value);
        if (n < 1000) throw ConfigError("n_paths must be >= 1000");
        c.n_paths = static_cast<std::size_t>(n);
    } else if (key == "grid") {
        const auto n = parse_int(key, value);
        if (n < 2 || n > 1000000) throw ConfigError("grid must lie in [2, 1e6]");
        c.grid = static_cast<int>(n);
    } else if (key == "seed") {
        const auto s = parse_int(key, value);
        if (s < 0) throw ConfigError("seed must be >= 0");
        c.seed = static_cast<std::uint64_t>(s);
    } else if (key == "cutoff_a") c.cutoff_a = parse_double(key, value);
    else if (key == "K") c.K = static_cast<int>(parse_int(key, value));
    else if (key == "bandwidth") c.bandwidth = parse_double(key, value);
    else if (key == "time_bandwidth") c.time_bandwidth = parse_double(key, value);
    else if (key == "phi") {
        c.phi = split_list(value);
        if (c.phi.empty()) throw ConfigError("key 'phi' needs a non-empty list");
    } else if (key == "limit_kind") c.limit_kind = value;
    else if (key == "levels") c.levels = parse_list(key, value);
    else if (key == "level_bandwidth_ratio") c.level_bandwidth_ratio = parse_double(key, value);
    else if (key == "joint") {
        if (value == "true" || value == "1") c.joint = true;
        else if (value == "false" || value == "0") c.joint = false;
        else throw ConfigError("key 'joint' must be true or false");
    } else if (key == "rhs_paths") {
        const auto n = parse_int(key, value);
        if (n < 0) throw ConfigError("rhs_paths must be >= 0");
        c.rhs_paths = static_cast<std::size_t>(n);
    } else if (key == "tilt_sign") {
        const auto v = parse_int(key, value);
        if (v != 1 && v != -1) throw ConfigError("tilt_sign must be 1 or -1");
        c.tilt_sign = static_cast<int>(v);
    } else if (key == "limit_lhs") {
        if (value != "level" && value != "joint") throw ConfigError("key 'limit_lhs' must be level or joint");
        c.limit_lhs = value;
    } else {
        throw ConfigError("unknown config key '" + key + "'");
    }
}

// Applies the global block and the section of `c.experiment`.
inline void apply_config_text(ExperimentConfig& c, std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    std::optional<std::string> section;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto t = detail::trim(line);
        if (t.empty()) continue;
        if (t.front() == '[') {
            if (t.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
            const auto name = detail::trim(std::string_view(t).substr(1, t.size() - 2));
            (void)parse_experiment(name);
            section = name;
            continue;
        }
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        const auto key = detail::trim(std::string_view(t).substr(0, eq));
        const auto value = detail::trim(std::string_view(t).substr(eq + 1));
        ExperimentConfig scratch;
        try {
            if (!section || *section == to_string(c.experiment))
                apply_key(c, key, value);
            else
                apply_key(scratch, key, value);  // still validated
        } catch (const Error& e) {
            throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
        }
    }
}

inline void apply_config_file(ExperimentConfig& c, const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read config file '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    apply_config_text(c, ss.str());
}

}  // namespace gsurf::harness
