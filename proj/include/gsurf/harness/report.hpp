#pragma once

// JSON report and sweep CSV. The report body (everything except
// runtime_sec) depends only on the configuration.

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <ostream>
#include <string>

#include <json.hpp>

#include "gsurf/harness/experiments.hpp"
#include "gsurf/rng.hpp"

namespace gsurf::harness {

using Json = nlohmann::ordered_json;

inline Json config_json(const ExperimentConfig& c) {
    Json j;
    j["experiment"] = std::string(to_string(c.experiment));
    j["process"] = std::string(to_string(c.process_kind));
    j["b"] = c.b;
    j["sigma"] = c.sigma;
    j["a"] = c.a;
    j["r"] = c.r;
    j["eps"] = c.eps;
    j["n_paths"] = c.n_paths;
    j["grid"] = c.grid;
    j["seed"] = c.seed;
    j["cutoff_a"] = c.cutoff_a;
    j["K"] = c.K;
    j["bandwidth"] = c.bandwidth;
    j["time_bandwidth"] = c.time_bandwidth;
    j["phi"] = c.phi;
    j["limit_kind"] = c.limit_kind;
    j["levels"] = c.levels;
    j["level_bandwidth_ratio"] = c.level_bandwidth_ratio;
    j["joint"] = c.joint;
    j["rhs_paths"] = c.rhs_paths;
    j["tilt_sign"] = c.tilt_sign;
    j["limit_lhs"] = c.limit_lhs;
    return j;
}

// Non-finite numbers become null.
inline Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json result_json(const IbpReport& r) {
    Json j;
    j["identity_tag"] = r.identity_tag;
    j["lhs"] = number(r.lhs.mean);
    j["lhs_se"] = number(r.lhs.se);
    j["rhs"] = number(r.rhs.mean);
    j["rhs_se"] = number(r.rhs.se);
    j["z_score"] = number(r.z_score);
    j["pass"] = r.pass;
    Json refs = Json::array();
    for (const auto& o : r.oracle_refs) refs.push_back({{"tag", o.tag}, {"value", number(o.value)}});
    j["oracle_refs"] = refs;
    Json params = Json::object();
    for (const auto& [k, v] : r.params) params[k] = v;
    j["params"] = params;
    j["flags"] = {{"degenerate", r.degenerate}, {"biased", r.biased}, {"unstable", r.unstable}};
    Json diag = Json::object();
    for (const auto& [k, v] : r.diagnostics) diag[k] = number(v);
    j["diagnostics"] = diag;
    return j;
}

inline Json report_json(const RunReport& r, bool with_runtime = true) {
    const auto s = summarize(r);
    Json j;
    j["experiment"] = std::string(to_string(r.config.experiment));
    j["config"] = config_json(r.config);
    j["seed"] = r.config.seed;
    j["seed_scheme"] = std::string(kSeedScheme);
    Json results = Json::array();
    for (const auto& c : r.results) results.push_back(result_json(c));
    j["results"] = results;
    j["summary"] = {{"n_checks", s.n_checks},
                    {"n_fail", s.n_fail},
                    {"pass", s.pass},
                    {"rule", r.suite_rule ? "at most 2% of |z| > 3 and none > 5" : "every check passes"},
                    {"max_z", s.max_z},
                    {"n_biased", s.n_biased},
                    {"n_degenerate", s.n_degenerate},
                    {"n_unstable", s.n_unstable}};
    if (with_runtime) j["runtime_sec"] = r.runtime_sec;
    j["version"] = kVersion;
    return j;
}

inline std::string csv_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline void write_sweep_csv(std::ostream& os, const RunReport& r) {
    os << "experiment,process,r,eps,estimate,se,oracle,z_score,pass\n";
    const std::string exp(to_string(r.config.experiment));
    for (const auto& row : r.sweep)
        os << exp << ',' << row.process << ',' << csv_number(row.r) << ',' << csv_number(row.eps) << ','
           << csv_number(row.estimate) << ',' << csv_number(row.se) << ',' << csv_number(row.oracle) << ','
           << csv_number(row.z_score) << ',' << (row.pass ? "true" : "false") << '\n';
}

}  // namespace gsurf::harness
