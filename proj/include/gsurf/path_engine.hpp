#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include <boost/random/normal_distribution.hpp>

#include "gsurf/errors.hpp"
#include "gsurf/process.hpp"
#include "gsurf/rng.hpp"

namespace gsurf {

inline constexpr double kTieTolerance = 1e-12;

struct PathSample {
    TimeGrid grid{2};
    std::vector<double> values;   // n+1 nodes
    std::vector<double> driving;  // n increments, each N(0, 1/n)
    std::uint64_t seed_tag = 0;
};

enum class ExtremumKind { min, max };

struct ExtremumRecord {
    double value = 0.0;
    double tau = 0.0;
    int grid_index = 0;
    bool refined = false;
    int tie_count = 1;
};

namespace detail {

inline double ou_noise_scale(double a, int n) {
    // sqrt(n (1 - e^{-2a/n}) / (2a)) maps an N(0,1/n) increment to the exact
    // one-step OU innovation.
    return std::sqrt(-std::expm1(-2.0 * a / n) * n / (2.0 * a));
}

// Diffusion coefficient in the coordinates where the process is a drifted
// Brownian motion; refinement operates there.
inline double natural_sigma(const ProcessSpec& spec) {
    switch (spec.kind) {
        case ProcessKind::bm:
        case ProcessKind::bridge: return 1.0;
        case ProcessKind::distorted:
        case ProcessKind::geometric: return spec.sigma;
        case ProcessKind::ou: break;
    }
    throw UnsupportedError("extremum refinement is not supported for the ou process");
}

}  // namespace detail

// Fills `values` from `driving` according to the process law.
inline void build_values(const ProcessSpec& spec, std::span<const double> driving,
                         std::span<double> values) {
    const int n = static_cast<int>(driving.size());
    const double dt = 1.0 / n;
    switch (spec.kind) {
        case ProcessKind::bm: {
            double s = 0.0;
            values[0] = 0.0;
            for (int i = 0; i < n; ++i) values[i + 1] = (s += driving[i]);
            break;
        }
        case ProcessKind::distorted: {
            double s = 0.0;
            values[0] = 0.0;
            for (int i = 0; i < n; ++i) {
                s += driving[i];
                values[i + 1] = spec.b * ((i + 1) * dt) + spec.sigma * s;
            }
            break;
        }
        case ProcessKind::geometric: {
            const double mu = spec.b - 0.5 * spec.sigma * spec.sigma;
            double s = 0.0;
            values[0] = 1.0;
            for (int i = 0; i < n; ++i) {
                s += driving[i];
                values[i + 1] = std::exp(mu * ((i + 1) * dt) + spec.sigma * s);
            }
            break;
        }
        case ProcessKind::bridge: {
            double s = 0.0;
            values[0] = 0.0;
            for (int i = 0; i < n; ++i) values[i + 1] = (s += driving[i]);
            const double end = values[n];
            for (int i = 1; i < n; ++i) values[i] -= (i * dt) * end;
            values[n] = 0.0;
            break;
        }
        case ProcessKind::ou: {
            const double decay = std::exp(-spec.a * dt);
            const double c = detail::ou_noise_scale(spec.a, n);
            values[0] = 0.0;
            for (int i = 0; i < n; ++i) values[i + 1] = decay * values[i] + c * driving[i];
            break;
        }
    }
}

// Draws standard normal increments scaled to N(0, 1/n) from the tag's stream.
inline void fill_driving(std::uint64_t seed_tag, std::span<double> driving) {
    Xoshiro256pp eng(seed_tag);
    boost::random::normal_distribution<double> normal;
    const double scale = std::sqrt(1.0 / static_cast<double>(driving.size()));
    for (auto& d : driving) d = scale * normal(eng);
}

// Reuses the buffers of `out`; out.grid and out.seed_tag select the path.
inline void simulate_into(const ProcessSpec& spec, PathSample& out) {
    const int n = out.grid.steps();
    out.driving.resize(n);
    out.values.resize(n + 1);
    fill_driving(out.seed_tag, out.driving);
    build_values(spec, out.driving, out.values);
}

inline PathSample simulate(const ProcessSpec& spec, const TimeGrid& grid, std::uint64_t seed_tag) {
    spec.validate();
    PathSample p;
    p.grid = grid;
    p.seed_tag = seed_tag;
    simulate_into(spec, p);
    return p;
}

inline ExtremumRecord grid_extremum(std::span<const double> values, ExtremumKind kind) {
    ExtremumRecord rec;
    int best = 0;
    for (int i = 1; i < static_cast<int>(values.size()); ++i) {
        const bool better = kind == ExtremumKind::min ? values[i] < values[best]
                                                      : values[i] > values[best];
        if (better) best = i;
    }
    const double v = values[best];
    int ties = 0;
    for (double x : values)
        if (std::abs(x - v) <= kTieTolerance) ++ties;
    rec.value = v;
    rec.grid_index = best;
    rec.tau = static_cast<double>(best) / (static_cast<double>(values.size()) - 1.0);
    rec.tie_count = ties;
    return rec;
}

namespace detail {

// Minimum over all cells of exact Brownian-bridge interior minima, `x` in
// natural coordinates with volatility `vol`. Returns (value, cell).
inline std::pair<double, int> refine_min(std::span<const double> x, double grid_min, double vol,
                                         std::uint64_t seed_tag) {
    const int n = static_cast<int>(x.size()) - 1;
    const double s2dt = vol * vol / n;
    double best = std::numeric_limits<double>::infinity();
    int cell = -1;
    for (int j = 0; j < n; ++j) {
        const double x0 = x[j];
        const double x1 = x[j + 1];
        if (2.0 * (x0 - grid_min) * (x1 - grid_min) / s2dt > 40.0) continue;
        const double u = uniform_at(seed_tag, static_cast<std::uint64_t>(j), 1u);
        const double d = x0 - x1;
        const double m = 0.5 * ((x0 + x1) - std::sqrt(d * d - 2.0 * s2dt * std::log(u)));
        if (m < best) {
            best = m;
            cell = j;
        }
    }
    return {best, cell};
}

}  // namespace detail

inline ExtremumRecord extremum(const ProcessSpec& spec, const PathSample& path, ExtremumKind kind,
                               bool refine) {
    for (double v : path.values)
        if (!std::isfinite(v)) throw NumericError("extremum of a non-finite path");
    ExtremumRecord rec = grid_extremum(path.values, kind);
    if (!refine) return rec;
    const double vol = detail::natural_sigma(spec);
    const bool log_space = spec.kind == ProcessKind::geometric;
    const double sign = kind == ExtremumKind::min ? 1.0 : -1.0;
    std::vector<double> x(path.values.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = log_space ? std::log(path.values[i]) : path.values[i];
        x[i] = sign * v;
    }
    const double start = log_space ? sign * std::log(rec.value) : sign * rec.value;
    const auto [m, cell] = detail::refine_min(x, start, vol, path.seed_tag);
    if (cell >= 0) {
        const double v = sign * m;
        rec.value = log_space ? std::exp(v) : v;
        rec.tau = path.grid.mid(cell);
        rec.grid_index = cell;
        rec.refined = true;
    }
    return rec;
}

inline std::vector<double> running_extremum(std::span<const double> values, ExtremumKind kind) {
    std::vector<double> out(values.size());
    if (values.empty()) return out;
    out[0] = values[0];
    for (std::size_t i = 1; i < values.size(); ++i)
        out[i] = kind == ExtremumKind::max ? std::max(out[i - 1], values[i])
                                           : std::min(out[i - 1], values[i]);
    return out;
}

using PathFunctional = std::function<double(std::span<const double>)>;

// Central difference of g along the node perturbation z (values + delta*z).
inline double finite_diff_directional(const PathFunctional& g, const PathSample& path,
                                      std::span<const double> z_nodes, double delta) {
    if (!(delta > 0)) throw ParameterError("finite difference step must be > 0");
    std::vector<double> up(path.values), dn(path.values);
    for (std::size_t i = 0; i < up.size(); ++i) {
        up[i] += delta * z_nodes[i];
        dn[i] -= delta * z_nodes[i];
    }
    const double r = (g(up) - g(dn)) / (2.0 * delta);
    if (!std::isfinite(r)) throw NumericError("finite difference produced a non-finite value");
    return r;
}

// Central difference of g when the driving noise moves along h (cell
// derivative of a Cameron-Martin direction) and the path is rebuilt.
inline double finite_diff_driving(const ProcessSpec& spec, const PathFunctional& g,
                                  const PathSample& path, std::span<const double> h,
                                  double delta) {
    if (!(delta > 0)) throw ParameterError("finite difference step must be > 0");
    const int n = path.grid.steps();
    std::vector<double> drv(n), up(n + 1), dn(n + 1);
    for (int j = 0; j < n; ++j) drv[j] = path.driving[j] + delta * h[j] / n;
    build_values(spec, drv, up);
    for (int j = 0; j < n; ++j) drv[j] = path.driving[j] - delta * h[j] / n;
    build_values(spec, drv, dn);
    const double r = (g(up) - g(dn)) / (2.0 * delta);
    if (!std::isfinite(r)) throw NumericError("finite difference produced a non-finite value");
    return r;
}

// Linear interpolation of node values at time t.
inline double interpolate_nodes(std::span<const double> nodes, double t) {
    const int n = static_cast<int>(nodes.size()) - 1;
    const double pos = std::clamp(t, 0.0, 1.0) * n;
    int j = static_cast<int>(pos);
    if (j >= n) return nodes[n];
    const double w = pos - j;
    return w == 0.0 ? nodes[j] : (1.0 - w) * nodes[j] + w * nodes[j + 1];
}

}  // namespace gsurf
