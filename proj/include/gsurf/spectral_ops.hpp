#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "gsurf/errors.hpp"
#include "gsurf/path_engine.hpp"
#include "gsurf/process.hpp"

namespace gsurf {

inline constexpr double kCameronMartinEndTolerance = 1e-12;

// Direction z(t) = integral of h over [0,t], h piecewise constant on cells.
struct CameronMartinVector {
    std::vector<double> h;         // one value per cell
    std::vector<double> z_values;  // z(t_i), exact prefix sums of h/n
    std::string label;

    static CameronMartinVector from_derivative(std::vector<double> h, std::string label) {
        if (h.size() < 2) throw GridError("direction needs at least two cells");
        CameronMartinVector v;
        const double n = static_cast<double>(h.size());
        v.z_values.assign(h.size() + 1, 0.0);
        for (std::size_t j = 0; j < h.size(); ++j) {
            if (!std::isfinite(h[j])) throw NumericError("direction derivative is not finite");
            v.z_values[j + 1] = v.z_values[j] + h[j] / n;
        }
        v.h = std::move(h);
        v.label = std::move(label);
        return v;
    }

    // h_j = n (z(t_{j+1}) - z(t_j)); requires z(0) = 0.
    static CameronMartinVector from_function(const TimeGrid& grid,
                                             const std::function<double(double)>& z,
                                             std::string label) {
        if (std::abs(z(0.0)) > kCameronMartinEndTolerance)
            throw DomainError("Cameron-Martin direction must vanish at t = 0");
        const int n = grid.steps();
        std::vector<double> h(n);
        double prev = z(0.0);
        for (int j = 0; j < n; ++j) {
            const double next = z(grid.t(j + 1));
            h[j] = n * (next - prev);
            prev = next;
        }
        return from_derivative(std::move(h), std::move(label));
    }

    static CameronMartinVector zero(const TimeGrid& grid) {
        return from_derivative(std::vector<double>(grid.steps(), 0.0), "0");
    }

    int steps() const noexcept { return static_cast<int>(h.size()); }
    double at(double t) const { return interpolate_nodes(z_values, t); }
    double end() const noexcept { return z_values.back(); }
    bool is_zero() const noexcept {
        for (double x : h)
            if (x != 0.0) return false;
        return true;
    }
};

struct EigenSystem {
    ProcessKind kind = ProcessKind::bm;
    int K = 0;
    std::vector<double> lambdas;
    std::vector<std::vector<double>> modes;  // node values on the grid
};

inline EigenSystem eigenpairs(const ProcessSpec& spec, const TimeGrid& grid, int K) {
    if (K < 1) throw ParameterError("eigen truncation K must be >= 1");
    if (spec.kind != ProcessKind::bm && spec.kind != ProcessKind::bridge)
        throw UnsupportedError("closed-form eigenpairs exist only for bm and bridge, not " +
                               spec.name());
    EigenSystem es;
    es.kind = spec.kind;
    es.K = K;
    const int n = grid.steps();
    for (int k = 1; k <= K; ++k) {
        const double freq = spec.kind == ProcessKind::bm ? (k - 0.5) * std::numbers::pi
                                                         : k * std::numbers::pi;
        es.lambdas.push_back(1.0 / (freq * freq));
        std::vector<double> mode(n + 1);
        for (int i = 0; i <= n; ++i) mode[i] = std::numbers::sqrt2 * std::sin(freq * grid.t(i));
        es.modes.push_back(std::move(mode));
    }
    return es;
}

// Trapezoid rule for the L2(0,1) inner product of two node vectors.
inline double trapezoid_inner(std::span<const double> a, std::span<const double> b) {
    const std::size_t n = a.size() - 1;
    double s = 0.5 * (a[0] * b[0] + a[n] * b[n]);
    for (std::size_t i = 1; i < n; ++i) s += a[i] * b[i];
    return s / static_cast<double>(n);
}

// Ito sum of h against the driving increments.
inline double white_noise_pairing(const PathSample& path, const CameronMartinVector& z) {
    double s = 0.0;
    for (std::size_t j = 0; j < z.h.size(); ++j) s += z.h[j] * path.driving[j];
    return s;
}

inline void check_direction(const ProcessSpec& spec, const CameronMartinVector& z) {
    if (spec.kind == ProcessKind::bridge && std::abs(z.end()) > kCameronMartinEndTolerance)
        throw DomainError("bridge directions need z(1) = 0; '" + z.label + "' ends at " +
                          std::to_string(z.end()));
}

inline double white_noise_pairing(const ProcessSpec& spec, const PathSample& path,
                                  const CameronMartinVector& z) {
    check_direction(spec, z);
    return white_noise_pairing(path, z);
}

// Coordinates x_k = <x, e_k> by trapezoid projection.
inline std::vector<double> spectral_coordinates(std::span<const double> values,
                                                const EigenSystem& es) {
    std::vector<double> x(es.K);
    for (int k = 0; k < es.K; ++k) x[k] = trapezoid_inner(values, es.modes[k]);
    return x;
}

inline double spectral_pairing(const PathSample& path, const CameronMartinVector& z,
                               const EigenSystem& es) {
    double s = 0.0;
    for (int k = 0; k < es.K; ++k) {
        const double xk = trapezoid_inner(path.values, es.modes[k]);
        const double zk = trapezoid_inner(z.z_values, es.modes[k]);
        s += xk * zk / es.lambdas[k];
    }
    if (!std::isfinite(s)) throw NumericError("spectral pairing is not finite");
    return s;
}

// Tangent of the path when the driving noise moves along z. Deterministic
// for every process except geometric, which scales by sigma X(t).
inline void path_tangent(const ProcessSpec& spec, const PathSample& path,
                         const CameronMartinVector& z, std::span<double> out) {
    const int n = z.steps();
    switch (spec.kind) {
        case ProcessKind::bm:
            for (int i = 0; i <= n; ++i) out[i] = z.z_values[i];
            break;
        case ProcessKind::distorted:
            for (int i = 0; i <= n; ++i) out[i] = spec.sigma * z.z_values[i];
            break;
        case ProcessKind::geometric:
            for (int i = 0; i <= n; ++i) out[i] = spec.sigma * path.values[i] * z.z_values[i];
            break;
        case ProcessKind::bridge: {
            const double end = z.end();
            for (int i = 0; i <= n; ++i) out[i] = z.z_values[i] - (static_cast<double>(i) / n) * end;
            break;
        }
        case ProcessKind::ou: {
            const double decay = std::exp(-spec.a / n);
            const double c = detail::ou_noise_scale(spec.a, n);
            out[0] = 0.0;
            for (int i = 0; i < n; ++i) out[i + 1] = decay * out[i] + c * z.h[i] / n;
            break;
        }
    }
}

inline std::vector<double> path_tangent(const ProcessSpec& spec, const PathSample& path,
                                        const CameronMartinVector& z) {
    std::vector<double> out(z.z_values.size());
    path_tangent(spec, path, z, out);
    return out;
}

// Three smooth directions; bridge directions vanish at t = 1.
inline std::vector<CameronMartinVector> standard_direction_suite(const ProcessSpec& spec,
                                                                 const TimeGrid& grid) {
    using std::numbers::pi;
    std::vector<CameronMartinVector> out;
    if (spec.kind == ProcessKind::bridge) {
        out.push_back(CameronMartinVector::from_function(grid, [](double t) { return std::sin(pi * t); }, "sin(pi t)"));
        out.push_back(CameronMartinVector::from_function(grid, [](double t) { return t * (1 - t); }, "t(1-t)"));
        out.push_back(CameronMartinVector::from_function(grid, [](double t) { return 0.5 * std::sin(2 * pi * t); }, "sin(2pi t)/2"));
    } else {
        out.push_back(CameronMartinVector::from_function(grid, [](double t) { return t; }, "t"));
        out.push_back(CameronMartinVector::from_function(grid, [](double t) { return t * (1 - t); }, "t(1-t)"));
        out.push_back(CameronMartinVector::from_function(grid, [](double t) { return std::sin(0.5 * pi * t); }, "sin(pi t/2)"));
    }
    // Remove the telescoping roundoff in the bridge end values (h has mean z(1)).
    if (spec.kind == ProcessKind::bridge)
        for (auto& z : out) {
            double drift = z.end();
            for (auto& hj : z.h) hj -= drift;
            z = CameronMartinVector::from_derivative(std::move(z.h), std::move(z.label));
        }
    return out;
}

}  // namespace gsurf
