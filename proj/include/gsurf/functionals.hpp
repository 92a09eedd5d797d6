#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "gsurf/errors.hpp"
#include "gsurf/path_engine.hpp"

namespace gsurf {

inline constexpr std::size_t kMaxCylinderTimes = 8;

// phi(x) = f(x(t_1), ..., x(t_k)); points between nodes are interpolated.
struct CylindricalFunctional {
    using Coords = std::span<const double>;

    std::string name;
    std::vector<double> times;
    std::function<double(Coords)> f;
    std::function<void(Coords, std::span<double>)> grad;
    double sup_bound = std::numeric_limits<double>::infinity();

    std::size_t arity() const noexcept { return times.size(); }

    void coords(std::span<const double> values, std::span<double> out) const {
        for (std::size_t k = 0; k < times.size(); ++k) out[k] = interpolate_nodes(values, times[k]);
    }

    double operator()(std::span<const double> values) const {
        std::array<double, kMaxCylinderTimes> x{};
        coords(values, x);
        return f(std::span<const double>(x.data(), times.size()));
    }

    // sum_k df/dx_k * tangent(t_k)
    double directional(std::span<const double> values, std::span<const double> tangent) const {
        std::array<double, kMaxCylinderTimes> x{}, g{};
        coords(values, x);
        grad(std::span<const double>(x.data(), times.size()), std::span<double>(g.data(), times.size()));
        double s = 0.0;
        for (std::size_t k = 0; k < times.size(); ++k) s += g[k] * interpolate_nodes(tangent, times[k]);
        return s;
    }

    // Value and directional derivative together (one gradient evaluation).
    std::pair<double, double> value_and_directional(std::span<const double> values,
                                                    std::span<const double> tangent) const {
        std::array<double, kMaxCylinderTimes> x{}, g{};
        coords(values, x);
        const std::span<const double> xs(x.data(), times.size());
        grad(xs, std::span<double>(g.data(), times.size()));
        double s = 0.0;
        for (std::size_t k = 0; k < times.size(); ++k) s += g[k] * interpolate_nodes(tangent, times[k]);
        return {f(xs), s};
    }

    void validate() const {
        if (times.size() > kMaxCylinderTimes)
            throw ParameterError("cylindrical functional '" + name + "' uses too many times");
        for (std::size_t k = 0; k < times.size(); ++k) {
            if (!(times[k] >= 0.0 && times[k] <= 1.0))
                throw ParameterError("cylinder times must lie in [0,1]");
            if (k > 0 && !(times[k] > times[k - 1]))
                throw ParameterError("cylinder times must be strictly increasing");
        }
        if (!f || !grad) throw ParameterError("cylindrical functional '" + name + "' is incomplete");
    }
};

namespace functionals {

inline CylindricalFunctional constant(double c) {
    return {"const(" + std::to_string(c) + ")", {},
            [c](CylindricalFunctional::Coords) { return c; },
            [](CylindricalFunctional::Coords, std::span<double>) {}, std::abs(c)};
}

inline CylindricalFunctional one() {
    auto f = constant(1.0);
    f.name = "1";
    return f;
}

// x(t), unbounded.
inline CylindricalFunctional point(double t) {
    return {"x(" + std::to_string(t) + ")", {t},
            [](CylindricalFunctional::Coords x) { return x[0]; },
            [](CylindricalFunctional::Coords, std::span<double> g) { g[0] = 1.0; },
            std::numeric_limits<double>::infinity()};
}

inline CylindricalFunctional cos_point(double t) {
    return {"cos(x(" + std::to_string(t) + "))", {t},
            [](CylindricalFunctional::Coords x) { return std::cos(x[0]); },
            [](CylindricalFunctional::Coords x, std::span<double> g) { g[0] = -std::sin(x[0]); },
            1.0};
}

inline CylindricalFunctional atan_point(double t) {
    return {"atan(x(" + std::to_string(t) + "))", {t},
            [](CylindricalFunctional::Coords x) { return std::atan(x[0]); },
            [](CylindricalFunctional::Coords x, std::span<double> g) { g[0] = 1.0 / (1.0 + x[0] * x[0]); },
            1.5707963267948966};
}

inline CylindricalFunctional sin_sum(double t1, double t2) {
    return {"sin(x(" + std::to_string(t1) + ")+x(" + std::to_string(t2) + "))", {t1, t2},
            [](CylindricalFunctional::Coords x) { return std::sin(x[0] + x[1]); },
            [](CylindricalFunctional::Coords x, std::span<double> g) {
                g[0] = g[1] = std::cos(x[0] + x[1]);
            },
            1.0};
}

inline CylindricalFunctional gauss_pair(double t1, double t2) {
    return {"exp(-(x(" + std::to_string(t1) + ")^2+x(" + std::to_string(t2) + ")^2)/2)", {t1, t2},
            [](CylindricalFunctional::Coords x) {
                return std::exp(-0.5 * (x[0] * x[0] + x[1] * x[1]));
            },
            [](CylindricalFunctional::Coords x, std::span<double> g) {
                const double e = std::exp(-0.5 * (x[0] * x[0] + x[1] * x[1]));
                g[0] = -x[0] * e;
                g[1] = -x[1] * e;
            },
            1.0};
}

// Five bounded test functionals used by suite-level checks.
inline std::vector<CylindricalFunctional> standard_suite() {
    return {one(), cos_point(0.5), atan_point(1.0), sin_sum(0.25, 0.75), gauss_pair(0.5, 1.0)};
}

inline CylindricalFunctional by_name(const std::string& name) {
    if (name == "1" || name == "one") return one();
    if (name == "x1") return point(1.0);
    if (name == "xhalf") return point(0.5);
    if (name == "cos_half") return cos_point(0.5);
    if (name == "atan_end") return atan_point(1.0);
    if (name == "sin_sum") return sin_sum(0.25, 0.75);
    if (name == "gauss_pair") return gauss_pair(0.5, 1.0);
    throw ConfigError("unknown test functional '" + name +
                      "' (known: one, x1, xhalf, cos_half, atan_end, sin_sum, gauss_pair)");
}

}  // namespace functionals

}  // namespace gsurf
