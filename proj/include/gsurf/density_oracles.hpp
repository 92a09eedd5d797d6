#pragma once

// Closed-form laws of g = min X on [0,1] and of (g, argmin).

#include <cmath>
#include <numbers>
#include <string>

#include "gsurf/errors.hpp"
#include "gsurf/process.hpp"
#include "gsurf/quadrature.hpp"
#include "gsurf/special.hpp"

namespace gsurf {

struct LawQuery {
    ProcessSpec process;
    double r = 0.0;
    double s = 0.5;
};

namespace detail {

inline void require_level(double r) {
    if (!(r <= 0.0)) throw DomainError("level r must be <= 0, got " + std::to_string(r));
}

inline void require_time(double s) {
    if (!(s > 0.0 && s < 1.0)) throw DomainError("argmin time s must lie in (0,1)");
}

}  // namespace detail

// Formula tags recorded next to every oracle value in reports.
inline std::string density_tag(const ProcessSpec& p) {
    switch (p.kind) {
        case ProcessKind::bm: return "bm-min-density:2/sqrt(2pi)exp(-r^2/2)";
        case ProcessKind::bridge: return "bridge-min-density:4|r|exp(-2r^2)";
        case ProcessKind::distorted:
            return "distorted-min-density:sqrt2/(sigma sqrtpi)exp(-(r-b)^2/2sigma^2)+(b/sigma^2)exp(2br/sigma^2)Erfc(-(r+b)/(sigma sqrt2))";
        case ProcessKind::ou: return "ou-min-density:(2/sqrtpi)sqrt(a/(e^{2a}-1))exp(-ar^2/(e^{2a}-1))";
        case ProcessKind::geometric: break;
    }
    return "unsupported";
}

inline std::string joint_density_tag(const ProcessSpec& p) {
    switch (p.kind) {
        case ProcessKind::bm: return "bm-joint-density:|r|/sqrt(pi^2 s^3(1-s))exp(-r^2/2s)";
        case ProcessKind::bridge: return "bridge-joint-density:sqrt(2/pi)r^2/sqrt(s^3(1-s)^3)exp(-r^2/(2s(1-s)))";
        case ProcessKind::distorted: return "distorted-joint-density:|r|/(sqrt(pi sigma^2)s^1.5)exp(-(|r|+bs)^2/(2sigma^2 s))(...)";
        default: break;
    }
    return "unsupported";
}

inline double min_density(const ProcessSpec& p, double r) {
    detail::require_level(r);
    using std::numbers::pi;
    switch (p.kind) {
        case ProcessKind::bm: return 2.0 / std::sqrt(2.0 * pi) * std::exp(-0.5 * r * r);
        case ProcessKind::bridge: return 4.0 * std::abs(r) * std::exp(-2.0 * r * r);
        case ProcessKind::distorted: {
            const double s2 = p.sigma * p.sigma;
            const double d = r - p.b;
            return std::numbers::sqrt2 / (p.sigma * std::sqrt(pi)) * std::exp(-d * d / (2.0 * s2)) +
                   p.b / s2 * std::exp(2.0 * p.b * r / s2) *
                       erfc(-(r + p.b) / (p.sigma * std::numbers::sqrt2));
        }
        case ProcessKind::ou: {
            const double v = std::expm1(2.0 * p.a);
            return 2.0 / std::sqrt(pi) * std::sqrt(p.a / v) * std::exp(-p.a * r * r / v);
        }
        case ProcessKind::geometric: break;
    }
    throw UnsupportedError("no closed-form minimum density for the " + p.name() + " process");
}

inline double min_joint_density(const ProcessSpec& p, double r, double s) {
    detail::require_level(r);
    detail::require_time(s);
    using std::numbers::pi;
    switch (p.kind) {
        case ProcessKind::bm:
            return std::abs(r) / std::sqrt(pi * pi * s * s * s * (1.0 - s)) *
                   std::exp(-r * r / (2.0 * s));
        case ProcessKind::bridge: {
            const double q = s * (1.0 - s);
            return std::sqrt(2.0 / pi) * r * r / std::sqrt(q * q * q) * std::exp(-r * r / (2.0 * q));
        }
        case ProcessKind::distorted: {
            const double s2 = p.sigma * p.sigma;
            const double m = std::abs(r) + p.b * s;
            const double lead = std::abs(r) / (std::sqrt(pi * s2) * std::pow(s, 1.5)) *
                                std::exp(-m * m / (2.0 * s2 * s));
            const double tail =
                std::exp(-p.b * p.b / (2.0 * s2) * (1.0 - s)) / std::sqrt(pi * s2 * (1.0 - s)) +
                p.b / (std::numbers::sqrt2 * s2) *
                    erfc(-p.b * std::sqrt(1.0 - s) / std::sqrt(2.0 * s2));
            return lead * tail;
        }
        case ProcessKind::ou:
            throw UnsupportedError("no joint density of (min, argmin) is available for the ou process");
        case ProcessKind::geometric: break;
    }
    throw UnsupportedError("no closed-form joint density for the " + p.name() + " process");
}

// Level below which every supported density is negligible (12 standard
// deviations of the dominant Gaussian scale).
inline double density_floor(const ProcessSpec& p) {
    switch (p.kind) {
        case ProcessKind::bm: return -12.0;
        case ProcessKind::bridge: return -6.0;
        case ProcessKind::distorted: return -(std::abs(p.b) + 12.0 * p.sigma);
        case ProcessKind::ou: return -12.0 * std::sqrt(std::expm1(2.0 * p.a) / (2.0 * p.a));
        case ProcessKind::geometric: break;
    }
    throw UnsupportedError("no closed-form minimum density for the " + p.name() + " process");
}

// mu(g >= r) by adaptive quadrature of the density over [r, 0].
inline double survival(const ProcessSpec& p, double r) {
    detail::require_level(r);
    (void)min_density(p, 0.0);
    if (r == 0.0) return 0.0;
    const double lo = std::max(r, density_floor(p) * 1.5);
    return integrate([&](double x) { return min_density(p, x); }, lo, 0.0).value;
}

// mu(g <= r) = 1 - survival, computed directly to keep tail accuracy.
inline double min_cdf(const ProcessSpec& p, double r) {
    detail::require_level(r);
    const double lo = density_floor(p) * 1.5;
    if (r <= lo) return 0.0;
    return integrate([&](double x) { return min_density(p, x); }, lo, r).value;
}

struct LimitConstants {
    double b = 0.0;
    double sigma = 1.0;
    double C = 0.0;  // mu(g >= r) ~ C r as r -> 0-

    // Limit of joint/survival as r -> 0-. The closed-form prefactor carries 1/C
    // with C < 0; the sign is flipped so the weight is a positive density.
    double tilde_pi(double s) const {
        detail::require_time(s);
        using std::numbers::pi;
        const double s2 = sigma * sigma;
        const double inner =
            std::exp(-b * b / (2.0 * s2)) / std::sqrt(pi * s2 * (1.0 - s)) +
            b / (std::numbers::sqrt2 * s2) * std::exp(-b * b * s / (2.0 * s2)) *
                erfc(-b * std::sqrt(1.0 - s) / std::sqrt(2.0 * s2));
        return -inner / (C * std::sqrt(pi * s2) * std::pow(s, 1.5));
    }
};

inline LimitConstants limit_constants(const ProcessSpec& p) {
    if (p.kind != ProcessKind::distorted)
        throw UnsupportedError("limit constants are defined only for the distorted process");
    p.validate();
    using std::numbers::pi;
    const double s2 = p.sigma * p.sigma;
    LimitConstants lc;
    lc.b = p.b;
    lc.sigma = p.sigma;
    lc.C = p.b / s2 * (erfc(p.b / (p.sigma * std::numbers::sqrt2)) - 2.0) -
           std::numbers::sqrt2 / std::sqrt(pi * s2) * std::exp(-p.b * p.b / (2.0 * s2));
    return lc;
}

}  // namespace gsurf
