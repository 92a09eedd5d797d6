#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "gsurf/errors.hpp"

namespace gsurf {

struct QuadratureResult {
    double value = 0.0;
    double error = 0.0;
};

// Adaptive 61-point Gauss-Kronrod on finite limits. The integrand is mapped
// onto [-1, 1] first: the library compares its unscaled error estimate with
// a scaled tolerance, which never converges on short intervals.
template <class F>
QuadratureResult integrate(F&& f, double lo, double hi, double rel_tol = 1e-13,
                           unsigned max_depth = 20) {
    if (!std::isfinite(lo) || !std::isfinite(hi)) throw ParameterError("quadrature limits must be finite");
    if (lo == hi) return {};
    const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
    double err = 0.0;
    const double v = half * boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
                                [&](double u) { return f(mid + half * u); }, -1.0, 1.0, max_depth, rel_tol, &err);
    if (!std::isfinite(v)) throw NumericError("quadrature produced a non-finite value");
    return {v, std::abs(half) * err};
}

// Nodes and weights of the N-point Chebyshev rule for integrals over (0,1):
// integral f ~ sum w_k f(s_k) with s_k = (1 - cos((2k-1)pi/(2N)))/2 and
// w_k = (pi/N) sqrt(s_k(1-s_k)). Endpoints are never sampled.
struct ChebyshevRule {
    std::vector<double> nodes;
    std::vector<double> weights;
};

inline ChebyshevRule chebyshev_rule(int N) {
    if (N < 1) throw ParameterError("Chebyshev rule needs at least one node");
    ChebyshevRule rule;
    for (int k = 1; k <= N; ++k) {
        const double s = 0.5 * (1.0 - std::cos((2.0 * k - 1.0) * std::numbers::pi / (2.0 * N)));
        rule.nodes.push_back(s);
        rule.weights.push_back(std::numbers::pi / N * std::sqrt(s * (1.0 - s)));
    }
    return rule;
}

}  // namespace gsurf
