#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "gsurf/errors.hpp"

namespace gsurf {

struct MCEstimate {
    double mean = 0.0;
    double se = 0.0;
    std::int64_t n = 0;
    std::uint64_t seed = 0;
    bool degenerate = false;
};

// Pairwise summation in index order; the result depends only on the data.
inline double pairwise_sum(std::span<const double> x) {
    if (x.size() <= 64) {
        double s = 0.0;
        for (double v : x) s += v;
        return s;
    }
    const std::size_t half = x.size() / 2;
    return pairwise_sum(x.first(half)) + pairwise_sum(x.subspan(half));
}

inline MCEstimate mean_se(std::span<const double> x, std::uint64_t seed = 0) {
    MCEstimate e;
    e.n = static_cast<std::int64_t>(x.size());
    e.seed = seed;
    if (x.empty()) {
        e.degenerate = true;
        e.se = std::numeric_limits<double>::infinity();
        return e;
    }
    const double n = static_cast<double>(x.size());
    e.mean = pairwise_sum(x) / n;
    if (x.size() < 2) {
        e.se = std::numeric_limits<double>::infinity();
        return e;
    }
    std::vector<double> sq(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - e.mean;
        sq[i] = d * d;
    }
    e.se = std::sqrt(pairwise_sum(sq) / (n - 1.0) / n);
    return e;
}

inline double combined_se(double a, double b) { return std::sqrt(a * a + b * b); }

// |a - b| / combined se; zero when both sides agree exactly.
inline double z_score(double a, double sa, double b, double sb) {
    const double d = std::abs(a - b);
    if (d == 0.0) return 0.0;
    const double s = combined_se(sa, sb);
    if (!(s > 0.0) || !std::isfinite(s)) return s > 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return d / s;
}

inline double z_score(const MCEstimate& a, const MCEstimate& b) {
    return z_score(a.mean, a.se, b.mean, b.se);
}

// Weights c with intercept = sum c_k y_k for the least-squares line through
// (x_k, y_k).
inline std::vector<double> intercept_weights(std::span<const double> x) {
    if (x.size() < 2) throw ParameterError("a linear fit needs at least two points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0;
    for (double v : x) mx += v;
    mx /= n;
    double sxx = 0.0;
    for (double v : x) sxx += (v - mx) * (v - mx);
    if (!(sxx > 0.0)) throw ParameterError("a linear fit needs distinct abscissae");
    std::vector<double> c(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) c[k] = 1.0 / n - mx * (x[k] - mx) / sxx;
    return c;
}

// Weights d with slope = sum d_k y_k.
inline std::vector<double> slope_weights(std::span<const double> x) {
    const double n = static_cast<double>(x.size());
    double mx = 0.0;
    for (double v : x) mx += v;
    mx /= n;
    double sxx = 0.0;
    for (double v : x) sxx += (v - mx) * (v - mx);
    if (!(sxx > 0.0)) throw ParameterError("a linear fit needs distinct abscissae");
    std::vector<double> d(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) d[k] = (x[k] - mx) / sxx;
    return d;
}

// Delete-one-group jackknife standard error from leave-one-out replicates.
inline double jackknife_se(std::span<const double> loo) {
    const double B = static_cast<double>(loo.size());
    if (loo.size() < 2) return std::numeric_limits<double>::infinity();
    double m = 0.0;
    for (double v : loo) m += v;
    m /= B;
    double ss = 0.0;
    for (double v : loo) ss += (v - m) * (v - m);
    return std::sqrt((B - 1.0) / B * ss);
}

// Kolmogorov-Smirnov distance between the empirical law of `sample` and
// the continuous CDF `cdf`. Sorts `sample` in place.
template <class Cdf>
double ks_statistic(std::vector<double>& sample, Cdf&& cdf) {
    std::sort(sample.begin(), sample.end());
    const double n = static_cast<double>(sample.size());
    double d = 0.0;
    for (std::size_t i = 0; i < sample.size(); ++i) {
        const double F = cdf(sample[i]);
        d = std::max({d, (i + 1) / n - F, F - i / n});
    }
    return d;
}

}  // namespace gsurf
