#pragma once

// Nadaraya-Watson regression on per-path samples with Gaussian kernels and
// delete-one-block jackknife errors. Blocks are contiguous in path index.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "gsurf/errors.hpp"
#include "gsurf/stats.hpp"

namespace gsurf {

inline constexpr int kJackknifeBlocks = 20;
inline constexpr double kMinEffectiveSample = 50.0;
inline constexpr double kKernelReach = 6.0;  // window half-width in bandwidths

struct RegressionEstimate {
    double value = 0.0;
    double se = std::numeric_limits<double>::infinity();
    double ess = 0.0;
    bool degenerate = true;
    std::vector<double> loo;  // leave-one-block-out replicates

    MCEstimate as_estimate(std::int64_t n = 0, std::uint64_t seed = 0) const {
        return {value, se, n, seed, degenerate};
    }
};

// Sample indices sorted by the conditioning variable.
class SortedAxis {
public:
    explicit SortedAxis(std::span<const double> g) : n_(g.size()), order_(g.size()), sorted_(g.size()) {
        std::iota(order_.begin(), order_.end(), std::size_t{0});
        std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) { return g[a] < g[b]; });
        for (std::size_t k = 0; k < order_.size(); ++k) sorted_[k] = g[order_[k]];
    }

    std::size_t size() const noexcept { return n_; }
    std::size_t index(std::size_t k) const noexcept { return order_[k]; }
    double value(std::size_t k) const noexcept { return sorted_[k]; }

    std::pair<std::size_t, std::size_t> window(double lo, double hi) const {
        const auto a = std::lower_bound(sorted_.begin(), sorted_.end(), lo) - sorted_.begin();
        const auto b = std::upper_bound(sorted_.begin(), sorted_.end(), hi) - sorted_.begin();
        return {static_cast<std::size_t>(a), static_cast<std::size_t>(b)};
    }

private:
    std::size_t n_;
    std::vector<std::size_t> order_;
    std::vector<double> sorted_;
};

// Per-block kernel sums for one query point and several responses.
struct BlockSums {
    int blocks = kJackknifeBlocks;
    std::vector<double> w, w2;
    std::vector<std::vector<double>> wy;  // [response][block]

    BlockSums(int B, std::size_t responses)
        : blocks(B), w(B, 0.0), w2(B, 0.0), wy(responses, std::vector<double>(B, 0.0)) {}

    RegressionEstimate ratio(std::size_t k) const {
        RegressionEstimate e;
        const double W = std::accumulate(w.begin(), w.end(), 0.0);
        const double W2 = std::accumulate(w2.begin(), w2.end(), 0.0);
        const double WY = std::accumulate(wy[k].begin(), wy[k].end(), 0.0);
        e.ess = W2 > 0.0 ? W * W / W2 : 0.0;
        if (!(W > 0.0)) return e;
        e.value = WY / W;
        e.loo.resize(blocks);
        bool ok = true;
        for (int b = 0; b < blocks; ++b) {
            const double wb = W - w[b];
            if (!(wb > 0.0)) {
                ok = false;
                e.loo[b] = e.value;
            } else {
                e.loo[b] = (WY - wy[k][b]) / wb;
            }
        }
        e.se = ok ? jackknife_se(e.loo) : std::numeric_limits<double>::infinity();
        e.degenerate = e.ess < kMinEffectiveSample || !ok;
        return e;
    }
};

inline int block_of(std::size_t i, std::size_t n, int B) {
    return static_cast<int>(i * static_cast<std::size_t>(B) / n);
}

// Kernel sums at g = r. `responses[k][i]` is the response of path i.
inline BlockSums kernel_sums(const SortedAxis& axis, std::span<const std::span<const double>> responses,
                             double r, double h, int B = kJackknifeBlocks) {
    if (!(h > 0.0)) throw ParameterError("kernel bandwidth must be > 0");
    BlockSums s(B, responses.size());
    const auto [lo, hi] = axis.window(r - kKernelReach * h, r + kKernelReach * h);
    const std::size_t n = axis.size();
    for (std::size_t k = lo; k < hi; ++k) {
        const double u = (axis.value(k) - r) / h;
        const double wt = std::exp(-0.5 * u * u);
        const std::size_t i = axis.index(k);
        const int b = block_of(i, n, B);
        s.w[b] += wt;
        s.w2[b] += wt * wt;
        for (std::size_t q = 0; q < responses.size(); ++q) s.wy[q][b] += wt * responses[q][i];
    }
    return s;
}

// Product kernel in (g, theta) at (r, theta0).
inline BlockSums kernel_sums_2d(const SortedAxis& axis, std::span<const double> theta,
                                std::span<const std::span<const double>> responses, double r, double hg,
                                double theta0, double ht, int B = kJackknifeBlocks) {
    if (!(hg > 0.0) || !(ht > 0.0)) throw ParameterError("kernel bandwidths must be > 0");
    BlockSums s(B, responses.size());
    const auto [lo, hi] = axis.window(r - kKernelReach * hg, r + kKernelReach * hg);
    const std::size_t n = axis.size();
    for (std::size_t k = lo; k < hi; ++k) {
        const std::size_t i = axis.index(k);
        const double v = (theta[i] - theta0) / ht;
        if (std::abs(v) > kKernelReach) continue;
        const double u = (axis.value(k) - r) / hg;
        const double wt = std::exp(-0.5 * (u * u + v * v));
        const int b = block_of(i, n, B);
        s.w[b] += wt;
        s.w2[b] += wt * wt;
        for (std::size_t q = 0; q < responses.size(); ++q) s.wy[q][b] += wt * responses[q][i];
    }
    return s;
}

inline RegressionEstimate nadaraya_watson(const SortedAxis& axis, std::span<const double> y, double r,
                                          double h, int B = kJackknifeBlocks) {
    const std::span<const double> one[] = {y};
    return kernel_sums(axis, one, r, h, B).ratio(0);
}

// Linear combination of regression estimates sharing the block layout;
// replicates combine the same way so the jackknife covers the sum.
inline RegressionEstimate combine(std::span<const double> coeffs, std::span<const RegressionEstimate> parts) {
    RegressionEstimate out;
    out.degenerate = false;
    out.ess = std::numeric_limits<double>::infinity();
    std::size_t B = 0;
    for (const auto& p : parts) B = std::max(B, p.loo.size());
    out.loo.assign(B, 0.0);
    bool ok = B > 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const auto& p = parts[k];
        out.value += coeffs[k] * p.value;
        out.degenerate = out.degenerate || p.degenerate;
        out.ess = std::min(out.ess, p.ess);
        if (p.loo.size() != B) {
            ok = false;
            continue;
        }
        for (std::size_t b = 0; b < B; ++b) out.loo[b] += coeffs[k] * p.loo[b];
    }
    out.se = ok ? jackknife_se(out.loo) : std::numeric_limits<double>::infinity();
    return out;
}

inline RegressionEstimate scale(const RegressionEstimate& e, double c) {
    RegressionEstimate out = e;
    out.value *= c;
    for (auto& v : out.loo) v *= c;
    out.se = std::abs(c) * e.se;
    return out;
}

// 1.06 sd n^{-1/5}, halved.
inline double default_bandwidth(std::span<const double> x) {
    const auto m = mean_se(x);
    const double n = static_cast<double>(x.size());
    const double sd = m.se * std::sqrt(n);
    return 0.5 * 1.06 * sd * std::pow(n, -0.2);
}

// Angle coordinate for the argmin time; flattens the arcsine-type edges.
inline double tau_angle(double tau) { return std::acos(std::clamp(1.0 - 2.0 * tau, -1.0, 1.0)); }

}  // namespace gsurf
