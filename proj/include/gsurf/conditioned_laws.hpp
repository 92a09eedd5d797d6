#pragma once

// Exact samplers for the Brownian meander and the 3-D Bessel bridge, the
// rejection estimator of E[phi | g >= r], and exponential-tilt reweighting.

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include <boost/random/normal_distribution.hpp>

#include "gsurf/batch.hpp"
#include "gsurf/errors.hpp"
#include "gsurf/functionals.hpp"
#include "gsurf/path_engine.hpp"
#include "gsurf/rng.hpp"
#include "gsurf/stats.hpp"

namespace gsurf {

inline constexpr std::size_t kMaxRejectionAttempts = 1000000;
inline constexpr double kMinAcceptance = 1e-4;

enum class LawTag { meander, bessel3_bridge, nu_r, girsanov };

namespace detail {

// Three independent standard Brownian bridges on the grid, interleaved
// per node: out[3*i + d].
inline void three_bridges(Xoshiro256pp& eng, int n, std::vector<double>& out) {
    boost::random::normal_distribution<double> normal;
    const double scale = std::sqrt(1.0 / n);
    out.assign(3 * (n + 1), 0.0);
    for (int i = 0; i < n; ++i)
        for (int d = 0; d < 3; ++d) out[3 * (i + 1) + d] = out[3 * i + d] + scale * normal(eng);
    double end[3] = {out[3 * n], out[3 * n + 1], out[3 * n + 2]};
    for (int i = 0; i <= n; ++i) {
        const double t = static_cast<double>(i) / n;
        for (int d = 0; d < 3; ++d) out[3 * i + d] -= t * end[d];
    }
    for (int d = 0; d < 3; ++d) out[3 * n + d] = 0.0;
}

inline void increments_as_driving(PathSample& p) {
    const int n = p.grid.steps();
    p.driving.resize(n);
    for (int i = 0; i < n; ++i) p.driving[i] = p.values[i + 1] - p.values[i];
}

}  // namespace detail

// Meander: Rayleigh endpoint rho, then the norm of a 3-D Brownian bridge
// from 0 to (rho, 0, 0). `driving` holds the path's own increments.
inline void sample_meander_into(PathSample& p) {
    const int n = p.grid.steps();
    Xoshiro256pp eng(p.seed_tag);
    const double rho = std::sqrt(-2.0 * std::log1p(-eng.uniform()));
    thread_local std::vector<double> br;
    detail::three_bridges(eng, n, br);
    p.values.resize(n + 1);
    for (int i = 0; i <= n; ++i) {
        const double t = static_cast<double>(i) / n;
        const double x = br[3 * i] + t * rho;
        const double y = br[3 * i + 1];
        const double z = br[3 * i + 2];
        p.values[i] = std::sqrt(x * x + y * y + z * z);
    }
    p.values[0] = 0.0;
    detail::increments_as_driving(p);
}

inline PathSample sample_meander(const TimeGrid& grid, std::uint64_t seed_tag) {
    PathSample p{grid, {}, {}, seed_tag};
    sample_meander_into(p);
    return p;
}

inline void sample_bessel3_bridge_into(PathSample& p) {
    const int n = p.grid.steps();
    Xoshiro256pp eng(p.seed_tag);
    thread_local std::vector<double> br;
    detail::three_bridges(eng, n, br);
    p.values.resize(n + 1);
    for (int i = 0; i <= n; ++i) {
        const double x = br[3 * i], y = br[3 * i + 1], z = br[3 * i + 2];
        p.values[i] = std::sqrt(x * x + y * y + z * z);
    }
    p.values[0] = 0.0;
    p.values[n] = 0.0;
    detail::increments_as_driving(p);
}

inline PathSample sample_bessel3_bridge(const TimeGrid& grid, std::uint64_t seed_tag) {
    PathSample p{grid, {}, {}, seed_tag};
    sample_bessel3_bridge_into(p);
    return p;
}

struct ConditionedEstimate {
    MCEstimate mean;
    MCEstimate acceptance;  // Bernoulli mean of {g >= r} over attempts
    std::int64_t accepted = 0;
    std::int64_t attempts = 0;
};

// E[phi_p | g >= r_l] by rejection for every level and functional, from one
// batch of `attempts` independent paths. Result is indexed [level][functional].
inline std::vector<std::vector<ConditionedEstimate>> conditioned_means(
    std::span<const CylindricalFunctional> phis, const ProcessSpec& spec, std::span<const double> rs,
    std::size_t attempts, const TimeGrid& grid, std::uint64_t seed) {
    for (double r : rs)
        if (!(r < 0.0)) throw PreconditionError("conditioning level r must be < 0");
    if (attempts == 0 || attempts > kMaxRejectionAttempts)
        throw ParameterError("rejection attempts must lie in [1, 1e6]");
    spec.validate();
    const bool refine = spec.kind != ProcessKind::ou;
    const std::size_t P = phis.size();
    auto tab = map_rows(attempts, 1 + P, [&] {
        return [&, path = PathSample{grid, {}, {}, 0}](std::size_t i, std::span<double> row) mutable {
            path.seed_tag = derive_tag(seed, streams::kRejection, i);
            simulate_into(spec, path);
            row[0] = extremum(spec, path, ExtremumKind::min, refine).value;
            for (std::size_t p = 0; p < P; ++p) row[1 + p] = phis[p](path.values);
        };
    });
    std::vector<std::vector<ConditionedEstimate>> out;
    for (double r : rs) {
        std::vector<double> acc(attempts);
        for (std::size_t i = 0; i < attempts; ++i) acc[i] = tab.at(i, 0) >= r ? 1.0 : 0.0;
        ConditionedEstimate base;
        base.attempts = static_cast<std::int64_t>(attempts);
        base.acceptance = mean_se(acc, seed);
        if (base.acceptance.mean < kMinAcceptance)
            throw InfeasibleConditioningError("acceptance rate " + std::to_string(base.acceptance.mean) +
                                              " below 1e-4 at r = " + std::to_string(r));
        std::vector<ConditionedEstimate> row;
        for (std::size_t p = 0; p < P; ++p) {
            std::vector<double> vals;
            for (std::size_t i = 0; i < attempts; ++i)
                if (acc[i] > 0.0) vals.push_back(tab.at(i, 1 + p));
            ConditionedEstimate e = base;
            e.accepted = static_cast<std::int64_t>(vals.size());
            e.mean = mean_se(vals, seed);
            row.push_back(std::move(e));
        }
        out.push_back(std::move(row));
    }
    return out;
}

inline ConditionedEstimate conditioned_mean(const CylindricalFunctional& phi, const ProcessSpec& spec,
                                            double r, std::size_t attempts, const TimeGrid& grid,
                                            std::uint64_t seed) {
    const CylindricalFunctional fs[] = {phi};
    const double rs[] = {r};
    return conditioned_means(fs, spec, rs, attempts, grid, seed)[0][0];
}

// Means of phi_p over exact meander or Bessel-bridge samples.
inline std::vector<MCEstimate> sampler_means(LawTag law, std::span<const CylindricalFunctional> phis,
                                             const TimeGrid& grid, std::uint64_t seed, std::size_t n_paths) {
    if (law != LawTag::meander && law != LawTag::bessel3_bridge)
        throw UnsupportedError("exact samplers exist only for the meander and the Bessel bridge");
    const std::size_t P = phis.size();
    const std::uint64_t stream = law == LawTag::meander ? streams::kMeander : streams::kBessel;
    auto tab = map_rows(n_paths, P, [&] {
        return [&, path = PathSample{grid, {}, {}, 0}](std::size_t i, std::span<double> row) mutable {
            path.seed_tag = derive_tag(seed, stream, i);
            if (law == LawTag::meander)
                sample_meander_into(path);
            else
                sample_bessel3_bridge_into(path);
            for (std::size_t p = 0; p < P; ++p) row[p] = phis[p](path.values);
        };
    });
    std::vector<MCEstimate> out;
    for (std::size_t p = 0; p < P; ++p) out.push_back(mean_se(tab.column(p), seed));
    return out;
}

// Self-normalized ratio sum(w y)/sum(w) with delta-method standard error.
inline MCEstimate weighted_ratio(std::span<const double> w, std::span<const double> y, std::uint64_t seed = 0) {
    const std::size_t n = w.size();
    std::vector<double> wy(n);
    for (std::size_t i = 0; i < n; ++i) wy[i] = w[i] * y[i];
    const double sw = pairwise_sum(w);
    const double R = pairwise_sum(wy) / sw;
    std::vector<double> e2(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double e = w[i] * (y[i] - R);
        e2[i] = e * e;
    }
    const double mw = sw / static_cast<double>(n);
    MCEstimate out;
    out.mean = R;
    out.n = static_cast<std::int64_t>(n);
    out.seed = seed;
    out.se = n > 1 ? std::sqrt(pairwise_sum(e2) / (static_cast<double>(n) * (n - 1.0))) / mw
                   : std::numeric_limits<double>::infinity();
    return out;
}

inline void check_tilt(double b, double sigma) {
    if (!(sigma > 0.0)) throw ParameterError("sigma must be > 0");
    if (!(std::abs(b / sigma) <= 20.0))
        throw NumericError("tilt |b/sigma| = " + std::to_string(std::abs(b / sigma)) +
                           " overflows the importance weights");
}

// E[phi(b t + sigma B)] computed on Brownian paths Y with X = sigma Y and
// weights exp((b/sigma) Y(1) - b^2/(2 sigma^2)).
inline MCEstimate girsanov_reweight(const CylindricalFunctional& phi, double b, double sigma,
                                    std::size_t n_paths, const TimeGrid& grid, std::uint64_t seed) {
    check_tilt(b, sigma);
    const double k = b / sigma;
    const ProcessSpec bm = ProcessSpec::brownian();
    auto tab = map_rows(n_paths, 2, [&] {
        return [&, path = PathSample{grid, {}, {}, 0}, x = std::vector<double>()](std::size_t i, std::span<double> row) mutable {
            path.seed_tag = derive_tag(seed, streams::kGirsanov, i);
            simulate_into(bm, path);
            x.resize(path.values.size());
            for (std::size_t j = 0; j < x.size(); ++j) x[j] = sigma * path.values[j];
            row[0] = std::exp(k * path.values.back() - 0.5 * k * k);
            row[1] = phi(x);
            if (!std::isfinite(row[0])) throw NumericError("importance weight overflow");
        };
    });
    return weighted_ratio(tab.column(0), tab.column(1), seed);
}

// Plain mean of exp((b/sigma) B(1) - b^2/(2 sigma^2)) on Brownian paths.
inline MCEstimate tilt_moment(double b, double sigma, std::size_t n_paths, const TimeGrid& grid,
                              std::uint64_t seed) {
    check_tilt(b, sigma);
    const double k = b / sigma;
    const ProcessSpec bm = ProcessSpec::brownian();
    auto tab = map_rows(n_paths, 1, [&] {
        return [&, path = PathSample{grid, {}, {}, 0}](std::size_t i, std::span<double> row) mutable {
            path.seed_tag = derive_tag(seed, streams::kGirsanov, i);
            simulate_into(bm, path);
            row[0] = std::exp(k * path.values.back() - 0.5 * k * k);
        };
    });
    return mean_se(tab.column(0), seed);
}

}  // namespace gsurf
