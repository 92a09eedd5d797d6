#pragma once

// Thin-shell estimators of rho_phi(r) = d/dr E[phi; g <= r], conditional
// expectations given the level (and the argmin time), and the Skorokhod
// representation of the level derivative for the running maximum.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "gsurf/batch.hpp"
#include "gsurf/errors.hpp"
#include "gsurf/functionals.hpp"
#include "gsurf/kernel_regression.hpp"
#include "gsurf/malliavin.hpp"
#include "gsurf/path_engine.hpp"
#include "gsurf/rng.hpp"
#include "gsurf/stats.hpp"

namespace gsurf {

struct ShellConfig {
    double r = -1.0;
    std::vector<double> eps_schedule{0.2, 0.1, 0.05, 0.025};
    std::size_t n_paths = 1000000;
    double bandwidth = 0.0;  // 0 selects the default rule

    void validate() const {
        if (!std::isfinite(r)) throw ConfigError("shell level r must be finite");
        if (eps_schedule.empty()) throw ConfigError("eps schedule is empty");
        for (std::size_t k = 0; k < eps_schedule.size(); ++k) {
            if (!(eps_schedule[k] > 0.0)) throw ConfigError("shell widths must be > 0");
            if (k > 0 && !(eps_schedule[k] < eps_schedule[k - 1]))
                throw ConfigError("shell widths must be strictly decreasing");
        }
        if (n_paths < 1000) throw ConfigError("shell estimators need at least 1000 paths");
        if (bandwidth < 0.0) throw ConfigError("bandwidth must be positive (or 0 for the default)");
    }
};

inline MCEstimate shell_estimate(std::span<const double> g, std::span<const double> phi, double r,
                                 double eps, std::uint64_t seed = 0) {
    if (!(eps > 0.0)) throw ParameterError("shell width must be > 0");
    std::vector<double> y(g.size());
    std::size_t hits = 0;
    const double scale = 1.0 / (2.0 * eps);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const bool in = std::abs(g[i] - r) <= eps;
        hits += in;
        y[i] = in ? phi[i] * scale : 0.0;
    }
    MCEstimate e = mean_se(y, seed);
    if (hits == 0) {
        e.mean = 0.0;
        e.se = std::numeric_limits<double>::infinity();
        e.degenerate = true;
    }
    return e;
}

// Intercept of the least-squares line of shell estimates against eps^2,
// formed per path so the standard error is exact.
inline MCEstimate density_estimate(std::span<const double> g, std::span<const double> phi, double r,
                                   std::span<const double> eps_schedule, std::uint64_t seed = 0) {
    ShellConfig probe;
    probe.r = r;
    probe.eps_schedule.assign(eps_schedule.begin(), eps_schedule.end());
    probe.n_paths = std::max<std::size_t>(g.size(), 1000);
    probe.validate();
    if (eps_schedule.size() == 1) return shell_estimate(g, phi, r, eps_schedule[0], seed);
    std::vector<double> e2(eps_schedule.size());
    for (std::size_t k = 0; k < e2.size(); ++k) e2[k] = eps_schedule[k] * eps_schedule[k];
    const auto c = intercept_weights(e2);
    std::vector<double> z(g.size(), 0.0);
    bool any_hit = false;
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double d = std::abs(g[i] - r);
        double acc = 0.0;
        for (std::size_t k = 0; k < e2.size(); ++k)
            if (d <= eps_schedule[k]) acc += c[k] / (2.0 * eps_schedule[k]);
        if (acc != 0.0) any_hit = true;
        z[i] = acc * phi[i];
    }
    MCEstimate e = mean_se(z, seed);
    if (!any_hit) {
        e.mean = 0.0;
        e.se = std::numeric_limits<double>::infinity();
        e.degenerate = true;
    }
    return e;
}

inline RegressionEstimate cond_exp_g(const SortedAxis& axis, std::span<const double> phi, double r,
                                     double bandwidth) {
    return nadaraya_watson(axis, phi, r, bandwidth);
}

inline RegressionEstimate cond_exp_g_tau(const SortedAxis& axis, std::span<const double> theta,
                                         std::span<const double> phi, double r, double s, double hg,
                                         double ht) {
    const std::span<const double> one[] = {phi};
    return kernel_sums_2d(axis, theta, one, r, hg, tau_angle(s), ht).ratio(0);
}

// Per-path level data: g, tau and phi values for a list of functionals.
struct LevelSample {
    std::vector<double> g, tau;
    FeatureTable phi;
};

inline bool refinement_supported(const ProcessSpec& spec) { return spec.kind != ProcessKind::ou; }

inline LevelSample sample_levels(const ProcessSpec& spec, const TimeGrid& grid, std::uint64_t seed,
                                 std::uint64_t stream, std::size_t n_paths,
                                 std::span<const CylindricalFunctional> phis,
                                 ExtremumKind kind = ExtremumKind::min) {
    spec.validate();
    const bool refine = refinement_supported(spec);
    const std::size_t P = phis.size();
    auto table = map_rows(n_paths, 2 + P, [&] {
        return [&, path = PathSample{grid, {}, {}, 0}](std::size_t i, std::span<double> row) mutable {
            path.seed_tag = derive_tag(seed, stream, i);
            simulate_into(spec, path);
            const auto rec = extremum(spec, path, kind, refine);
            row[0] = rec.value;
            row[1] = rec.tau;
            for (std::size_t p = 0; p < P; ++p) row[2 + p] = phis[p](path.values);
        };
    });
    LevelSample out;
    out.g = table.column(0);
    out.tau = table.column(1);
    FeatureTable phi(n_paths, P);
    for (std::size_t i = 0; i < n_paths; ++i)
        for (std::size_t p = 0; p < P; ++p) phi.at(i, p) = table.at(i, 2 + p);
    out.phi = std::move(phi);
    return out;
}

inline MCEstimate shell_estimate(const CylindricalFunctional& phi, const ProcessSpec& spec,
                                 const ShellConfig& config, double eps, std::uint64_t seed,
                                 const TimeGrid& grid = TimeGrid{}) {
    config.validate();
    const CylindricalFunctional fs[] = {phi};
    const auto ls = sample_levels(spec, grid, seed, streams::kPrimary, config.n_paths, fs);
    return shell_estimate(ls.g, ls.phi.column(0), config.r, eps, seed);
}

inline MCEstimate density_estimate(const CylindricalFunctional& phi, const ProcessSpec& spec,
                                   const ShellConfig& config, std::uint64_t seed,
                                   const TimeGrid& grid = TimeGrid{}) {
    config.validate();
    const CylindricalFunctional fs[] = {phi};
    const auto ls = sample_levels(spec, grid, seed, streams::kPrimary, config.n_paths, fs);
    return density_estimate(ls.g, ls.phi.column(0), config.r, config.eps_schedule, seed);
}

inline MCEstimate cond_exp_g(const CylindricalFunctional& phi, const ProcessSpec& spec, double r,
                             double bandwidth, std::size_t n_paths, std::uint64_t seed,
                             const TimeGrid& grid = TimeGrid{}) {
    if (!(bandwidth > 0.0)) throw ParameterError("bandwidth must be > 0");
    const CylindricalFunctional fs[] = {phi};
    const auto ls = sample_levels(spec, grid, seed, streams::kPrimary, n_paths, fs);
    const SortedAxis axis(ls.g);
    return cond_exp_g(axis, ls.phi.column(0), r, bandwidth)
        .as_estimate(static_cast<std::int64_t>(n_paths), seed);
}

inline MCEstimate cond_exp_g_tau(const CylindricalFunctional& phi, const ProcessSpec& spec, double r,
                                 double s, double hg, double ht, std::size_t n_paths, std::uint64_t seed,
                                 const TimeGrid& grid = TimeGrid{}) {
    const CylindricalFunctional fs[] = {phi};
    const auto ls = sample_levels(spec, grid, seed, streams::kPrimary, n_paths, fs);
    const SortedAxis axis(ls.g);
    std::vector<double> theta(ls.tau.size());
    for (std::size_t i = 0; i < theta.size(); ++i) theta[i] = tau_angle(ls.tau[i]);
    return cond_exp_g_tau(axis, theta, ls.phi.column(0), r, s, hg, ht)
        .as_estimate(static_cast<std::int64_t>(n_paths), seed);
}

struct Lemma21Report {
    MCEstimate lhs, rhs;
    double z_score = 0.0;
    std::int64_t gamma_excluded = 0;
    double delta = 0.01;
};

struct Lemma21Options {
    double delta = 0.01;  // half-width of the central difference
    CutoffArgument argument = CutoffArgument::running_max;
};

// Level derivative of F_phi(r) = E[phi; g <= r] for g = grid maximum of
// Brownian motion, against E[1{g >= r} M*(phi u/gamma)]. The two sides use
// disjoint seed streams.
inline Lemma21Report lemma21_check(const CutoffSpec& cutoff, double r, std::size_t n_paths,
                                   const TimeGrid& grid, std::uint64_t seed,
                                   const CylindricalFunctional& phi = functionals::one(),
                                   const Lemma21Options& opt = {}) {
    if (!(r > cutoff.a())) throw PreconditionError("lemma check needs r > a");
    if (!(opt.delta > 0.0) || r - opt.delta <= cutoff.a())
        throw ParameterError("difference half-width must be positive and keep r - delta > a");
    const ProcessSpec bm = ProcessSpec::brownian();
    const double lo = r - opt.delta, hi = r + opt.delta;

    auto lhs_tab = map_rows(n_paths, 1, [&] {
        return [&, path = PathSample{grid, {}, {}, 0}](std::size_t i, std::span<double> row) mutable {
            path.seed_tag = derive_tag(seed, streams::kPrimary, i);
            simulate_into(bm, path);
            const double g = grid_extremum(path.values, ExtremumKind::max).value;
            row[0] = (g > lo && g <= hi) ? phi(path.values) / (2.0 * opt.delta) : 0.0;
        };
    });
    auto rhs_tab = map_rows(n_paths, 2, [&] {
        return [&, path = PathSample{grid, {}, {}, 0}](std::size_t i, std::span<double> row) mutable {
            path.seed_tag = derive_tag(seed, streams::kSecondary, i);
            simulate_into(bm, path);
            const double g = grid_extremum(path.values, ExtremumKind::max).value;
            row[0] = 0.0;
            row[1] = 0.0;
            if (g < r) return;
            const auto hf = hypothesis_fields(bm, path, cutoff, opt.argument);
            // <M phi, u> for Brownian coordinates: sum_k df_k U(t_k).
            std::array<double, kMaxCylinderTimes> x{}, gr{};
            phi.coords(path.values, x);
            phi.grad(std::span<const double>(x.data(), phi.arity()), std::span<double>(gr.data(), phi.arity()));
            double phi_pair = 0.0;
            if (phi.arity() > 0) {
                std::vector<double> prefix(hf.u.size() + 1, 0.0);
                for (std::size_t j = 0; j < hf.u.size(); ++j) prefix[j + 1] = prefix[j] + hf.u[j] / hf.u.size();
                for (std::size_t k = 0; k < phi.arity(); ++k) phi_pair += gr[k] * interpolate_nodes(prefix, phi.times[k]);
            }
            const double fv = phi.f(std::span<const double>(x.data(), phi.arity()));
            const auto li = lemma_integrand(bm, path, cutoff, fv, phi_pair, opt.argument);
            if (li.excluded) {
                row[1] = 1.0;
                return;
            }
            row[0] = li.value;
        };
    });
    Lemma21Report rep;
    rep.delta = opt.delta;
    rep.lhs = mean_se(lhs_tab.column(0), seed);
    rep.rhs = mean_se(rhs_tab.column(0), seed);
    const auto ex = rhs_tab.column(1);
    for (double v : ex) rep.gamma_excluded += v > 0.0;
    rep.z_score = z_score(rep.lhs, rep.rhs);
    return rep;
}

// Integrated form: E[clamp(g - r0, 0, r1 - r0) M*(u/gamma)] against
// P(r0 < g <= r1), both for phi = 1.
inline Lemma21Report lemma21_integrated(const CutoffSpec& cutoff, double r0, double r1,
                                        std::size_t n_paths, const TimeGrid& grid, std::uint64_t seed) {
    if (!(r0 > cutoff.a()) || !(r1 > r0)) throw PreconditionError("integrated lemma check needs a < r0 < r1");
    const ProcessSpec bm = ProcessSpec::brownian();
    auto lhs_tab = map_rows(n_paths, 1, [&] {
        return [&, path = PathSample{grid, {}, {}, 0}](std::size_t i, std::span<double> row) mutable {
            path.seed_tag = derive_tag(seed, streams::kPrimary, i);
            simulate_into(bm, path);
            const double g = grid_extremum(path.values, ExtremumKind::max).value;
            row[0] = (g > r0 && g <= r1) ? 1.0 : 0.0;
        };
    });
    auto rhs_tab = map_rows(n_paths, 1, [&] {
        return [&, path = PathSample{grid, {}, {}, 0}](std::size_t i, std::span<double> row) mutable {
            path.seed_tag = derive_tag(seed, streams::kSecondary, i);
            simulate_into(bm, path);
            const double g = grid_extremum(path.values, ExtremumKind::max).value;
            row[0] = 0.0;
            if (g <= r0) return;
            const auto li = lemma_integrand(bm, path, cutoff, 1.0, 0.0);
            if (!li.excluded) row[0] = std::min(g - r0, r1 - r0) * li.value;
        };
    });
    Lemma21Report rep;
    rep.lhs = mean_se(lhs_tab.column(0), seed);
    rep.rhs = mean_se(rhs_tab.column(0), seed);
    rep.z_score = z_score(rep.lhs, rep.rhs);
    return rep;
}

// gamma on each path, for moment and tail diagnostics.
inline std::vector<double> gamma_sample(const ProcessSpec& spec, const CutoffSpec& cutoff, std::size_t n_paths,
                                        const TimeGrid& grid, std::uint64_t seed, std::uint64_t stream) {
    spec.validate();
    auto tab = map_rows(n_paths, 1, [&] {
        return [&, path = PathSample{grid, {}, {}, 0}](std::size_t i, std::span<double> row) mutable {
            path.seed_tag = derive_tag(seed, stream, i);
            simulate_into(spec, path);
            row[0] = hypothesis_fields(spec, path, cutoff).gamma;
        };
    });
    return tab.column(0);
}

struct LocalIdentityScan {
    std::int64_t tested = 0;  // paths with max > a
    double max_residual = 0.0;
};

// Largest |<Mg, u> - gamma| over the sampled paths whose maximum exceeds a.
inline LocalIdentityScan scan_local_identity(const ProcessSpec& spec, const CutoffSpec& cutoff,
                                             std::size_t n_paths, const TimeGrid& grid, std::uint64_t seed) {
    spec.validate();
    auto tab = map_rows(n_paths, 2, [&] {
        return [&, path = PathSample{grid, {}, {}, 0}](std::size_t i, std::span<double> row) mutable {
            path.seed_tag = derive_tag(seed, streams::kPrimary, i);
            simulate_into(spec, path);
            row[0] = 0.0;
            row[1] = 0.0;
            if (!(grid_extremum(path.values, ExtremumKind::max).value > cutoff.a())) return;
            row[0] = 1.0;
            row[1] = std::abs(verify_local_identity(spec, path, cutoff));
        };
    });
    LocalIdentityScan out;
    for (std::size_t i = 0; i < n_paths; ++i) {
        out.tested += tab.at(i, 0) > 0.0;
        out.max_residual = std::max(out.max_residual, tab.at(i, 1));
    }
    return out;
}

}  // namespace gsurf
