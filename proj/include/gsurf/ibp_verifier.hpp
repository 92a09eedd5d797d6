#pragma once

// Monte Carlo checks of Gaussian integration-by-parts identities on path
// space: flat, half-space {g >= r}, joint (g, tau), the r -> 0 limits and the
// Neumann form. Each report compares two independent estimators.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "gsurf/batch.hpp"
#include "gsurf/conditioned_laws.hpp"
#include "gsurf/density_oracles.hpp"
#include "gsurf/errors.hpp"
#include "gsurf/functionals.hpp"
#include "gsurf/kernel_regression.hpp"
#include "gsurf/path_engine.hpp"
#include "gsurf/quadrature.hpp"
#include "gsurf/rng.hpp"
#include "gsurf/spectral_ops.hpp"
#include "gsurf/stats.hpp"

namespace gsurf {

inline constexpr double kPassThreshold = 3.0;
inline constexpr double kBiasShiftLimit = 2.0;
inline constexpr int kMaxEigenpairs = 64;

struct OracleRef {
    std::string tag;
    double value = 0.0;
};

struct IbpReport {
    std::string identity_tag;
    MCEstimate lhs, rhs;
    double z_score = 0.0;
    bool pass = false;
    std::map<std::string, std::string> params;
    std::vector<OracleRef> oracle_refs;
    std::vector<std::pair<std::string, double>> diagnostics;
    bool degenerate = false;
    bool biased = false;    // bandwidth halving moved the kernel estimate by > 2 se
    bool unstable = false;  // curvature dominates the r -> 0 extrapolation

    void finalize(double z) {
        z_score = z;
        pass = z <= kPassThreshold && std::isfinite(lhs.se) && std::isfinite(rhs.se) && !degenerate;
    }

    double diagnostic(const std::string& key) const {
        for (const auto& [k, v] : diagnostics)
            if (k == key) return v;
        return std::numeric_limits<double>::quiet_NaN();
    }
};

struct IbpContext {
    ProcessSpec process;
    TimeGrid grid{2000};
    std::uint64_t seed = 1;
    std::size_t n_paths = 1000000;
    double bandwidth = 0.0;        // level bandwidth; 0 selects the default rule
    double time_bandwidth = 0.0;   // bandwidth in the argmin angle; 0 = default
};

namespace detail {

inline std::string num(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

inline MCEstimate from_regression(const RegressionEstimate& e, double scale, const IbpContext& ctx) {
    MCEstimate m;
    m.mean = scale * e.value;
    m.se = std::abs(scale) * e.se;
    m.n = static_cast<std::int64_t>(ctx.n_paths);
    m.seed = ctx.seed;
    m.degenerate = e.degenerate;
    return m;
}

inline std::vector<std::vector<double>> tangents_if_fixed(const ProcessSpec& spec,
                                                          std::span<const CameronMartinVector> zs,
                                                          const TimeGrid& grid) {
    // Every supported process except geometric has a path-independent tangent.
    std::vector<std::vector<double>> out;
    PathSample dummy{grid, std::vector<double>(grid.steps() + 1, 1.0), {}, 0};
    for (const auto& z : zs) out.push_back(path_tangent(spec, dummy, z));
    return out;
}

inline void require_half_space(const ProcessSpec& spec, std::span<const double> rs) {
    if (spec.kind == ProcessKind::geometric)
        throw UnsupportedError("half-space identities need a closed-form minimum density; geometric has none");
    for (double r : rs)
        if (!(r < 0.0)) throw PreconditionError("half-space level r must be < 0");
}

// Default bandwidth in the angle coordinate: halved Silverman rule on the
// paths whose level lies within two level bandwidths of r.
inline double angle_bandwidth(const SortedAxis& axis, std::span<const double> theta, double r, double hg) {
    const auto [lo, hi] = axis.window(r - 2.0 * hg, r + 2.0 * hg);
    std::vector<double> th;
    for (std::size_t k = lo; k < hi; ++k) th.push_back(theta[axis.index(k)]);
    if (th.size() < 10) return 0.25;
    return std::max(default_bandwidth(th), 1e-3);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Flat identity: E[D phi . z] = E[phi W_z] on common paths. The z-score uses
// the paired difference, so correlation between the sides is accounted for.
inline std::vector<IbpReport> ibp_flat(const IbpContext& ctx, std::span<const CylindricalFunctional> phis,
                                       std::span<const CameronMartinVector> zs) {
    ctx.process.validate();
    for (const auto& z : zs) check_direction(ctx.process, z);
    for (const auto& p : phis) p.validate();
    const std::size_t P = phis.size(), Z = zs.size();
    const auto& spec = ctx.process;
    auto tab = map_rows(ctx.n_paths, 2 * P * Z, [&] {
        return [&, path = PathSample{ctx.grid, {}, {}, 0},
                tan = std::vector<double>(ctx.grid.steps() + 1)](std::size_t i, std::span<double> row) mutable {
            path.seed_tag = derive_tag(ctx.seed, streams::kPrimary, i);
            simulate_into(spec, path);
            for (std::size_t q = 0; q < Z; ++q) {
                path_tangent(spec, path, zs[q], tan);
                const double w = white_noise_pairing(path, zs[q]);
                for (std::size_t p = 0; p < P; ++p) {
                    const auto [v, d] = phis[p].value_and_directional(path.values, tan);
                    row[2 * (p * Z + q)] = d;
                    row[2 * (p * Z + q) + 1] = v * w;
                }
            }
        };
    });
    std::vector<IbpReport> out;
    for (std::size_t p = 0; p < P; ++p)
        for (std::size_t q = 0; q < Z; ++q) {
            const auto L = tab.column(2 * (p * Z + q));
            const auto R = tab.column(2 * (p * Z + q) + 1);
            std::vector<double> D(L.size());
            for (std::size_t i = 0; i < D.size(); ++i) D[i] = L[i] - R[i];
            IbpReport rep;
            rep.identity_tag = "ibp-flat";
            rep.params = {{"process", spec.name()}, {"phi", phis[p].name}, {"z", zs[q].label}};
            rep.lhs = mean_se(L, ctx.seed);
            rep.rhs = mean_se(R, ctx.seed);
            const auto d = mean_se(D, ctx.seed);
            rep.diagnostics.push_back({"paired_difference", d.mean});
            rep.diagnostics.push_back({"paired_se", d.se});
            rep.finalize(d.mean == 0.0 ? 0.0 : (d.se > 0.0 ? std::abs(d.mean) / d.se
                                                           : std::numeric_limits<double>::infinity()));
            out.push_back(std::move(rep));
        }
    return out;
}

// Product form: E[(D phi.z) psi] + E[phi (D psi.z)] = E[phi psi W_z].
inline IbpReport ibp_product(const IbpContext& ctx, const CylindricalFunctional& phi,
                             const CylindricalFunctional& psi, const CameronMartinVector& z) {
    ctx.process.validate();
    check_direction(ctx.process, z);
    const auto& spec = ctx.process;
    auto tab = map_rows(ctx.n_paths, 3, [&] {
        return [&, path = PathSample{ctx.grid, {}, {}, 0},
                tan = std::vector<double>(ctx.grid.steps() + 1)](std::size_t i, std::span<double> row) mutable {
            path.seed_tag = derive_tag(ctx.seed, streams::kPrimary, i);
            simulate_into(spec, path);
            path_tangent(spec, path, z, tan);
            const double w = white_noise_pairing(path, z);
            const auto [fv, fd] = phi.value_and_directional(path.values, tan);
            const auto [gv, gd] = psi.value_and_directional(path.values, tan);
            row[0] = fd * gv;
            row[1] = fv * gd;
            row[2] = fv * gv * w;
        };
    });
    const auto A = tab.column(0), B = tab.column(1), C = tab.column(2);
    std::vector<double> L(A.size()), D(A.size());
    for (std::size_t i = 0; i < L.size(); ++i) {
        L[i] = A[i] + B[i];
        D[i] = L[i] - C[i];
    }
    IbpReport rep;
    rep.identity_tag = "ibp-product";
    rep.params = {{"process", spec.name()}, {"phi", phi.name}, {"psi", psi.name}, {"z", z.label}};
    rep.lhs = mean_se(L, ctx.seed);
    rep.rhs = mean_se(C, ctx.seed);
    const auto a = mean_se(A), b = mean_se(B), d = mean_se(D);
    rep.diagnostics = {{"term_dphi_psi", a.mean}, {"term_phi_dpsi", b.mean}, {"term_phi_psi_w", rep.rhs.mean},
                       {"paired_difference", d.mean}, {"paired_se", d.se}};
    rep.finalize(d.mean == 0.0 ? 0.0 : (d.se > 0.0 ? std::abs(d.mean) / d.se
                                                   : std::numeric_limits<double>::infinity()));
    return rep;
}

// Per-path rows of the boundary side: {g, U_pz = D phi_p . dX_z - phi_p W_z}.
inline FeatureTable half_space_rhs_rows(const IbpContext& ctx, std::span<const CylindricalFunctional> phis,
                                        std::span<const CameronMartinVector> zs) {
    const auto& spec = ctx.process;
    const bool refine = spec.kind != ProcessKind::ou;
    const std::size_t P = phis.size(), Z = zs.size();
    const auto fixed = detail::tangents_if_fixed(spec, zs, ctx.grid);
    return map_rows(ctx.n_paths, 1 + P * Z, [&] {
        return [&, path = PathSample{ctx.grid, {}, {}, 0},
                tan = std::vector<double>(ctx.grid.steps() + 1)](std::size_t i, std::span<double> row) mutable {
            path.seed_tag = derive_tag(ctx.seed, streams::kSecondary, i);
            simulate_into(spec, path);
            row[0] = extremum(spec, path, ExtremumKind::min, refine).value;
            for (std::size_t q = 0; q < Z; ++q) {
                std::span<const double> t = fixed[q];
                if (spec.kind == ProcessKind::geometric) {
                    path_tangent(spec, path, zs[q], tan);
                    t = tan;
                }
                const double w = white_noise_pairing(path, zs[q]);
                for (std::size_t p = 0; p < P; ++p) {
                    const auto [v, d] = phis[p].value_and_directional(path.values, t);
                    row[1 + p * Z + q] = d - v * w;
                }
            }
        };
    });
}

inline MCEstimate half_space_rhs(const FeatureTable& rows, std::size_t column, double r, std::uint64_t seed) {
    std::vector<double> y(rows.rows());
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = rows.at(i, 0) >= r ? -rows.at(i, column) : 0.0;
    return mean_se(y, seed);
}

// E[dX_z(tau) phi | g = r] rho(r) = -E[1{g >= r}(D phi . z - phi W_z)].
// The left side uses kernel regression on one seed stream and the closed-form
// density; the right side is a plain mean on a disjoint stream.
inline std::vector<IbpReport> ibp_halfspace(const IbpContext& ctx, std::span<const CylindricalFunctional> phis,
                                            std::span<const CameronMartinVector> zs, std::span<const double> rs) {
    const auto& spec = ctx.process;
    spec.validate();
    detail::require_half_space(spec, rs);
    for (const auto& z : zs) check_direction(spec, z);
    for (const auto& p : phis) p.validate();
    const bool refine = spec.kind != ProcessKind::ou;
    const std::size_t P = phis.size(), Z = zs.size();
    const auto fixed = detail::tangents_if_fixed(spec, zs, ctx.grid);

    auto lhs_rows = map_rows(ctx.n_paths, 1 + P * Z, [&] {
        return [&, path = PathSample{ctx.grid, {}, {}, 0}](std::size_t i, std::span<double> row) mutable {
            path.seed_tag = derive_tag(ctx.seed, streams::kPrimary, i);
            simulate_into(spec, path);
            const auto rec = extremum(spec, path, ExtremumKind::min, refine);
            row[0] = rec.value;
            for (std::size_t p = 0; p < P; ++p) {
                const double v = phis[p](path.values);
                for (std::size_t q = 0; q < Z; ++q) row[1 + p * Z + q] = interpolate_nodes(fixed[q], rec.tau) * v;
            }
        };
    });
    const auto rhs_rows = half_space_rhs_rows(ctx, phis, zs);

    const auto g = lhs_rows.column(0);
    const SortedAxis axis(g);
    const double h = ctx.bandwidth > 0.0 ? ctx.bandwidth : default_bandwidth(g);
    std::vector<std::vector<double>> ys;
    for (std::size_t c = 1; c < 1 + P * Z; ++c) ys.push_back(lhs_rows.column(c));
    std::vector<std::span<const double>> spans(ys.begin(), ys.end());

    std::vector<IbpReport> out;
    for (double r : rs) {
        const double rho = min_density(spec, r);
        const auto s1 = kernel_sums(axis, spans, r, h);
        const auto s_half = kernel_sums(axis, spans, r, 0.5 * h);
        const auto s_double = kernel_sums(axis, spans, r, 2.0 * h);
        for (std::size_t p = 0; p < P; ++p)
            for (std::size_t q = 0; q < Z; ++q) {
                const std::size_t k = p * Z + q;
                const auto e = s1.ratio(k);
                const auto eh = s_half.ratio(k);
                const auto ed = s_double.ratio(k);
                IbpReport rep;
                rep.identity_tag = "ibp-halfspace";
                rep.params = {{"process", spec.name()}, {"phi", phis[p].name}, {"z", zs[q].label},
                              {"r", detail::num(r)}, {"bandwidth", detail::num(h)}};
                rep.oracle_refs.push_back({density_tag(spec) + "@r=" + detail::num(r), rho});
                rep.lhs = detail::from_regression(e, rho, ctx);
                rep.rhs = half_space_rhs(rhs_rows, 1 + k, r, ctx.seed);
                rep.degenerate = e.degenerate;
                const double shift = std::abs(e.value - eh.value);
                const double unit = eh.se;
                const double shift_se = shift == 0.0 ? 0.0 : (unit > 0.0 ? shift / unit : std::numeric_limits<double>::infinity());
                rep.biased = shift_se > kBiasShiftLimit;
                rep.diagnostics = {{"lhs_half_bandwidth", rho * eh.value},
                                   {"lhs_double_bandwidth", rho * ed.value},
                                   {"bandwidth_shift_se", shift_se},
                                   {"effective_sample", e.ess}};
                rep.finalize(z_score(rep.lhs, rep.rhs));
                out.push_back(std::move(rep));
            }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Joint identity: integral over s of E[phi | g=r, tau=s] dX_z(s) pi(r,s) ds
// equals the half-space right side.

namespace detail {

struct AngleSample {
    std::vector<double> g, theta;
    std::vector<std::vector<double>> phi;  // [functional][path]
};

inline AngleSample sample_angles(const ProcessSpec& spec, const TimeGrid& grid, std::uint64_t seed,
                                 std::uint64_t stream, std::size_t n_paths,
                                 std::span<const CylindricalFunctional> phis) {
    const bool refine = spec.kind != ProcessKind::ou;
    const std::size_t P = phis.size();
    auto tab = map_rows(n_paths, 2 + P, [&] {
        return [&, path = PathSample{grid, {}, {}, 0}](std::size_t i, std::span<double> row) mutable {
            path.seed_tag = derive_tag(seed, stream, i);
            simulate_into(spec, path);
            const auto rec = extremum(spec, path, ExtremumKind::min, refine);
            row[0] = rec.value;
            row[1] = tau_angle(rec.tau);
            for (std::size_t p = 0; p < P; ++p) row[2 + p] = phis[p](path.values);
        };
    });
    AngleSample a;
    a.g = tab.column(0);
    a.theta = tab.column(1);
    for (std::size_t p = 0; p < P; ++p) a.phi.push_back(tab.column(2 + p));
    return a;
}

// sum_k c_k E[phi | g=r, tau=s_k] over Chebyshev nodes, for each functional.
// Nodes whose coefficient is below 1e-3 of the total are dropped when their
// kernel window is empty; a significant empty node marks the result
// degenerate.
inline std::vector<RegressionEstimate> node_quadrature(const AngleSample& a, const SortedAxis& axis, double r,
                                                       double hg, double ht, const ChebyshevRule& rule,
                                                       const std::vector<double>& coeff) {
    const std::size_t P = a.phi.size();
    std::vector<std::span<const double>> spans(a.phi.begin(), a.phi.end());
    double total = 0.0;
    for (double c : coeff) total += std::abs(c);
    std::vector<std::vector<RegressionEstimate>> parts(P);
    std::vector<double> used;
    bool degenerate = false;
    for (std::size_t k = 0; k < rule.nodes.size(); ++k) {
        if (coeff[k] == 0.0) continue;
        const auto s = kernel_sums_2d(axis, a.theta, spans, r, hg, tau_angle(rule.nodes[k]), ht);
        const bool significant = std::abs(coeff[k]) > 1e-3 * total;
        const auto first = s.ratio(0);
        if (first.loo.empty()) {
            if (significant) degenerate = true;
            continue;
        }
        if (significant && first.degenerate) degenerate = true;
        used.push_back(coeff[k]);
        for (std::size_t p = 0; p < P; ++p) parts[p].push_back(s.ratio(p));
    }
    std::vector<RegressionEstimate> out;
    for (std::size_t p = 0; p < P; ++p) {
        auto e = combine(used, parts[p]);
        e.degenerate = degenerate || used.empty();
        if (used.empty()) e.se = std::numeric_limits<double>::infinity();
        out.push_back(std::move(e));
    }
    return out;
}

}  // namespace detail

inline std::vector<IbpReport> ibp_joint(const IbpContext& ctx, std::span<const CylindricalFunctional> phis,
                                        std::span<const CameronMartinVector> zs, std::span<const double> rs,
                                        int nodes = 33) {
    const auto& spec = ctx.process;
    spec.validate();
    if (spec.kind == ProcessKind::ou)
        throw UnsupportedError("joint identity needs the (min, argmin) density, which is unavailable for ou");
    detail::require_half_space(spec, rs);
    for (const auto& z : zs) check_direction(spec, z);
    for (const auto& p : phis) p.validate();
    const std::size_t P = phis.size(), Z = zs.size();
    const auto fixed = detail::tangents_if_fixed(spec, zs, ctx.grid);
    const auto a = detail::sample_angles(spec, ctx.grid, ctx.seed, streams::kPrimary, ctx.n_paths, phis);
    const auto rhs_rows = half_space_rhs_rows(ctx, phis, zs);
    const SortedAxis axis(a.g);
    const double hg = ctx.bandwidth > 0.0 ? ctx.bandwidth : default_bandwidth(a.g);
    const auto rule = chebyshev_rule(nodes);

    std::vector<IbpReport> out;
    for (double r : rs) {
        const double ht = ctx.time_bandwidth > 0.0 ? ctx.time_bandwidth : detail::angle_bandwidth(axis, a.theta, r, hg);
        for (std::size_t q = 0; q < Z; ++q) {
            std::vector<double> coeff(rule.nodes.size());
            for (std::size_t k = 0; k < coeff.size(); ++k) {
                const double s = rule.nodes[k];
                coeff[k] = rule.weights[k] * interpolate_nodes(fixed[q], s) * min_joint_density(spec, r, s);
            }
            const auto est = detail::node_quadrature(a, axis, r, hg, ht, rule, coeff);
            for (std::size_t p = 0; p < P; ++p) {
                IbpReport rep;
                rep.identity_tag = "ibp-joint";
                rep.params = {{"process", spec.name()}, {"phi", phis[p].name}, {"z", zs[q].label},
                              {"r", detail::num(r)}, {"bandwidth", detail::num(hg)},
                              {"time_bandwidth", detail::num(ht)}, {"nodes", std::to_string(nodes)}};
                rep.oracle_refs.push_back({joint_density_tag(spec) + "@r=" + detail::num(r), min_joint_density(spec, r, 0.5)});
                rep.lhs = detail::from_regression(est[p], 1.0, ctx);
                rep.rhs = half_space_rhs(rhs_rows, 1 + p * Z + q, r, ctx.seed);
                rep.degenerate = est[p].degenerate;
                rep.finalize(z_score(rep.lhs, rep.rhs));
                out.push_back(std::move(rep));
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// r -> 0 limits.

enum class LimitKind { meander, tilted, bessel };

inline std::string to_string(LimitKind k) {
    switch (k) {
        case LimitKind::meander: return "meander";
        case LimitKind::tilted: return "tilted";
        case LimitKind::bessel: return "bessel";
    }
    return "?";
}

// Left side at each level: `level` regresses z(tau) phi on g alone and
// divides rho(r) by the survival mu(g >= r); `joint` integrates the
// (g, tau) regression against the limit weight on Chebyshev nodes.
enum class LimitLhs { level, joint };

struct LimitOptions {
    std::vector<double> levels{-0.08, -0.04, -0.02};
    LimitLhs lhs = LimitLhs::level;
    double bandwidth_ratio = 0.25;  // level bandwidth = ratio * |r|
    double time_bandwidth = 0.0;    // 0 = default rule per level
    int nodes = 33;
    double b = 1.0;      // tilted case
    double sigma = 1.0;  // tilted case
    // Sign of the exponent in the meander weight exp(sign (b/sigma) m(1)).
    // +1 is the change of measure that makes X/sigma a driftless Brownian
    // motion; -1 flips it.
    int tilt_sign = 1;
    std::size_t rhs_paths = 0;  // 0 = same as the context
};

inline ProcessSpec limit_process(LimitKind kind, const LimitOptions& opt) {
    switch (kind) {
        case LimitKind::meander: return ProcessSpec::brownian();
        case LimitKind::bessel: return ProcessSpec::bridge();
        case LimitKind::tilted: return ProcessSpec::distorted(opt.b, opt.sigma);
    }
    return {};
}

// Limit weight in s (without the direction factor).
inline double limit_weight(LimitKind kind, const LimitOptions& opt, double s) {
    using std::numbers::pi;
    switch (kind) {
        case LimitKind::meander: return 1.0 / (std::sqrt(2.0 * pi) * std::sqrt(s * s * s * (1.0 - s)));
        case LimitKind::bessel: {
            const double q = s * (1.0 - s);
            return 1.0 / (std::sqrt(2.0 * pi) * std::sqrt(q * q * q));
        }
        case LimitKind::tilted: return limit_constants(ProcessSpec::distorted(opt.b, opt.sigma)).tilde_pi(s);
    }
    return 0.0;
}

// Right side: -(weighted) mean of D phi . dX - phi W_z over exact samples of
// the limit law (meander, tilted meander, Bessel bridge). In the tilted case
// X = sigma m and W_z = sum h dm - (b/sigma) z(1).
inline std::vector<MCEstimate> limit_rhs(LimitKind kind, std::span<const CylindricalFunctional> phis,
                                         std::span<const CameronMartinVector> zs, const TimeGrid& grid,
                                         std::uint64_t seed, std::size_t n_paths, const LimitOptions& opt) {
    const std::size_t P = phis.size(), Z = zs.size();
    const double scale = kind == LimitKind::tilted ? opt.sigma : 1.0;
    const double tilt = kind == LimitKind::tilted ? opt.b / opt.sigma : 0.0;
    if (kind == LimitKind::tilted) {
        check_tilt(opt.b, opt.sigma);
        if (opt.tilt_sign != 1 && opt.tilt_sign != -1) throw ConfigError("tilt_sign must be 1 or -1");
    }
    const std::uint64_t stream = kind == LimitKind::bessel ? streams::kBessel : streams::kMeander;
    auto tab = map_rows(n_paths, 1 + P * Z, [&] {
        return [&, path = PathSample{grid, {}, {}, 0}, x = std::vector<double>(),
                tan = std::vector<double>(grid.steps() + 1)](std::size_t i, std::span<double> row) mutable {
            path.seed_tag = derive_tag(seed, stream, i);
            if (kind == LimitKind::bessel)
                sample_bessel3_bridge_into(path);
            else
                sample_meander_into(path);
            x.resize(path.values.size());
            for (std::size_t j = 0; j < x.size(); ++j) x[j] = scale * path.values[j];
            row[0] = kind == LimitKind::tilted ? std::exp(opt.tilt_sign * tilt * path.values.back()) : 1.0;
            for (std::size_t q = 0; q < Z; ++q) {
                for (std::size_t j = 0; j < tan.size(); ++j) tan[j] = scale * zs[q].z_values[j];
                const double w = white_noise_pairing(path, zs[q]) - tilt * zs[q].end();
                for (std::size_t p = 0; p < P; ++p) {
                    const auto [v, d] = phis[p].value_and_directional(x, tan);
                    row[1 + p * Z + q] = -(d - v * w);
                }
            }
        };
    });
    const auto w = tab.column(0);
    std::vector<MCEstimate> out;
    for (std::size_t c = 1; c < 1 + P * Z; ++c) {
        const auto y = tab.column(c);
        out.push_back(kind == LimitKind::tilted ? weighted_ratio(w, y, seed) : mean_se(y, seed));
    }
    return out;
}

inline std::vector<IbpReport> limit_identity(LimitKind kind, std::span<const CylindricalFunctional> phis,
                                             std::span<const CameronMartinVector> zs, const IbpContext& ctx,
                                             const LimitOptions& opt = {}) {
    for (const auto& p : phis) p.validate();
    if (kind == LimitKind::bessel)
        for (const auto& z : zs) check_direction(ProcessSpec::bridge(), z);
    if (opt.levels.size() < 2) throw ConfigError("limit extrapolation needs at least two levels");
    for (double r : opt.levels)
        if (!(r < 0.0)) throw PreconditionError("limit levels must be < 0");
    const auto spec = limit_process(kind, opt);
    const std::size_t P = phis.size(), Z = zs.size();
    const auto c_lin = intercept_weights(opt.levels);
    // Exact polynomial through all levels evaluated at 0 (Lagrange).
    std::vector<double> c_poly(opt.levels.size(), 1.0);
    for (std::size_t j = 0; j < opt.levels.size(); ++j)
        for (std::size_t m = 0; m < opt.levels.size(); ++m)
            if (m != j) c_poly[j] *= (0.0 - opt.levels[m]) / (opt.levels[j] - opt.levels[m]);
    const double dscale = kind == LimitKind::tilted ? opt.sigma : 1.0;

    // per level, per direction: estimates for all functionals
    std::vector<std::vector<std::vector<RegressionEstimate>>> lvl(opt.levels.size());
    if (opt.lhs == LimitLhs::joint) {
        const auto a = detail::sample_angles(spec, ctx.grid, ctx.seed, streams::kPrimary, ctx.n_paths, phis);
        const SortedAxis axis(a.g);
        const auto rule = chebyshev_rule(opt.nodes);
        for (std::size_t j = 0; j < opt.levels.size(); ++j) {
            const double r = opt.levels[j];
            const double hg = opt.bandwidth_ratio * std::abs(r);
            const double ht = opt.time_bandwidth > 0.0 ? opt.time_bandwidth : detail::angle_bandwidth(axis, a.theta, r, hg);
            for (std::size_t q = 0; q < Z; ++q) {
                std::vector<double> coeff(rule.nodes.size());
                for (std::size_t k = 0; k < coeff.size(); ++k) {
                    const double s = rule.nodes[k];
                    coeff[k] = rule.weights[k] * dscale * zs[q].at(s) * limit_weight(kind, opt, s);
                }
                lvl[j].push_back(detail::node_quadrature(a, axis, r, hg, ht, rule, coeff));
            }
        }
    } else {
        const bool refine = spec.kind != ProcessKind::ou;
        auto tab = map_rows(ctx.n_paths, 1 + P * Z, [&] {
            return [&, path = PathSample{ctx.grid, {}, {}, 0}](std::size_t i, std::span<double> row) mutable {
                path.seed_tag = derive_tag(ctx.seed, streams::kPrimary, i);
                simulate_into(spec, path);
                const auto rec = extremum(spec, path, ExtremumKind::min, refine);
                row[0] = rec.value;
                for (std::size_t p = 0; p < P; ++p) {
                    const double v = phis[p](path.values);
                    for (std::size_t q = 0; q < Z; ++q) row[1 + q * P + p] = dscale * zs[q].at(rec.tau) * v;
                }
            };
        });
        const auto g = tab.column(0);
        const SortedAxis axis(g);
        std::vector<std::vector<double>> ys;
        for (std::size_t c = 1; c < 1 + P * Z; ++c) ys.push_back(tab.column(c));
        const std::vector<std::span<const double>> spans(ys.begin(), ys.end());
        for (std::size_t j = 0; j < opt.levels.size(); ++j) {
            const double r = opt.levels[j];
            const auto sums = kernel_sums(axis, spans, r, opt.bandwidth_ratio * std::abs(r));
            const double norm = min_density(spec, r) / survival(spec, r);
            for (std::size_t q = 0; q < Z; ++q) {
                std::vector<RegressionEstimate> per_phi;
                for (std::size_t p = 0; p < P; ++p) per_phi.push_back(scale(sums.ratio(q * P + p), norm));
                lvl[j].push_back(std::move(per_phi));
            }
        }
    }
    const std::size_t rhs_n = opt.rhs_paths ? opt.rhs_paths : ctx.n_paths;
    const auto rhs = limit_rhs(kind, phis, zs, ctx.grid, ctx.seed, rhs_n, opt);

    std::vector<IbpReport> out;
    for (std::size_t p = 0; p < P; ++p)
        for (std::size_t q = 0; q < Z; ++q) {
            std::vector<RegressionEstimate> per_level;
            for (std::size_t j = 0; j < opt.levels.size(); ++j) per_level.push_back(lvl[j][q][p]);
            const auto lin = combine(c_lin, per_level);
            std::vector<double> c_diff(c_poly.size());
            for (std::size_t j = 0; j < c_diff.size(); ++j) c_diff[j] = c_poly[j] - c_lin[j];
            const auto curv = combine(c_diff, per_level);
            IbpReport rep;
            rep.identity_tag = "limit-" + to_string(kind);
            rep.params = {{"phi", phis[p].name}, {"z", zs[q].label}, {"lhs_process", spec.name()},
                          {"level_bandwidth_ratio", detail::num(opt.bandwidth_ratio)},
                          {"lhs_estimator", opt.lhs == LimitLhs::level ? "level" : "joint"}};
            for (std::size_t j = 0; j < opt.levels.size(); ++j) {
                rep.diagnostics.push_back({"lhs_at_r=" + detail::num(opt.levels[j]), per_level[j].value});
                rep.diagnostics.push_back({"lhs_se_at_r=" + detail::num(opt.levels[j]), per_level[j].se});
            }
            rep.diagnostics.push_back({"curvature_shift", curv.value});
            rep.diagnostics.push_back({"curvature_shift_se", curv.se});
            if (kind == LimitKind::tilted) {
                const auto lc = limit_constants(spec);
                rep.oracle_refs.push_back({"distorted-limit-constant:C", lc.C});
                rep.oracle_refs.push_back({"distorted-limit-weight:tilde_pi(0.5)", lc.tilde_pi(0.5)});
            }
            rep.lhs = detail::from_regression(lin, 1.0, ctx);
            rep.rhs = rhs[p * Z + q];
            rep.rhs.n = static_cast<std::int64_t>(rhs_n);
            rep.degenerate = lin.degenerate;
            // Exact (noise-free) quadratures differ only by rounding.
            rep.unstable = std::abs(curv.value) > 3.0 * curv.se + 1e-12 * (1.0 + std::abs(lin.value));
            rep.finalize(z_score(rep.lhs, rep.rhs));
            out.push_back(std::move(rep));
        }
    return out;
}

// ---------------------------------------------------------------------------
// Neumann form on {g >= r} for Brownian motion in its sine eigenbasis.

// cos(sum_k a_k x_k + c) in eigen-coordinates; empty `a` gives cos(c).
struct TrigCylindrical {
    std::vector<double> a;
    double c = 0.0;
    std::string name;

    double phase(std::span<const double> x) const {
        double t = c;
        for (std::size_t k = 0; k < a.size(); ++k) t += a[k] * x[k];
        return t;
    }
    static TrigCylindrical one() { return {{}, 0.0, "1"}; }
};

inline IbpReport neumann_identity(const TrigCylindrical& phi, const TrigCylindrical& psi, double r, int K,
                                  const IbpContext& ctx) {
    if (ctx.process.kind != ProcessKind::bm)
        throw UnsupportedError("the Neumann check uses the Brownian eigenbasis; process must be bm");
    if (K < 1 || K > kMaxEigenpairs)
        throw ConfigError("eigen truncation K must lie in [1, " + std::to_string(kMaxEigenpairs) + "]");
    if (phi.a.size() > static_cast<std::size_t>(K) || psi.a.size() > static_cast<std::size_t>(K))
        throw ConfigError("test function uses more eigen-coordinates than K");
    if (!(r < 0.0)) throw PreconditionError("Neumann level r must be < 0");
    const auto& spec = ctx.process;
    const auto es = eigenpairs(spec, ctx.grid, K);
    std::vector<CameronMartinVector> dirs;
    for (int k = 0; k < K; ++k) dirs.push_back(CameronMartinVector::from_derivative(
        [&] {
            std::vector<double> h(ctx.grid.steps());
            for (int j = 0; j < ctx.grid.steps(); ++j) h[j] = ctx.grid.steps() * (es.modes[k][j + 1] - es.modes[k][j]);
            return h;
        }(), "e" + std::to_string(k + 1)));
    auto coeff = [K](const TrigCylindrical& f) {
        std::vector<double> a(K, 0.0);
        std::copy(f.a.begin(), f.a.end(), a.begin());
        return a;
    };
    const auto A = coeff(phi), B = coeff(psi);
    double a2 = 0.0;
    for (double v : A) a2 += v * v;

    // Stream A: T1 = E[1{g>=r} L phi psi], T2 = -1/2 E[1{g>=r} <D phi, D psi>].
    auto ta = map_rows(ctx.n_paths, 3, [&] {
        return [&, path = PathSample{ctx.grid, {}, {}, 0}, x = std::vector<double>(K)](std::size_t i, std::span<double> row) mutable {
            path.seed_tag = derive_tag(ctx.seed, streams::kPrimary, i);
            simulate_into(spec, path);
            const double g = extremum(spec, path, ExtremumKind::min, true).value;
            const double ind = g >= r ? 1.0 : 0.0;
            for (int k = 0; k < K; ++k) x[k] = trapezoid_inner(path.values, es.modes[k]);
            const double th = phi.phase(x), tp = psi.phase(x);
            double aw = 0.0, dd = 0.0;
            for (int k = 0; k < K; ++k) {
                aw += A[k] * white_noise_pairing(path, dirs[k]);
                dd += (-std::sin(th) * A[k]) * (-std::sin(tp) * B[k]);
            }
            const double Lphi = -0.5 * std::cos(th) * a2 + 0.5 * std::sin(th) * aw;
            const double t1 = ind * Lphi * std::cos(tp);
            const double t2 = -0.5 * ind * dd;
            row[0] = t1;
            row[1] = t2;
            row[2] = t1 - t2;
        };
    });
    // Stream B: boundary term through sum_k e_k(tau) D_k phi psi.
    auto tb = map_rows(ctx.n_paths, 2, [&] {
        return [&, path = PathSample{ctx.grid, {}, {}, 0}, x = std::vector<double>(K)](std::size_t i, std::span<double> row) mutable {
            path.seed_tag = derive_tag(ctx.seed, streams::kSecondary, i);
            simulate_into(spec, path);
            const auto rec = extremum(spec, path, ExtremumKind::min, true);
            for (int k = 0; k < K; ++k) x[k] = trapezoid_inner(path.values, es.modes[k]);
            const double th = phi.phase(x), tp = psi.phase(x);
            double s = 0.0;
            for (int k = 0; k < K; ++k) {
                const double ek = std::numbers::sqrt2 * std::sin((k + 0.5) * std::numbers::pi * rec.tau);
                s += ek * (-std::sin(th) * A[k]);
            }
            row[0] = rec.value;
            row[1] = s * std::cos(tp);
        };
    });
    const auto t1 = mean_se(ta.column(0), ctx.seed);
    const auto t2 = mean_se(ta.column(1), ctx.seed);
    const auto lhs = mean_se(ta.column(2), ctx.seed);
    const auto g = tb.column(0);
    const SortedAxis axis(g);
    const double h = ctx.bandwidth > 0.0 ? ctx.bandwidth : default_bandwidth(g);
    const double rho = min_density(spec, r);
    const auto nw = nadaraya_watson(axis, tb.column(1), r, h);
    double sup = 0.0;
    for (double v : A) sup += std::numbers::sqrt2 * std::abs(v);
    const double bound = 0.5 * sup * rho;

    IbpReport rep;
    rep.identity_tag = "neumann";
    rep.params = {{"phi", phi.name}, {"psi", psi.name}, {"r", detail::num(r)}, {"K", std::to_string(K)},
                  {"bandwidth", detail::num(h)}};
    rep.oracle_refs.push_back({density_tag(spec) + "@r=" + detail::num(r), rho});
    for (int k = 0; k < K; ++k) rep.oracle_refs.push_back({"bm-eigenvalue:((k-1/2)pi)^-2,k=" + std::to_string(k + 1), es.lambdas[k]});
    rep.lhs = lhs;
    MCEstimate t3;
    t3.n = static_cast<std::int64_t>(ctx.n_paths);
    t3.seed = ctx.seed;
    if (nw.loo.empty() || nw.degenerate) {
        // Too few paths near the level; the boundary term is below its sup bound.
        if (bound < 1e-6) {
            t3.mean = 0.0;
            t3.se = 0.0;
            rep.diagnostics.push_back({"boundary_bounded", 1.0});
        } else {
            t3.mean = -0.5 * rho * nw.value;
            t3.se = std::numeric_limits<double>::infinity();
            rep.degenerate = true;
        }
    } else {
        t3.mean = -0.5 * rho * nw.value;
        t3.se = 0.5 * rho * nw.se;
    }
    rep.rhs = t3;
    rep.diagnostics.push_back({"T1", t1.mean});
    rep.diagnostics.push_back({"T1_se", t1.se});
    rep.diagnostics.push_back({"T2", t2.mean});
    rep.diagnostics.push_back({"T2_se", t2.se});
    rep.diagnostics.push_back({"T3", t3.mean});
    rep.diagnostics.push_back({"boundary_term", -2.0 * t3.mean});
    rep.diagnostics.push_back({"boundary_sup_bound", bound});
    rep.finalize(z_score(rep.lhs, rep.rhs));
    return rep;
}

}  // namespace gsurf
