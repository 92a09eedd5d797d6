#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "gsurf/errors.hpp"
#include "gsurf/path_engine.hpp"
#include "gsurf/process.hpp"

namespace gsurf {

inline constexpr double kGammaFloor = 1e-12;

// Cell values of the L2(0,1) kernel k of MF, so that DF.z = sum_j k_j h_j / n.
struct MalliavinKernel {
    std::vector<double> values;

    double pair(std::span<const double> h) const {
        double s = 0.0;
        const double n = static_cast<double>(values.size());
        for (std::size_t j = 0; j < values.size(); ++j) s += values[j] * h[j];
        return s / n;
    }
    double integral() const {
        double s = 0.0;
        for (double v : values) s += v;
        return s / static_cast<double>(values.size());
    }
};

// Cell average of 1_{[0,tau]} on cell j.
inline double indicator_fraction(double tau, int j, int n) {
    return std::clamp(tau * n - j, 0.0, 1.0);
}

inline MalliavinKernel malliavin_kernel_of_extremum(const ProcessSpec& spec, const PathSample& path,
                                                    const ExtremumRecord& rec) {
    const int n = path.grid.steps();
    MalliavinKernel k;
    k.values.resize(n);
    const double tau = rec.tau;
    for (int j = 0; j < n; ++j) {
        const double ind = indicator_fraction(tau, j, n);
        switch (spec.kind) {
            case ProcessKind::bm: k.values[j] = ind; break;
            case ProcessKind::distorted: k.values[j] = spec.sigma * ind; break;
            case ProcessKind::geometric: k.values[j] = spec.sigma * rec.value * ind; break;
            case ProcessKind::bridge: k.values[j] = ind - tau; break;
            case ProcessKind::ou:
                k.values[j] = ind > 0.0 ? std::exp(-spec.a * (tau - path.grid.mid(j))) * ind : 0.0;
                break;
        }
    }
    return k;
}

class CutoffSpec {
public:
    explicit CutoffSpec(double a) : a_(a) {
        if (!(a > 0) || !std::isfinite(a)) throw ParameterError("cutoff threshold a must be > 0");
    }
    double a() const noexcept { return a_; }

private:
    double a_;
};

// Quintic smoothstep: 1 on (-inf, a/2], 0 on [a, inf). Returns (psi, psi').
inline std::pair<double, double> cutoff_psi(const CutoffSpec& c, double r) {
    const double half = 0.5 * c.a();
    const double x = std::clamp((r - half) / half, 0.0, 1.0);
    const double x2 = x * x;
    const double psi = 1.0 - x2 * x * (10.0 - 15.0 * x + 6.0 * x2);
    const double dpsi = -30.0 * x2 * (1.0 - 2.0 * x + x2) / half;
    return {psi, dpsi};
}

enum class CutoffArgument { running_max, process };

struct HypothesisFields {
    std::vector<double> u;  // cells, left-point rule
    double gamma = 0.0;
};

namespace detail {

inline void require_hypothesis_process(const ProcessSpec& spec) {
    if (spec.kind == ProcessKind::bridge || spec.kind == ProcessKind::ou)
        throw UnsupportedError("no local Malliavin fields are available for the " + spec.name() +
                               " process");
}

// gamma = factor * sum_t psi(.)/n
inline double gamma_factor(const ProcessSpec& spec, std::span<const double> values) {
    switch (spec.kind) {
        case ProcessKind::distorted: return spec.sigma;
        case ProcessKind::geometric:
            return spec.sigma * *std::max_element(values.begin(), values.end());
        default: return 1.0;
    }
}

}  // namespace detail

inline HypothesisFields hypothesis_fields(const ProcessSpec& spec, const PathSample& path,
                                          const CutoffSpec& cutoff,
                                          CutoffArgument arg = CutoffArgument::running_max) {
    detail::require_hypothesis_process(spec);
    const int n = path.grid.steps();
    HypothesisFields hf;
    hf.u.resize(n);
    double running = path.values[0];
    double sum = 0.0;
    for (int j = 0; j < n; ++j) {
        running = std::max(running, path.values[j]);
        const double s = arg == CutoffArgument::running_max ? running : path.values[j];
        hf.u[j] = cutoff_psi(cutoff, s).first;
        sum += hf.u[j];
    }
    hf.gamma = detail::gamma_factor(spec, path.values) * sum / n;
    return hf;
}

// <Mg, u> - gamma for the unrefined running maximum; zero on {g > a}.
inline double verify_local_identity(const ProcessSpec& spec, const PathSample& path,
                                    const CutoffSpec& cutoff,
                                    CutoffArgument arg = CutoffArgument::running_max) {
    detail::require_hypothesis_process(spec);
    const ExtremumRecord rec = extremum(spec, path, ExtremumKind::max, false);
    if (!(rec.value > cutoff.a()))
        throw PreconditionError("local identity is only claimed on paths with max > a");
    const auto k = malliavin_kernel_of_extremum(spec, path, rec);
    const auto hf = hypothesis_fields(spec, path, cutoff, arg);
    return k.pair(hf.u) - hf.gamma;
}

inline double skorokhod_adapted(std::span<const double> v, const PathSample& path) {
    double s = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) s += v[j] * path.driving[j];
    return s;
}

// M*(F v) = F M*(v) - <MF, v> for adapted v.
inline double skorokhod_product(double F, const MalliavinKernel& MF, std::span<const double> v,
                                const PathSample& path) {
    return F * skorokhod_adapted(v, path) - MF.pair(v);
}

// <M gamma, v> in one pass: the kernel of M S(t) is c_t 1_{[0, tau_t]} with
// tau_t the running argmax, so each node contributes psi'(S_t) c_t V(tau_t)/n
// where V is the prefix integral of v.
inline double pair_gamma_kernel(const ProcessSpec& spec, const PathSample& path,
                                const CutoffSpec& cutoff, std::span<const double> v,
                                CutoffArgument arg = CutoffArgument::running_max) {
    detail::require_hypothesis_process(spec);
    const int n = path.grid.steps();
    std::vector<double> prefix(n + 1, 0.0);
    for (int j = 0; j < n; ++j) prefix[j + 1] = prefix[j] + v[j] / n;
    const double factor = detail::gamma_factor(spec, path.values);
    double running = path.values[0];
    int arg_idx = 0;
    double psi_sum = 0.0;
    double acc = 0.0;
    for (int t = 0; t < n; ++t) {
        if (path.values[t] > running) {
            running = path.values[t];
            arg_idx = t;
        }
        const bool use_max = arg == CutoffArgument::running_max;
        const double s = use_max ? running : path.values[t];
        const auto [psi, dpsi] = cutoff_psi(cutoff, s);
        psi_sum += psi;
        // M of the cutoff argument: running max uses tau_t, the process uses t.
        const int idx = use_max ? arg_idx : t;
        double c = 1.0;
        if (spec.kind == ProcessKind::distorted) c = spec.sigma;
        if (spec.kind == ProcessKind::geometric) c = spec.sigma * s;
        acc += dpsi * c * prefix[idx];
    }
    double out = factor * acc / n;
    if (spec.kind == ProcessKind::geometric) {
        // d(sigma S_X(1)) contributes sigma^2 S_X(1) 1_{[0,tau]} times sum psi / n.
        const auto rec = grid_extremum(path.values, ExtremumKind::max);
        out += spec.sigma * spec.sigma * rec.value * prefix[rec.grid_index] * psi_sum / n;
    }
    return out;
}

struct LemmaIntegrand {
    double value = 0.0;     // M*(phi u / gamma)
    bool excluded = false;  // gamma below the floor
    double gamma = 0.0;
};

// M*(phi u/gamma) = (phi/gamma) M*u - <M phi, u>/gamma + phi <M gamma, u>/gamma^2.
// `phi_pair_u` is <M phi, u>.
inline LemmaIntegrand lemma_integrand(const ProcessSpec& spec, const PathSample& path,
                                      const CutoffSpec& cutoff, double phi, double phi_pair_u,
                                      CutoffArgument arg = CutoffArgument::running_max) {
    const auto hf = hypothesis_fields(spec, path, cutoff, arg);
    LemmaIntegrand out;
    out.gamma = hf.gamma;
    if (hf.gamma < kGammaFloor) {
        out.excluded = true;
        return out;
    }
    const double mg = pair_gamma_kernel(spec, path, cutoff, hf.u, arg);
    const double inv = 1.0 / hf.gamma;
    out.value = phi * inv * skorokhod_adapted(hf.u, path) - phi_pair_u * inv + phi * mg * inv * inv;
    return out;
}

// M*((F/gamma) v) where `MF` is already the kernel of F/gamma; raises
// instead of dropping the path when gamma is below the floor.
inline double skorokhod_over_gamma(double F, const MalliavinKernel& MF, std::span<const double> v,
                                   double gamma, const PathSample& path) {
    if (gamma < kGammaFloor)
        throw SingularityError("gamma below 1e-12 where M*(v/gamma) was requested");
    return skorokhod_product(F / gamma, MF, v, path);
}

}  // namespace gsurf
