#pragma once

#include <cmath>
#include <string>
#include <string_view>

#include "gsurf/errors.hpp"

namespace gsurf {

class TimeGrid {
public:
    explicit TimeGrid(int n = 2000) : n_(n) {
        if (n < 2) throw GridError("time grid needs n >= 2 steps, got " + std::to_string(n));
    }

    int steps() const noexcept { return n_; }
    double dt() const noexcept { return 1.0 / n_; }
    double t(int i) const noexcept { return static_cast<double>(i) / n_; }
    // Midpoint of cell j = [t_j, t_{j+1}].
    double mid(int j) const noexcept { return (j + 0.5) / n_; }

    friend bool operator==(const TimeGrid&, const TimeGrid&) = default;

private:
    int n_;
};

enum class ProcessKind { bm, distorted, geometric, bridge, ou };

inline std::string_view to_string(ProcessKind k) noexcept {
    switch (k) {
        case ProcessKind::bm: return "bm";
        case ProcessKind::distorted: return "distorted";
        case ProcessKind::geometric: return "geometric";
        case ProcessKind::bridge: return "bridge";
        case ProcessKind::ou: return "ou";
    }
    return "?";
}

inline ProcessKind parse_process_kind(std::string_view s) {
    if (s == "bm") return ProcessKind::bm;
    if (s == "distorted") return ProcessKind::distorted;
    if (s == "geometric") return ProcessKind::geometric;
    if (s == "bridge") return ProcessKind::bridge;
    if (s == "ou") return ProcessKind::ou;
    throw ParameterError("unknown process '" + std::string(s) +
                         "' (expected bm, distorted, geometric, bridge or ou)");
}

struct ProcessSpec {
    ProcessKind kind = ProcessKind::bm;
    double b = 0.0;
    double sigma = 1.0;
    double a = 1.0;

    static ProcessSpec brownian() { return {}; }
    static ProcessSpec distorted(double b, double sigma) {
        return checked({ProcessKind::distorted, b, sigma, 1.0});
    }
    static ProcessSpec geometric(double b, double sigma) {
        return checked({ProcessKind::geometric, b, sigma, 1.0});
    }
    static ProcessSpec bridge() { return {ProcessKind::bridge, 0.0, 1.0, 1.0}; }
    static ProcessSpec ou(double a) { return checked({ProcessKind::ou, 0.0, 1.0, a}); }

    void validate() const {
        if (!std::isfinite(b) || !std::isfinite(sigma) || !std::isfinite(a))
            throw ParameterError("process parameters must be finite");
        if ((kind == ProcessKind::distorted || kind == ProcessKind::geometric) && !(sigma > 0))
            throw ParameterError("sigma must be > 0, got " + std::to_string(sigma));
        if (kind == ProcessKind::ou && !(a > 0))
            throw ParameterError("ou mean reversion a must be > 0, got " + std::to_string(a));
    }

    std::string name() const { return std::string(to_string(kind)); }

    // Start value of the process.
    double start() const noexcept { return kind == ProcessKind::geometric ? 1.0 : 0.0; }

    friend bool operator==(const ProcessSpec&, const ProcessSpec&) = default;

private:
    static ProcessSpec checked(ProcessSpec s) {
        s.validate();
        return s;
    }
};

}  // namespace gsurf
