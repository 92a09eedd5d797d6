#pragma once

#include <cmath>
#include <numbers>

namespace gsurf {

inline double erfc(double x) noexcept { return std::erfc(x); }

inline double normal_pdf(double x) noexcept {
    return std::exp(-0.5 * x * x) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
}

inline double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

}  // namespace gsurf
