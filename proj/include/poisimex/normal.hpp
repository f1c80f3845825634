#pragma once

#include <cmath>
#include <numbers>

namespace poisimex::normal {

inline constexpr double log_sqrt_2pi = 0.91893853320467274178;

inline double log_pdf(double z) { return -0.5 * z * z - log_sqrt_2pi; }

inline double cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// Upper tail 1 - Phi(z), accurate for large positive z.
inline double sf(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

namespace detail {

// Phi(-z) / phi(z) for z > 26, asymptotic series (relative error < 1e-12 there).
inline double mills_ratio_tail(double z) {
    const double r = 1.0 / (z * z);
    return (1.0 / z) * (1.0 - r * (1.0 - 3.0 * r * (1.0 - 5.0 * r * (1.0 - 7.0 * r * (1.0 - 9.0 * r)))));
}

}  // namespace detail

/// log(1 - Phi(z)).
inline double log_sf(double z) {
    if (z < -8.0) return std::log1p(-sf(-z));
    if (z <= 26.0) return std::log(sf(z));
    return log_pdf(z) + std::log(detail::mills_ratio_tail(z));
}

/// Hazard of the standard normal, phi(z) / (1 - Phi(z)).
inline double hazard(double z) {
    if (z <= 26.0) return std::exp(log_pdf(z) - log_sf(z));
    return 1.0 / detail::mills_ratio_tail(z);
}

/// Two-sided p-value of a standard-normal statistic.
inline double two_sided_p(double z) { return std::erfc(std::abs(z) / std::numbers::sqrt2); }

}  // namespace poisimex::normal
