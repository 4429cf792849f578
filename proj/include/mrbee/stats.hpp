#ifndef MRBEE_STATS_HPP
#define MRBEE_STATS_HPP

#include <cmath>
#include <numbers>

namespace mrbee::stats {

inline double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

/// Two-sided p-value 2*(1 - Phi(|z|)), computed through erfc so tiny
/// p-values keep their precision.
inline double two_sided_normal_pvalue(double z) {
    return std::erfc(std::abs(z) / std::numbers::sqrt2);
}

/// Upper tail of the chi-square distribution with one degree of freedom.
inline double chi2_1_sf(double t) {
    if (t <= 0.0) return 1.0;
    return std::erfc(std::sqrt(0.5 * t));
}

}  // namespace mrbee::stats

#endif  // MRBEE_STATS_HPP
