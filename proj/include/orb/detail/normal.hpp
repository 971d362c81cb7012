#pragma once

#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

namespace orb::detail {

inline constexpr double kInvSqrt2 = 0.70710678118654752440;
inline constexpr double kLogSqrt2Pi = 0.91893853320467274178;

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

/// Upper tail 1 - Phi(x), accurate for large positive x.
inline double norm_sf(double x) { return 0.5 * std::erfc(x * kInvSqrt2); }

inline double norm_pdf(double x) {
    return std::exp(-0.5 * x * x - kLogSqrt2Pi);
}

inline double norm_logpdf(double x, double mean, double var) {
    const double r = x - mean;
    return -0.5 * (std::log(var) + r * r / var) - kLogSqrt2Pi;
}

/// log Phi(x); -inf once erfc underflows (x below about -38).
inline double norm_logcdf(double x) {
    if (x > 5.0) return std::log1p(-norm_sf(x));
    return std::log(norm_cdf(x));
}

/// Phi(b) - Phi(a) for a <= b, evaluated on whichever tail keeps precision.
inline double norm_interval(double a, double b) {
    if (a >= b) return 0.0;
    if (a > 0.0) return norm_sf(a) - norm_sf(b);
    if (b < 0.0) return norm_cdf(b) - norm_cdf(a);
    return 1.0 - norm_cdf(a) - norm_sf(b);
}

inline double norm_quantile(double p) {
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

/// Half the chi-square(1) quantile: the log-likelihood drop defining a profile interval.
inline double profile_drop(double level) {
    return 0.5 * boost::math::quantile(boost::math::chi_squared_distribution<double>(1.0), level);
}

} // namespace orb::detail
