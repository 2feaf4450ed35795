#pragma once

// Scalar helpers shared by the GLM engine, the generators and the closed-form
// bias formulas. Everything that touches odds or risks goes through the
// log-space forms here.

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>

namespace collider_lab::math {

/// log(exp(a) + exp(b)) without overflow.
inline double log_sum_exp(double a, double b) {
    const double hi = std::max(a, b);
    const double lo = std::min(a, b);
    if (hi == -INFINITY) return -INFINITY;
    return hi + std::log1p(std::exp(lo - hi));
}

/// log(1 + exp(x)). Defined through log_sum_exp so that the two agree bit for
/// bit, which the exact-zero null cases of the risk-ratio formulas rely on.
inline double log1p_exp(double x) { return log_sum_exp(x, 0.0); }

inline double expit(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

inline double normal_pdf(double z) {
    return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

/// Standard normal CDF through erfc, accurate in both tails.
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// log Phi(z); falls back to the Mills-ratio expansion deep in the lower tail.
inline double log_normal_cdf(double z) {
    if (z > -30.0) return std::log(normal_cdf(z));
    const double z2 = z * z;
    return -0.5 * z2 - std::log(-z) - 0.5 * std::log(2.0 * std::numbers::pi) +
           std::log1p(-1.0 / z2 + 3.0 / (z2 * z2));
}

inline double normal_quantile(double p) {
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

}  // namespace collider_lab::math
