#pragma once

// Exact reference computations that do not use the closed-form bias formulas:
// direct enumeration of binary cells, truncated summation over Poisson
// support, and adaptive quadrature over a normal outcome.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "collider_lab/error.hpp"
#include "collider_lab/math.hpp"
#include "collider_lab/model.hpp"

namespace collider_lab {

/// Conditional and unconditional OR/RR contrasting X = x + 1 with X = x.
struct BinaryEnumeration {
    double at_x = 0.0;
    /// P(Y = 1 | X = x + k), k = 0, 1.
    std::array<double, 2> p_y{};
    /// P(Y = 1 | X = x + k, S = 1).
    std::array<double, 2> p_y_selected{};
    double or_unconditional = 0.0;
    double or_conditional = 0.0;
    double rr_unconditional = 0.0;
    double rr_conditional = 0.0;

    double or_ratio() const { return or_conditional / or_unconditional; }
    double log_or_difference() const {
        return std::log(or_conditional) - std::log(or_unconditional);
    }
    double rr_bias() const { return rr_unconditional - rr_conditional; }
};

namespace oracle_detail {

inline double outcome_probability(const OutcomeModel& o, double x) {
    const double eta = o.beta0 + o.beta1.front() * x;
    if (o.kind == OutcomeKind::Logistic) return math::expit(eta);
    require(eta <= 0.0, "enumeration oracle: log-binomial P(Y = 1 | X = " + std::to_string(x) +
                            ") exceeds 1");
    return std::exp(eta);
}

inline double odds(double p) { return p / (1.0 - p); }

}  // namespace oracle_detail

/// Enumerates the (X, Y, S) cells at X in {x, x + 1}, Y in {0, 1} and forms
/// the odds and risk ratios with and without conditioning on S = 1.
inline BinaryEnumeration enumerate_binary_oracle(const OutcomeModel& outcome,
                                                 const ColliderModel& collider, double x = 0.0) {
    require(outcome.kind == OutcomeKind::Logistic || outcome.kind == OutcomeKind::LogBinomial,
            "enumeration oracle needs a logistic or log-binomial outcome");
    require(outcome.beta1.size() == 1, "enumeration oracle takes a single exposure");
    validate(collider);

    BinaryEnumeration r;
    r.at_x = x;
    for (int k = 0; k < 2; ++k) {
        const double xv = x + k;
        const double p1 = oracle_detail::outcome_probability(outcome, xv);
        const double s0 = collider.selection_probability(xv, 0.0);
        const double s1 = collider.selection_probability(xv, 1.0);
        for (double s : {s0, s1}) {
            if (!(s >= 0.0 && s <= 1.0)) {
                throw ValidationError("enumeration oracle: P(S = 1 | x = " + std::to_string(xv) +
                                      ") = " + std::to_string(s) + " outside [0, 1]");
            }
        }
        const double joint1 = p1 * s1;
        const double joint0 = (1.0 - p1) * s0;
        require(joint1 + joint0 > 0.0, "enumeration oracle: P(S = 1 | X) is zero");
        r.p_y[k] = p1;
        r.p_y_selected[k] = joint1 / (joint1 + joint0);
    }
    using oracle_detail::odds;
    r.or_unconditional = odds(r.p_y[1]) / odds(r.p_y[0]);
    r.or_conditional = odds(r.p_y_selected[1]) / odds(r.p_y_selected[0]);
    r.rr_unconditional = r.p_y[1] / r.p_y[0];
    r.rr_conditional = r.p_y_selected[1] / r.p_y_selected[0];
    return r;
}

/// E[Y | X = x, S = 1] and E[Y^2 | X = x, S = 1].
struct ConditionalMoments {
    double mean = 0.0;
    double second_moment = 0.0;
    double variance() const { return second_moment - mean * mean; }
};

struct PoissonOracleResult : ConditionalMoments {
    long truncation = 0;
    double tail_bound = 0.0;
};

/// Sums y P(S=1 | x, y) P(Y=y | x) over y = 0..K. Selection weights are used
/// as given (exp of the log-additive predictor) and are not capped at 1.
inline PoissonOracleResult poisson_oracle(const OutcomeModel& outcome,
                                          const ColliderModel& collider, double x = 0.0) {
    require(outcome.kind == OutcomeKind::Poisson, "poisson_oracle needs a Poisson outcome");
    require(collider.kind == ColliderKind::LogAdditive,
            "poisson_oracle needs a log-additive collider");
    require(outcome.beta1.size() == 1, "poisson_oracle takes a single exposure");

    const double log_lambda = outcome.beta0 + outcome.beta1.front() * x;
    const double tilt = collider.delta2 + collider.delta3 * x;
    if (log_lambda > 700.0 || log_lambda + tilt > 700.0) {
        throw NumericalError("poisson_oracle: rate overflow");
    }
    const double lambda = std::exp(log_lambda);
    const double kappa = std::exp(log_lambda + tilt);
    const double lam_star = std::max(lambda, kappa);
    const long K = static_cast<long>(std::ceil(lam_star + 40.0 * std::sqrt(lam_star) + 50.0));

    // log w(y) up to the constant d0 + d1 x - lambda, which cancels.
    auto log_w = [&](long y) {
        const double yd = static_cast<double>(y);
        return yd * (log_lambda + tilt) - std::lgamma(yd + 1.0);
    };
    // The mode of the tilted pmf is near floor(kappa); shift by its log weight.
    const long mode = std::min<long>(K, static_cast<long>(std::floor(kappa)));
    const double shift = log_w(mode);

    double s0 = 0.0;
    double s1 = 0.0;
    double s2 = 0.0;
    for (long y = K; y >= 0; --y) {  // small terms first
        const double w = std::exp(log_w(y) - shift);
        const double yd = static_cast<double>(y);
        s0 += w;
        s1 += yd * w;
        s2 += yd * yd * w;
    }

    // Beyond K successive weights shrink by kappa / (y + 1) <= kappa / (K + 1).
    const double ratio = kappa / static_cast<double>(K + 1);
    const double wk = std::exp(log_w(K) - shift);
    const double kd = static_cast<double>(K);
    double tail = std::numeric_limits<double>::infinity();
    if (ratio < 1.0) {
        // sum_{j>=1} (K+j)^2 r^j bounds sum_{y>K} y^2 w(y) / w(K), which in
        // turn dominates the mass and first-moment tails.
        const double q = 1.0 - ratio;
        const double g0 = ratio / q;
        const double g1 = ratio / (q * q);
        const double g2 = ratio * (1.0 + ratio) / (q * q * q);
        tail = wk * (kd * kd * g0 + 2.0 * kd * g1 + g2);
    }
    const double rel_tail = tail / s0;
    if (!(rel_tail < 1e-14)) {
        throw NumericalError("poisson_oracle: tail bound " + std::to_string(rel_tail) +
                             " not met at K = " + std::to_string(K));
    }

    PoissonOracleResult r;
    r.mean = s1 / s0;
    r.second_moment = s2 / s0;
    r.truncation = K;
    r.tail_bound = rel_tail;
    return r;
}

/// Integrates y P(S=1 | x, y) N(y; mu, sigma^2) with adaptive Gauss-Kronrod
/// over an interval covering both the outcome density and its exponential
/// tilt. Selection weights are not capped at 1.
inline ConditionalMoments gauss_oracle(const OutcomeModel& outcome, const ColliderModel& collider,
                                       double x = 0.0) {
    require(outcome.kind == OutcomeKind::Linear, "gauss_oracle needs a linear outcome");
    require(collider.kind == ColliderKind::LogAdditive,
            "gauss_oracle needs a log-additive collider");
    require(outcome.beta1.size() == 1, "gauss_oracle takes a single exposure");
    require(outcome.sigma > 0.0, "gauss_oracle: sigma must be > 0");

    const double mu = outcome.beta0 + outcome.beta1.front() * x;
    const double sigma = outcome.sigma;
    const double tilt = collider.delta2 + collider.delta3 * x;
    const double half_width = 12.0 * sigma + std::abs(tilt) * sigma * sigma;
    const double lo = -half_width;
    const double hi = half_width;

    // Work in u = y - mu. The exponent t u - u^2 / (2 sigma^2) peaks at
    // u = t sigma^2; subtracting that peak keeps the weights O(1).
    const double peak = 0.5 * tilt * tilt * sigma * sigma;
    auto weight = [&](double u) {
        return std::exp(tilt * u - 0.5 * (u / sigma) * (u / sigma) - peak);
    };

    using Integrator = boost::math::quadrature::gauss_kronrod<double, 61>;
    constexpr unsigned max_depth = 20;
    constexpr double rel_tol = 1e-14;
    double err0 = 0.0, err1 = 0.0, err2 = 0.0;
    const double z = Integrator::integrate(weight, lo, hi, max_depth, rel_tol, &err0);
    const double m1 = Integrator::integrate([&](double u) { return u * weight(u); }, lo, hi,
                                            max_depth, rel_tol, &err1);
    const double m2 = Integrator::integrate([&](double u) { return u * u * weight(u); }, lo, hi,
                                            max_depth, rel_tol, &err2);
    if (!(z > 0.0) || !std::isfinite(m1) || !std::isfinite(m2)) {
        throw NumericalError("gauss_oracle: quadrature produced a non-finite value");
    }
    // Absolute error in the conditional mean: d(m1/z) ~ err1/z + |m1| err0 / z^2.
    const double mean_err = err1 / z + std::abs(m1) * err0 / (z * z);
    if (!(mean_err < 1e-12 * std::max(1.0, half_width))) {
        throw NumericalError("gauss_oracle: quadrature did not converge (error estimate " +
                             std::to_string(mean_err) + ")");
    }
    const double c1 = m1 / z;
    ConditionalMoments r;
    r.mean = mu + c1;
    r.second_moment = mu * mu + 2.0 * mu * c1 + m2 / z;
    return r;
}

}  // namespace collider_lab
