#pragma once

// Closed-form collider bias under a log-additive selection model
//   log P(S = 1 | X, Y) = d0 + d1 X + d2 Y + d3 X Y
// (and, for the odds-ratio scale, under a logistic selection model).
//
// Contrasts are per unit increase from X = x to X = x + 1; x defaults to 0.

#include <cmath>
#include <string>

#include "collider_lab/error.hpp"
#include "collider_lab/math.hpp"
#include "collider_lab/model.hpp"

namespace collider_lab {

enum class BiasScale { LogOdds, OddsRatio, RiskRatioDifference, LinearCoef, LogRate };

inline std::string to_string(BiasScale s) {
    switch (s) {
        case BiasScale::LogOdds: return "log_odds";
        case BiasScale::OddsRatio: return "odds_ratio";
        case BiasScale::RiskRatioDifference: return "risk_ratio_difference";
        case BiasScale::LinearCoef: return "linear_coef";
        case BiasScale::LogRate: return "log_rate";
    }
    return "unknown";
}

struct BiasPrediction {
    BiasScale scale = BiasScale::LogOdds;
    double at_x = 0.0;
    double value = 0.0;
};

/// Bias in (intercept, slope) of a regression fitted on S = 1.
struct CoefficientBias {
    double intercept = 0.0;
    double slope = 0.0;
};

/// OR(X,Y | S=1) / OR(X,Y). Depends on the interaction alone.
inline double or_bias_logadditive(double delta3) { return std::exp(delta3); }

/// beta1^S - beta1 for a logistic outcome model.
inline double logistic_coef_bias(double delta3) { return delta3; }

/// (delta2 sigma^2, delta3 sigma^2): bias in the intercept and slope of a
/// linear outcome model with residual sd sigma.
inline CoefficientBias linear_coef_bias(double delta2, double delta3, double sigma) {
    require(sigma > 0.0, "linear_coef_bias: sigma must be > 0");
    const double v = sigma * sigma;
    return {delta2 * v, delta3 * v};
}

/// (delta2, delta3): the selected outcome is Poisson with log-rate shifted by
/// delta2 + delta3 x.
inline CoefficientBias poisson_coef_bias(double delta2, double delta3) { return {delta2, delta3}; }

namespace analytic_detail {

inline void check_binary_family(const OutcomeModel& outcome) {
    require(outcome.kind == OutcomeKind::LogBinomial || outcome.kind == OutcomeKind::Logistic,
            "risk-ratio formulas need a log-binomial or logistic outcome model");
    require(outcome.beta1.size() == 1, "risk-ratio formulas take a single exposure");
}

inline void check_log_binomial_domain(const OutcomeModel& outcome, double x) {
    if (outcome.kind != OutcomeKind::LogBinomial) return;
    const double b1 = outcome.beta1.front();
    require(outcome.beta0 + b1 * x <= 0.0 && outcome.beta0 + b1 * (x + 1.0) <= 0.0,
            "log-binomial outcome: P(Y = 1 | X) exceeds 1 at the evaluation points");
}

/// Log-binomial: RR^S / RR = num / den, with
///   num = e^{a} P(Y=1 | x) + e^{d3} P(Y=0 | x),  den = e^{a} P(Y=1 | x+1) + P(Y=0 | x+1).
struct LogBinomialParts {
    double den;
    double den_minus_num;
};

inline LogBinomialParts log_binomial_parts(const OutcomeModel& o, const ColliderModel& c,
                                           double x) {
    const double b1 = o.beta1.front();
    const double eta0 = o.beta0 + b1 * x;
    const double eta1 = o.beta0 + b1 * (x + 1.0);
    const double a = c.delta2 + c.delta3 * (x + 1.0);
    const double den = std::exp(eta1 + a) - std::expm1(eta1);
    // den - num regrouped so the stated null cases cancel exactly.
    const double diff = std::exp(eta1) * std::expm1(a) -
                        std::exp(eta0) * (std::exp(c.delta3) * std::expm1(a - c.delta3)) -
                        std::expm1(c.delta3);
    return {den, diff};
}

/// Logistic outcome: log(RR^S / RR).
inline double logistic_log_rr_ratio(const OutcomeModel& o, const ColliderModel& c, double x) {
    const double b1 = o.beta1.front();
    const double eta0 = o.beta0 + b1 * x;
    const double eta1 = o.beta0 + b1 * (x + 1.0);
    const double a = c.delta2 + c.delta3 * (x + 1.0);
    return (math::log1p_exp(eta1) - math::log1p_exp(a + eta1)) +
           (math::log_sum_exp(a + eta0, c.delta3) - math::log1p_exp(eta0));
}

}  // namespace analytic_detail

/// Unconditional RR(x) = P(Y=1 | X=x+1) / P(Y=1 | X=x).
inline double rr_unconditional(const OutcomeModel& outcome, double x = 0.0) {
    analytic_detail::check_binary_family(outcome);
    analytic_detail::check_log_binomial_domain(outcome, x);
    const double b1 = outcome.beta1.front();
    if (outcome.kind == OutcomeKind::LogBinomial) return std::exp(b1);
    const double eta0 = outcome.beta0 + b1 * x;
    const double eta1 = outcome.beta0 + b1 * (x + 1.0);
    return std::exp(b1 + math::log1p_exp(eta0) - math::log1p_exp(eta1));
}

/// RR(x) - RR(x | S = 1). Exactly 0 when delta2 = delta3 = 0, and when
/// beta1 = delta3 = 0.
inline double rr_bias(const OutcomeModel& outcome, const ColliderModel& collider, double x = 0.0) {
    const double rr = rr_unconditional(outcome, x);
    if (outcome.kind == OutcomeKind::LogBinomial) {
        const auto parts = analytic_detail::log_binomial_parts(outcome, collider, x);
        return rr * parts.den_minus_num / parts.den;
    }
    return -rr * std::expm1(analytic_detail::logistic_log_rr_ratio(outcome, collider, x));
}

/// Conditional RR(x | S = 1) under a log-additive collider, for a
/// log-binomial or logistic outcome model.
inline double rr_conditional(const OutcomeModel& outcome, const ColliderModel& collider,
                             double x = 0.0) {
    return rr_unconditional(outcome, x) - rr_bias(outcome, collider, x);
}

/// log OR(x | S = 1) - log OR(x) for a logistic outcome when selection itself
/// follows a logistic model in (X, Y, XY). Reduces to delta3 as d0 -> -inf.
inline double logistic_collider_or_bias(const ColliderModel& c, double x = 0.0) {
    const double base0 = c.delta0 + c.delta1 * x;
    const double base1 = c.delta0 + c.delta1 * (x + 1.0);
    const double with_y0 = base0 + c.delta2 + c.delta3 * x;
    const double with_y1 = base1 + c.delta2 + c.delta3 * (x + 1.0);
    return c.delta3 + (math::log1p_exp(base1) - math::log1p_exp(with_y1)) +
           (math::log1p_exp(with_y0) - math::log1p_exp(base0));
}

}  // namespace collider_lab
