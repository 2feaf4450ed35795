#pragma once

// Sampling of (X, Y, S) under the outcome and collider laws, and calibration
// of the selection intercept (or thresholds) to a target selection fraction.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/tools/toms748_solve.hpp>

#include "collider_lab/error.hpp"
#include "collider_lab/math.hpp"
#include "collider_lab/model.hpp"
#include "collider_lab/parallel.hpp"
#include "collider_lab/rng.hpp"

namespace collider_lab {

namespace detail {

/// Poisson variate. Inversion for small rates, Hormann's PTRS otherwise.
inline double sample_poisson(rng::RowStream& rs, double lambda) {
    if (lambda < 30.0) {
        const double u = rs.uniform();
        double p = std::exp(-lambda);
        double cdf = p;
        double k = 0.0;
        while (u > cdf && k < 1000.0) {
            k += 1.0;
            p *= lambda / k;
            cdf += p;
        }
        return k;
    }
    const double slam = std::sqrt(lambda);
    const double loglam = std::log(lambda);
    const double b = 0.931 + 2.53 * slam;
    const double a = -0.059 + 0.02483 * b;
    const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    const double vr = 0.9277 - 3.6224 / (b - 2.0);
    for (;;) {
        const double u = rs.uniform() - 0.5;
        const double v = rs.uniform();
        const double us = 0.5 - std::fabs(u);
        const double k = std::floor((2.0 * a / us + b) * u + lambda + 0.43);
        if (us >= 0.07 && v <= vr) return k;
        if (k < 0.0 || (us < 0.013 && v > us)) continue;
        if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
            -lambda + k * loglam - std::lgamma(k + 1.0)) {
            return k;
        }
    }
}

}  // namespace detail

inline std::vector<double> gen_exposure(const ExposureSpec& spec, std::size_t n,
                                        const SeedSpec& seed, std::size_t threads = 1) {
    validate(spec);
    require(n >= 1, "gen_exposure: n must be >= 1");
    std::vector<double> x(n);
    const rng::StreamGenerator gen(seed);
    parallel_ranges(n, threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            auto rs = gen.row(i);
            x[i] = spec.kind == ExposureKind::Bernoulli ? (rs.uniform() < spec.p ? 1.0 : 0.0)
                                                        : spec.mean + spec.sd * rs.normal();
        }
    });
    return x;
}

/// Multi-exposure outcome draw; xs[j][i] is exposure j of row i.
inline std::vector<double> gen_outcome(const OutcomeModel& model,
                                       const std::vector<std::span<const double>>& xs,
                                       const SeedSpec& seed, std::size_t threads = 1) {
    validate(model, xs.size());
    require(!xs.empty(), "gen_outcome: at least one exposure column is required");
    const std::size_t n = xs.front().size();
    for (const auto& col : xs) require(col.size() == n, "gen_outcome: exposure length mismatch");
    std::vector<double> y(n);
    const rng::StreamGenerator gen(seed);
    parallel_ranges(n, threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            double eta = model.beta0;
            for (std::size_t j = 0; j < xs.size(); ++j) eta += model.beta1[j] * xs[j][i];
            if (!std::isfinite(eta)) {
                throw ValidationError("gen_outcome: non-finite linear predictor at row " +
                                      std::to_string(i));
            }
            auto rs = gen.row(i);
            switch (model.kind) {
                case OutcomeKind::Logistic: y[i] = rs.uniform() < math::expit(eta) ? 1.0 : 0.0; break;
                case OutcomeKind::Linear: y[i] = eta + model.sigma * rs.normal(); break;
                case OutcomeKind::Poisson:
                    if (eta > 700.0) {
                        throw NumericalError("gen_outcome: Poisson rate overflow at row " +
                                             std::to_string(i) + " (log rate " +
                                             std::to_string(eta) + " > 700)");
                    }
                    y[i] = detail::sample_poisson(rs, std::exp(eta));
                    break;
                case OutcomeKind::LogBinomial:
                    if (eta > 0.0) {
                        throw ValidationError("gen_outcome: log-binomial probability > 1 at row " +
                                              std::to_string(i));
                    }
                    y[i] = rs.uniform() < std::exp(eta) ? 1.0 : 0.0;
                    break;
            }
        }
    });
    return y;
}

inline std::vector<double> gen_outcome(const OutcomeModel& model, std::span<const double> x,
                                       const SeedSpec& seed, std::size_t threads = 1) {
    return gen_outcome(model, std::vector<std::span<const double>>{x}, seed, threads);
}

inline std::vector<double> gen_collider(const ColliderModel& model, std::span<const double> x,
                                        std::span<const double> y, const SeedSpec& seed,
                                        std::size_t threads = 1) {
    validate(model);
    require(x.size() == y.size(), "gen_collider: x and y must have the same length");
    std::vector<double> s(x.size());
    const rng::StreamGenerator gen(seed);
    parallel_ranges(x.size(), threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const double eta = model.linear_predictor(x[i], y[i]);
            auto rs = gen.row(i);
            bool selected = false;
            switch (model.kind) {
                case ColliderKind::LogAdditive:
                    if (eta > 0.0) {
                        std::ostringstream msg;
                        msg << "gen_collider: log-additive selection probability exp(" << eta
                            << ") > 1 at row " << i << " (x = " << x[i] << ", y = " << y[i] << ")";
                        throw ValidationError(msg.str());
                    }
                    selected = rs.uniform() < std::exp(eta);
                    break;
                case ColliderKind::Logistic: selected = rs.uniform() < math::expit(eta); break;
                case ColliderKind::Probit: selected = eta + model.latent_sd * rs.normal() > 0.0; break;
                case ColliderKind::DoubleThreshold: {
                    const double latent = eta + model.latent_sd * rs.normal();
                    selected = latent < model.r_lower || latent > model.r_upper;
                    break;
                }
            }
            s[i] = selected ? 1.0 : 0.0;
        }
    });
    return s;
}

/// Draws a full (x, y, s) dataset for a validated scenario. Streams are
/// seed.child("exposure"), seed.child("outcome"), seed.child("collider").
inline Dataset simulate(const Scenario& scenario, std::size_t n, const SeedSpec& seed,
                        std::size_t threads = 1) {
    auto x = gen_exposure(scenario.exposure(), n, seed.child("exposure"), threads);
    auto y = gen_outcome(scenario.outcome(), x, seed.child("outcome"), threads);
    auto s = gen_collider(scenario.collider(), x, y, seed.child("collider"), threads);
    Dataset d;
    d.add_column("x", std::move(x));
    d.add_column("y", std::move(y));
    d.add_column("s", std::move(s));
    return d;
}

// ---------------------------------------------------------------------------
// Calibration

struct CalibrationOptions {
    std::size_t sample_size = 1'000'000;
    SeedSpec seed{0, "calibration"};
    double tolerance = 0.002;
    double delta0_lo = -20.0;
    double delta0_hi = 20.0;
};

namespace detail {

/// Empirical quantile, linear interpolation between order statistics.
inline double quantile(std::vector<double>& v, double p) {
    const double h = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(lo), v.end());
    const double a = v[lo];
    if (lo + 1 >= v.size()) return a;
    const double b = *std::min_element(v.begin() + static_cast<std::ptrdiff_t>(lo) + 1, v.end());
    return a + (h - static_cast<double>(lo)) * (b - a);
}

/// Collapses repeated values into (value, multiplicity) pairs when that
/// shrinks the sample substantially (binary or count outcomes).
inline std::vector<std::pair<double, double>> compress(std::vector<double> v) {
    std::vector<std::pair<double, double>> out;
    std::vector<double> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (double a : sorted) {
        if (!out.empty() && out.back().first == a) {
            out.back().second += 1.0;
        } else {
            out.emplace_back(a, 1.0);
            if (out.size() > v.size() / 4) break;
        }
    }
    if (out.size() > v.size() / 4) {
        out.clear();
        for (double a : v) out.emplace_back(a, 1.0);
    }
    return out;
}

}  // namespace detail

/// Returns `model` with delta0 (LogAdditive, Logistic, Probit) or the two
/// thresholds (DoubleThreshold) set so the selection fraction on a fixed
/// calibration sample equals `target`. DoubleThreshold places target/2 of the
/// latent mass in each tail; delta0 is left as given.
inline ColliderModel calibrate_selection(const ColliderModel& model, const ExposureSpec& exposure,
                                         const OutcomeModel& outcome, double target,
                                         const CalibrationOptions& options = {}) {
    validate(model);
    validate(exposure);
    validate(outcome, 1);
    require(target > 0.01 && target < 0.99, "calibrate_selection: target must lie in (0.01, 0.99)");
    require(options.sample_size >= 100, "calibrate_selection: calibration sample too small");

    const auto x = gen_exposure(exposure, options.sample_size, options.seed.child("exposure"));
    const auto y = gen_outcome(outcome, x, options.seed.child("outcome"));
    const std::size_t n = x.size();

    ColliderModel out = model;
    if (model.kind == ColliderKind::DoubleThreshold) {
        const rng::StreamGenerator gen(options.seed.child("latent"));
        std::vector<double> latent(n);
        for (std::size_t i = 0; i < n; ++i) {
            latent[i] = model.linear_predictor(x[i], y[i]) + model.latent_sd * gen.row(i).normal();
        }
        std::vector<double> work = latent;
        out.r_lower = detail::quantile(work, target / 2.0);
        out.r_upper = detail::quantile(work, 1.0 - target / 2.0);
        std::size_t hits = 0;
        for (double l : latent) hits += (l < out.r_lower || l > out.r_upper);
        const double achieved = static_cast<double>(hits) / static_cast<double>(n);
        if (std::fabs(achieved - target) > options.tolerance || !(out.r_lower < out.r_upper)) {
            throw NumericalError("calibrate_selection: threshold calibration missed target");
        }
        return out;
    }

    std::vector<double> lin(n);
    for (std::size_t i = 0; i < n; ++i) {
        lin[i] = model.delta1 * x[i] + model.delta2 * y[i] + model.delta3 * x[i] * y[i];
    }
    const auto support = detail::compress(std::move(lin));

    auto fraction = [&](double d0) {
        double acc = 0.0;
        for (const auto& [l, w] : support) {
            const double eta = d0 + l;
            double p = 0.0;
            switch (model.kind) {
                case ColliderKind::LogAdditive: p = std::exp(eta); break;
                case ColliderKind::Logistic: p = math::expit(eta); break;
                case ColliderKind::Probit: p = math::normal_cdf(eta / model.latent_sd); break;
                case ColliderKind::DoubleThreshold: break;
            }
            acc += w * p;
        }
        return acc / static_cast<double>(n);
    };

    const double f_lo = fraction(options.delta0_lo) - target;
    const double f_hi = fraction(options.delta0_hi) - target;
    if (!(f_lo < 0.0 && f_hi > 0.0)) {
        throw NumericalError("calibrate_selection: target " + std::to_string(target) +
                             " not bracketed for delta0 in [" + std::to_string(options.delta0_lo) +
                             ", " + std::to_string(options.delta0_hi) + "]");
    }
    std::uintmax_t max_iter = 200;
    const auto [a, b] = boost::math::tools::toms748_solve(
        [&](double d0) { return fraction(d0) - target; }, options.delta0_lo, options.delta0_hi,
        f_lo, f_hi, boost::math::tools::eps_tolerance<double>(48), max_iter);
    out.delta0 = 0.5 * (a + b);
    if (std::fabs(fraction(out.delta0) - target) > options.tolerance) {
        throw NumericalError("calibrate_selection: root finder did not reach the target fraction");
    }
    if (model.kind == ColliderKind::LogAdditive) {
        validate_log_additive_support(out, exposure_support(exposure), outcome_support(outcome));
    }
    return out;
}

}  // namespace collider_lab
