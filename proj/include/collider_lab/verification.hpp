#pragma once

// Equivalence grid: closed-form bias expressions against the enumeration,
// Poisson-summation and quadrature oracles. Used by the `oracle` subcommand
// and the acceptance binary.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "collider_lab/analytic.hpp"
#include "collider_lab/config.hpp"
#include "collider_lab/csv.hpp"
#include "collider_lab/model.hpp"
#include "collider_lab/oracles.hpp"

namespace collider_lab {

struct VerificationRow {
    std::string check;
    std::string params;
    double analytic = 0.0;
    double oracle = 0.0;
    /// |analytic - oracle|, divided by |oracle| for relative checks.
    double deviation = 0.0;
    /// 0 means exact equality is required.
    double tolerance = 0.0;
    bool pass = false;
};

struct VerificationGrid {
    std::vector<VerificationRow> rows;

    std::size_t count(const std::string& check) const {
        return static_cast<std::size_t>(std::count_if(
            rows.begin(), rows.end(), [&](const VerificationRow& r) { return r.check == check; }));
    }
    bool all_pass(const std::string& check) const {
        return std::all_of(rows.begin(), rows.end(),
                           [&](const VerificationRow& r) { return r.check != check || r.pass; });
    }
    bool all_pass() const {
        return std::all_of(rows.begin(), rows.end(), [](const VerificationRow& r) { return r.pass; });
    }
    double max_deviation(const std::string& check = {}) const {
        double m = 0.0;
        for (const auto& r : rows) {
            if (check.empty() || r.check == check) m = std::max(m, r.deviation);
        }
        return m;
    }
};

namespace verification_detail {

inline std::string describe(const char* fmt, auto... args) {
    char buf[256];
    std::snprintf(buf, sizeof buf, fmt, args...);
    return buf;
}

inline void add(VerificationGrid& g, std::string check, std::string params, double analytic,
                double oracle, double tolerance, bool relative = false) {
    double dev = std::abs(analytic - oracle);
    if (relative) dev /= std::abs(oracle);
    const bool pass = tolerance == 0.0 ? analytic == oracle : dev <= tolerance;
    g.rows.push_back({std::move(check), std::move(params), analytic, oracle, dev, tolerance,
                      pass && std::isfinite(dev)});
}

inline std::vector<double> steps(double lo, double hi, int count) {
    std::vector<double> v(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        v[static_cast<std::size_t>(i)] = std::round((lo + (hi - lo) * i / (count - 1)) * 1e9) / 1e9;
    }
    return v;
}

}  // namespace verification_detail

inline constexpr double kExactTolerance = 1e-12;
inline constexpr double kOracleTolerance = 1e-9;

/// Binary exposure and outcome, log-additive collider: odds-ratio factor and
/// risk-ratio bias against enumeration, plus the exact null cases.
inline void add_binary_checks(VerificationGrid& g) {
    using namespace verification_detail;
    const double d0 = -1.5, d1 = 0.3;
    for (auto kind : {OutcomeKind::Logistic, OutcomeKind::LogBinomial}) {
        for (double b0 : {-2.0, -1.0}) {
            for (double b1 : steps(-0.3, 0.3, 7)) {
                const OutcomeModel o{kind, b0, {b1}, 1.0};
                for (double d2 : steps(-0.5, 0.5, 11)) {
                    for (double d3 : steps(-0.5, 0.5, 11)) {
                        const auto c = ColliderModel::log_additive(d0, d1, d2, d3);
                        const auto e = enumerate_binary_oracle(o, c, 0.0);
                        const auto p = describe("%s b0=%g b1=%g d0=%g d1=%g d2=%g d3=%g",
                                                to_string(kind).c_str(), b0, b1, d0, d1, d2, d3);
                        add(g, "or_factor", p, or_bias_logadditive(d3), e.or_ratio(), kExactTolerance);
                        add(g, "rr_conditional", p, rr_conditional(o, c), e.rr_conditional,
                            kExactTolerance);
                        add(g, "rr_bias", p, rr_bias(o, c), e.rr_bias(), kExactTolerance);
                        if ((d2 == 0.0 && d3 == 0.0) || (b1 == 0.0 && d3 == 0.0)) {
                            add(g, "rr_bias_null", p, rr_bias(o, c), 0.0, 0.0);
                        }
                    }
                }
            }
        }
    }
}

/// Logistic collider: closed-form log odds-ratio bias against enumeration.
inline void add_logistic_collider_checks(VerificationGrid& g) {
    using namespace verification_detail;
    const auto o = OutcomeModel::logistic(0.0, 0.2);
    for (double d0 : {-3.0, -1.5, -0.5, 0.5}) {
        for (double d2 : steps(-0.5, 0.5, 5)) {
            for (double d3 : steps(-0.5, 0.5, 5)) {
                const auto c = ColliderModel::logistic(d0, 0.3, d2, d3);
                const auto p = describe("d0=%g d1=0.3 d2=%g d3=%g", d0, d2, d3);
                add(g, "logistic_collider", p, logistic_collider_or_bias(c),
                    enumerate_binary_oracle(o, c).log_or_difference(), kExactTolerance);
                if (d2 == 0.0 && d3 == 0.0) {
                    add(g, "logistic_collider_null", p, logistic_collider_or_bias(c), 0.0, 0.0);
                }
            }
        }
    }
}

/// Linear outcome: selected-sample slope from quadrature against b1 + d3 sigma^2.
inline void add_gauss_checks(VerificationGrid& g) {
    using namespace verification_detail;
    const double b0 = 0.1, b1 = 0.2;
    for (double sigma : {0.5, 1.5}) {
        const auto o = OutcomeModel::linear(b0, b1, sigma);
        for (double d2 : steps(-0.5, 0.5, 5)) {
            for (double d3 : steps(-0.5, 0.5, 5)) {
                const auto c = ColliderModel::log_additive(-1.0, 0.3, d2, d3);
                const double slope = gauss_oracle(o, c, 1.0).mean - gauss_oracle(o, c, 0.0).mean;
                add(g, "gauss_slope", describe("sigma=%g b1=%g d2=%g d3=%g", sigma, b1, d2, d3),
                    b1 + linear_coef_bias(d2, d3, sigma).slope, slope, kOracleTolerance);
            }
        }
    }
}

/// Poisson outcome: selected-sample mean against exp((b0 + d2) + (b1 + d3) x).
inline void add_poisson_checks(VerificationGrid& g) {
    using namespace verification_detail;
    const double b1 = 0.2;
    for (double b0 : {-1.0, 0.5}) {
        const auto o = OutcomeModel::poisson(b0, b1);
        for (double d2 : steps(-0.5, 0.5, 5)) {
            for (double d3 : steps(-0.5, 0.5, 5)) {
                const auto c = ColliderModel::log_additive(-2.0, 0.3, d2, d3);
                const auto bias = poisson_coef_bias(d2, d3);
                for (double x : {0.0, 1.0}) {
                    const double kappa = std::exp((b0 + bias.intercept) + (b1 + bias.slope) * x);
                    add(g, "poisson_mean",
                        describe("b0=%g b1=%g d2=%g d3=%g x=%g", b0, b1, d2, d3, x), kappa,
                        poisson_oracle(o, c, x).mean, kOracleTolerance, true);
                }
            }
        }
    }
}

inline VerificationGrid run_verification_grid() {
    VerificationGrid g;
    add_binary_checks(g);
    add_logistic_collider_checks(g);
    add_gauss_checks(g);
    add_poisson_checks(g);
    return g;
}

inline CsvTable verification_csv(const VerificationGrid& g) {
    CsvTable t;
    t.header = {"check", "params", "analytic", "oracle", "deviation", "tolerance", "result"};
    for (const auto& r : g.rows) {
        t.rows.push_back({r.check, r.params, format_double(r.analytic), format_double(r.oracle),
                          format_double(r.deviation), format_double(r.tolerance),
                          r.pass ? "PASS" : "FAIL"});
    }
    return t;
}

}  // namespace collider_lab
