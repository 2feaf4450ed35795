#pragma once

// Domain types shared by generation, fitting, the analytic formulas and the
// experiment harness.

#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "collider_lab/error.hpp"
#include "collider_lab/math.hpp"

namespace collider_lab {

// ---------------------------------------------------------------------------
// Exposure

enum class ExposureKind { Bernoulli, Normal };

struct ExposureSpec {
    ExposureKind kind = ExposureKind::Bernoulli;
    double p = 0.5;     // Bernoulli
    double mean = 0.0;  // Normal
    double sd = 1.0;    // Normal

    static ExposureSpec bernoulli(double p) { return {ExposureKind::Bernoulli, p, 0.0, 1.0}; }
    static ExposureSpec normal(double mean, double sd) {
        return {ExposureKind::Normal, 0.5, mean, sd};
    }

    bool operator==(const ExposureSpec&) const = default;
};

// ---------------------------------------------------------------------------
// Outcome

/// LogBinomial is only used by the risk-ratio formulas and the enumeration
/// oracle; the simulation study uses the other three.
enum class OutcomeKind { Logistic, Linear, Poisson, LogBinomial };

struct OutcomeModel {
    OutcomeKind kind = OutcomeKind::Logistic;
    double beta0 = 0.0;
    std::vector<double> beta1{0.0};
    double sigma = 1.0;  // Linear only

    static OutcomeModel logistic(double beta0, double beta1) {
        return {OutcomeKind::Logistic, beta0, {beta1}, 1.0};
    }
    static OutcomeModel linear(double beta0, double beta1, double sigma) {
        return {OutcomeKind::Linear, beta0, {beta1}, sigma};
    }
    static OutcomeModel poisson(double beta0, double beta1) {
        return {OutcomeKind::Poisson, beta0, {beta1}, 1.0};
    }
    static OutcomeModel log_binomial(double beta0, double beta1) {
        return {OutcomeKind::LogBinomial, beta0, {beta1}, 1.0};
    }

    /// beta0 + beta1 . x for a single-exposure model.
    double linear_predictor(double x) const { return beta0 + beta1.front() * x; }

    bool operator==(const OutcomeModel&) const = default;
};

// ---------------------------------------------------------------------------
// Collider (selection)

enum class ColliderKind { LogAdditive, Logistic, Probit, DoubleThreshold };

struct ColliderModel {
    ColliderKind kind = ColliderKind::LogAdditive;
    double delta0 = 0.0;  // intercept
    double delta1 = 0.0;  // exposure
    double delta2 = 0.0;  // outcome
    double delta3 = 0.0;  // exposure x outcome
    double latent_sd = 1.6;  // Probit, DoubleThreshold
    double r_lower = -1.0;   // DoubleThreshold
    double r_upper = 1.0;    // DoubleThreshold

    static ColliderModel log_additive(double d0, double d1, double d2, double d3) {
        return {ColliderKind::LogAdditive, d0, d1, d2, d3};
    }
    static ColliderModel logistic(double d0, double d1, double d2, double d3) {
        return {ColliderKind::Logistic, d0, d1, d2, d3};
    }
    static ColliderModel probit(double d0, double d1, double d2, double d3, double latent_sd) {
        return {ColliderKind::Probit, d0, d1, d2, d3, latent_sd};
    }
    static ColliderModel double_threshold(double d0, double d1, double d2, double d3,
                                          double latent_sd, double r_lower, double r_upper) {
        return {ColliderKind::DoubleThreshold, d0, d1, d2, d3, latent_sd, r_lower, r_upper};
    }

    double linear_predictor(double x, double y) const {
        return delta0 + delta1 * x + delta2 * y + delta3 * x * y;
    }

    /// P(S = 1 | X = x, Y = y). For LogAdditive the caller is responsible for
    /// the linear predictor being <= 0.
    double selection_probability(double x, double y) const {
        const double eta = linear_predictor(x, y);
        switch (kind) {
            case ColliderKind::LogAdditive: return std::exp(eta);
            case ColliderKind::Logistic: return math::expit(eta);
            case ColliderKind::Probit: return math::normal_cdf(eta / latent_sd);
            case ColliderKind::DoubleThreshold:
                return math::normal_cdf((r_lower - eta) / latent_sd) +
                       math::normal_cdf((eta - r_upper) / latent_sd);
        }
        return 0.0;
    }

    bool operator==(const ColliderModel&) const = default;
};

// ---------------------------------------------------------------------------
// Supports and validation

/// Closed interval, possibly unbounded. Discrete supports ({0,1}, the
/// non-negative integers) are represented by their convex hull; that is exact
/// for the bilinear predictors used here because their extremes sit at corners.
struct Interval {
    double lo;
    double hi;
};

inline Interval exposure_support(const ExposureSpec& e) {
    if (e.kind == ExposureKind::Bernoulli) return {0.0, 1.0};
    return {-INFINITY, INFINITY};
}

inline Interval outcome_support(const OutcomeModel& m) {
    switch (m.kind) {
        case OutcomeKind::Logistic:
        case OutcomeKind::LogBinomial: return {0.0, 1.0};
        case OutcomeKind::Poisson: return {0.0, INFINITY};
        case OutcomeKind::Linear: return {-INFINITY, INFINITY};
    }
    return {-INFINITY, INFINITY};
}

namespace detail {

inline double signed_infinity(double s) {
    if (s > 0) return INFINITY;
    if (s < 0) return -INFINITY;
    return 0.0;
}

/// Limit of c0 + cx*x + cy*y + cxy*x*y at a (possibly infinite) corner.
inline double corner_limit(double c0, double cx, double cy, double cxy, double x, double y) {
    const bool xi = std::isinf(x);
    const bool yi = std::isinf(y);
    if (!xi && !yi) return c0 + cx * x + cy * y + cxy * x * y;
    if (xi && !yi) {
        const double slope = (cx + cxy * y) * (x > 0 ? 1.0 : -1.0);
        return slope != 0.0 ? signed_infinity(slope) : c0 + cy * y;
    }
    if (!xi && yi) {
        const double slope = (cy + cxy * x) * (y > 0 ? 1.0 : -1.0);
        return slope != 0.0 ? signed_infinity(slope) : c0 + cx * x;
    }
    const double sx = x > 0 ? 1.0 : -1.0;
    const double sy = y > 0 ? 1.0 : -1.0;
    if (cxy * sx * sy != 0.0) return signed_infinity(cxy * sx * sy);
    const double lin = cx * sx + cy * sy;
    return lin != 0.0 ? signed_infinity(lin) : c0;
}

}  // namespace detail

/// Supremum of the bilinear form over the box, and the corner attaining it.
struct BilinearSup {
    double value;
    double x;
    double y;
};

inline BilinearSup bilinear_sup(double c0, double cx, double cy, double cxy, Interval xs,
                                Interval ys) {
    BilinearSup best{-INFINITY, xs.lo, ys.lo};
    for (double x : {xs.lo, xs.hi}) {
        for (double y : {ys.lo, ys.hi}) {
            const double v = detail::corner_limit(c0, cx, cy, cxy, x, y);
            if (v > best.value) best = {v, x, y};
        }
    }
    return best;
}

inline void validate(const ExposureSpec& e) {
    if (e.kind == ExposureKind::Bernoulli) {
        require(e.p > 0.0 && e.p < 1.0, "exposure: Bernoulli p must lie in (0,1)");
    } else {
        require(std::isfinite(e.mean), "exposure: Normal mean must be finite");
        require(std::isfinite(e.sd) && e.sd > 0.0, "exposure: invalid sd (must be > 0)");
    }
}

inline void validate(const OutcomeModel& m, std::size_t n_exposures = 1) {
    require(std::isfinite(m.beta0), "outcome: beta0 must be finite");
    require(m.beta1.size() == n_exposures,
            "outcome: beta1 has dimension " + std::to_string(m.beta1.size()) + " but " +
                std::to_string(n_exposures) + " exposure column(s) were given");
    for (double b : m.beta1) require(std::isfinite(b), "outcome: beta1 must be finite");
    if (m.kind == OutcomeKind::Linear) {
        require(std::isfinite(m.sigma) && m.sigma > 0.0, "outcome: Linear requires sigma > 0");
    }
}

inline void validate(const ColliderModel& c) {
    for (double d : {c.delta0, c.delta1, c.delta2, c.delta3}) {
        require(std::isfinite(d), "collider: delta coefficients must be finite");
    }
    if (c.kind == ColliderKind::Probit || c.kind == ColliderKind::DoubleThreshold) {
        require(std::isfinite(c.latent_sd) && c.latent_sd > 0.0,
                "collider: latent_sd must be > 0");
    }
    if (c.kind == ColliderKind::DoubleThreshold) {
        require(std::isfinite(c.r_lower) && std::isfinite(c.r_upper) && c.r_lower < c.r_upper,
                "collider: DoubleThreshold requires r_lower < r_upper");
    }
}

/// Checks that a log-additive selection law is a probability on the given
/// support (linear predictor <= 0; equality, i.e. probability 1, is allowed).
inline void validate_log_additive_support(const ColliderModel& c, Interval xs, Interval ys) {
    if (c.kind != ColliderKind::LogAdditive) return;
    const auto sup = bilinear_sup(c.delta0, c.delta1, c.delta2, c.delta3, xs, ys);
    if (sup.value > 0.0) {
        std::ostringstream msg;
        msg << "collider: log-additive selection probability exceeds 1 on the declared support "
            << "at (x, y) = (" << sup.x << ", " << sup.y << ")";
        throw ValidationError(msg.str());
    }
}

/// A validated (exposure, outcome, collider) triple. Only validate_scenario
/// constructs one, so holding a Scenario means it can be sampled from.
class Scenario {
public:
    const ExposureSpec& exposure() const { return exposure_; }
    const OutcomeModel& outcome() const { return outcome_; }
    const ColliderModel& collider() const { return collider_; }

    bool operator==(const Scenario&) const = default;

private:
    Scenario(ExposureSpec e, OutcomeModel o, ColliderModel c)
        : exposure_(std::move(e)), outcome_(std::move(o)), collider_(std::move(c)) {}

    ExposureSpec exposure_;
    OutcomeModel outcome_;
    ColliderModel collider_;

    friend Scenario validate_scenario(const ExposureSpec&, const OutcomeModel&,
                                      const ColliderModel&);
};

inline Scenario validate_scenario(const ExposureSpec& exposure, const OutcomeModel& outcome,
                                  const ColliderModel& collider) {
    validate(exposure);
    validate(outcome, 1);
    validate(collider);
    const Interval xs = exposure_support(exposure);
    if (outcome.kind == OutcomeKind::LogBinomial) {
        const auto sup = bilinear_sup(outcome.beta0, outcome.beta1.front(), 0.0, 0.0, xs, {0, 0});
        require(sup.value <= 0.0,
                "outcome: log-binomial probability exceeds 1 on the exposure support");
    }
    validate_log_additive_support(collider, xs, outcome_support(outcome));
    return Scenario(exposure, outcome, collider);
}

// ---------------------------------------------------------------------------
// Dataset

/// Which columns play which part in an analysis.
struct DatasetRoles {
    std::vector<std::string> exposures{"x"};
    std::string outcome = "y";
    std::string selection = "s";
};

/// Named real-valued columns of equal length. Missing values are NaN.
class Dataset {
public:
    Dataset() = default;

    void add_column(std::string name, std::vector<double> values) {
        require(!name.empty(), "dataset: column name must not be empty");
        require(!has(name), "dataset: duplicate column '" + name + "'");
        if (!columns_.empty()) {
            require(values.size() == rows(), "dataset: column '" + name + "' has " +
                                                 std::to_string(values.size()) +
                                                 " rows, expected " + std::to_string(rows()));
        }
        columns_.emplace_back(std::move(name), std::move(values));
    }

    std::size_t rows() const { return columns_.empty() ? 0 : columns_.front().second.size(); }
    std::size_t cols() const { return columns_.size(); }

    bool has(const std::string& name) const { return find(name) != nullptr; }

    std::span<const double> column(const std::string& name) const {
        const auto* c = find(name);
        require(c != nullptr, "dataset: no column named '" + name + "'");
        return *c;
    }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        out.reserve(columns_.size());
        for (const auto& [n, _] : columns_) out.push_back(n);
        return out;
    }

    /// Rows i for which keep(i) is true, all columns, order preserved.
    template <class Pred>
    Dataset filter(Pred keep) const {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < rows(); ++i) {
            if (keep(i)) idx.push_back(i);
        }
        Dataset out;
        for (const auto& [name, values] : columns_) {
            std::vector<double> v(idx.size());
            for (std::size_t k = 0; k < idx.size(); ++k) v[k] = values[idx[k]];
            out.columns_.emplace_back(name, std::move(v));
        }
        return out;
    }

    /// Rows where the 0/1 column equals 1.
    Dataset selected(const std::string& selection_col) const {
        const auto s = column(selection_col);
        return filter([&](std::size_t i) { return s[i] == 1.0; });
    }

    /// Rows reordered by perm (a permutation of 0..n-1).
    Dataset permuted(std::span<const std::size_t> perm) const {
        require(perm.size() == rows(), "dataset: permutation length mismatch");
        Dataset out;
        for (const auto& [name, values] : columns_) {
            std::vector<double> v(values.size());
            for (std::size_t i = 0; i < perm.size(); ++i) v[i] = values[perm[i]];
            out.columns_.emplace_back(name, std::move(v));
        }
        return out;
    }

private:
    const std::vector<double>* find(const std::string& name) const {
        for (const auto& [n, v] : columns_) {
            if (n == name) return &v;
        }
        return nullptr;
    }

    std::vector<std::pair<std::string, std::vector<double>>> columns_;
};

inline bool is_binary(std::span<const double> v) {
    for (double a : v) {
        if (a != 0.0 && a != 1.0) return false;
    }
    return true;
}

inline bool is_count(std::span<const double> v) {
    for (double a : v) {
        if (!(a >= 0.0) || a != std::floor(a)) return false;
    }
    return true;
}

/// Checks the role invariants: columns exist, selection is 0/1, and the
/// outcome matches the family it will be analysed with (if given).
inline void validate_roles(const Dataset& data, const DatasetRoles& roles,
                           std::optional<OutcomeKind> outcome_kind = std::nullopt) {
    for (const auto& e : roles.exposures) {
        require(data.has(e), "dataset: missing exposure column '" + e + "'");
    }
    require(data.has(roles.outcome), "dataset: missing outcome column '" + roles.outcome + "'");
    for (const auto& e : roles.exposures) {
        require(e != roles.outcome && e != roles.selection,
                "dataset: column '" + e + "' cannot be both an exposure and another role");
    }
    require(roles.outcome != roles.selection,
            "dataset: outcome and selection must be different columns");
    require(data.has(roles.selection),
            "dataset: missing selection column '" + roles.selection + "'");
    require(is_binary(data.column(roles.selection)),
            "dataset: selection column '" + roles.selection + "' must contain only 0 and 1");
    if (!outcome_kind) return;
    const auto y = data.column(roles.outcome);
    switch (*outcome_kind) {
        case OutcomeKind::Logistic:
        case OutcomeKind::LogBinomial:
            require(is_binary(y), "dataset: binary outcome column must contain only 0 and 1");
            break;
        case OutcomeKind::Poisson:
            require(is_count(y), "dataset: count outcome must contain non-negative integers");
            break;
        case OutcomeKind::Linear: break;
    }
}

}  // namespace collider_lab
