#pragma once

// Maximum-likelihood GLM fitting by iteratively reweighted least squares.
//
// Five families are supported. BinomialLog is the log-additive model for a 0/1
// response fitted with Poisson working weights (a log-link Poisson fit on the
// binary response); fitted means may exceed 1 and that is reported through
// GlmFit::boundary_flag rather than prevented.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "collider_lab/error.hpp"
#include "collider_lab/math.hpp"
#include "collider_lab/model.hpp"

namespace collider_lab {

enum class Family { GaussianIdentity, BinomialLogit, BinomialProbit, BinomialLog, PoissonLog };

inline std::string to_string(Family f) {
    switch (f) {
        case Family::GaussianIdentity: return "gaussian_identity";
        case Family::BinomialLogit: return "binomial_logit";
        case Family::BinomialProbit: return "binomial_probit";
        case Family::BinomialLog: return "binomial_log";
        case Family::PoissonLog: return "poisson_log";
    }
    return "unknown";
}

inline Family family_from_string(const std::string& s) {
    for (Family f : {Family::GaussianIdentity, Family::BinomialLogit, Family::BinomialProbit,
                     Family::BinomialLog, Family::PoissonLog}) {
        if (to_string(f) == s) return f;
    }
    throw ValidationError("unknown GLM family '" + s + "'");
}

/// The family used to fit an outcome model of the given kind.
inline Family family_for(OutcomeKind kind) {
    switch (kind) {
        case OutcomeKind::Logistic: return Family::BinomialLogit;
        case OutcomeKind::Linear: return Family::GaussianIdentity;
        case OutcomeKind::Poisson: return Family::PoissonLog;
        case OutcomeKind::LogBinomial: return Family::BinomialLog;
    }
    return Family::GaussianIdentity;
}

// ---------------------------------------------------------------------------
// Design

struct Term {
    enum class Kind { Intercept, Column, Interaction };

    Kind kind = Kind::Intercept;
    std::string a;
    std::string b;

    static Term intercept() { return {Kind::Intercept, {}, {}}; }
    static Term column(std::string name) { return {Kind::Column, std::move(name), {}}; }
    static Term interaction(std::string x, std::string y) {
        return {Kind::Interaction, std::move(x), std::move(y)};
    }

    /// "(Intercept)", "x", or "x:y".
    std::string name() const {
        switch (kind) {
            case Kind::Intercept: return "(Intercept)";
            case Kind::Column: return a;
            case Kind::Interaction: return a + ":" + b;
        }
        return {};
    }

    /// Inverse of name(); "1" is accepted for the intercept.
    static Term parse(const std::string& s) {
        if (s == "(Intercept)" || s == "1") return intercept();
        const auto colon = s.find(':');
        if (colon == std::string::npos) return column(s);
        require(colon > 0 && colon + 1 < s.size() && s.find(':', colon + 1) == std::string::npos,
                "design: malformed interaction term '" + s + "'");
        return interaction(s.substr(0, colon), s.substr(colon + 1));
    }

    bool operator==(const Term&) const = default;
};

struct DesignSpec {
    std::vector<Term> terms;

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        for (const auto& t : terms) out.push_back(t.name());
        return out;
    }

    /// Intercept plus the given main effects.
    static DesignSpec with_intercept(const std::vector<std::string>& columns) {
        DesignSpec d{{Term::intercept()}};
        for (const auto& c : columns) d.terms.push_back(Term::column(c));
        return d;
    }

    void validate_against(const Dataset& data) const {
        require(!terms.empty(), "design: at least one term is required");
        auto names_ = names();
        for (std::size_t i = 0; i < names_.size(); ++i) {
            for (std::size_t j = i + 1; j < names_.size(); ++j) {
                require(names_[i] != names_[j], "design: duplicate term '" + names_[i] + "'");
            }
        }
        for (const auto& t : terms) {
            if (t.kind != Term::Kind::Intercept) {
                require(data.has(t.a), "design: column '" + t.a + "' not in dataset");
            }
            if (t.kind == Term::Kind::Interaction) {
                require(data.has(t.b), "design: column '" + t.b + "' not in dataset");
            }
        }
    }
};

struct FitControl {
    int max_iter = 100;
    double coef_tol = 1e-10;
    int step_halving_max = 30;
};

struct GlmFit {
    Family family = Family::GaussianIdentity;
    std::vector<std::string> terms;
    std::vector<double> coefficients;
    std::vector<double> std_errors;
    bool converged = false;
    int iterations = 0;
    double deviance = 0.0;
    bool boundary_flag = false;
    double dispersion = 1.0;  // residual variance for GaussianIdentity, 1 otherwise
    std::size_t n = 0;
    std::vector<double> deviance_trace;  // deviance at start and after each accepted step

    std::size_t index_of(const std::string& term) const {
        for (std::size_t i = 0; i < terms.size(); ++i) {
            if (terms[i] == term) return i;
        }
        throw ValidationError("fit has no term '" + term + "'");
    }
    double coefficient(const std::string& term) const { return coefficients[index_of(term)]; }
    double std_error(const std::string& term) const { return std_errors[index_of(term)]; }
    bool has_term(const std::string& term) const {
        return std::find(terms.begin(), terms.end(), term) != terms.end();
    }
};

namespace glm_detail {

/// Columns referenced by a design, resolved once against a dataset.
class DesignRows {
public:
    DesignRows(const Dataset& data, const DesignSpec& design) {
        for (const auto& t : design.terms) {
            Resolved r{t.kind, {}, {}};
            if (t.kind != Term::Kind::Intercept) r.a = data.column(t.a);
            if (t.kind == Term::Kind::Interaction) r.b = data.column(t.b);
            cols_.push_back(r);
        }
    }

    std::size_t width() const { return cols_.size(); }

    void row(std::size_t i, double* out) const {
        for (std::size_t j = 0; j < cols_.size(); ++j) {
            const auto& c = cols_[j];
            switch (c.kind) {
                case Term::Kind::Intercept: out[j] = 1.0; break;
                case Term::Kind::Column: out[j] = c.a[i]; break;
                case Term::Kind::Interaction: out[j] = c.a[i] * c.b[i]; break;
            }
        }
    }

private:
    struct Resolved {
        Term::Kind kind;
        std::span<const double> a;
        std::span<const double> b;
    };
    std::vector<Resolved> cols_;
};

inline double dot(const double* x, const std::vector<double>& b) {
    double eta = 0.0;
    for (std::size_t j = 0; j < b.size(); ++j) eta += x[j] * b[j];
    return eta;
}

constexpr double kProbitClamp = 37.0;

/// Mean, d mu / d eta, and the Fisher weight at a linear predictor. For
/// every family the score contribution is (y - mu) * score_factor.
struct Working {
    double mu;
    double weight;
    double score_factor;
};

inline Working working(Family f, double eta) {
    switch (f) {
        case Family::GaussianIdentity: return {eta, 1.0, 1.0};
        case Family::BinomialLogit: {
            const double mu = math::expit(eta);
            return {mu, mu * (1.0 - mu), 1.0};
        }
        case Family::BinomialProbit: {
            const double e = std::clamp(eta, -kProbitClamp, kProbitClamp);
            const double mu = math::normal_cdf(e);
            const double var = mu * math::normal_cdf(-e);
            const double d = math::normal_pdf(e);
            return {math::normal_cdf(eta), d * d / var, d / var};
        }
        case Family::BinomialLog:
        case Family::PoissonLog: {
            const double mu = std::exp(eta);
            return {mu, mu, 1.0};
        }
    }
    return {eta, 1.0, 1.0};
}

inline double unit_deviance(Family f, double y, double eta) {
    switch (f) {
        case Family::GaussianIdentity: return (y - eta) * (y - eta);
        case Family::BinomialLogit:
            return 2.0 * (y * math::log1p_exp(-eta) + (1.0 - y) * math::log1p_exp(eta));
        case Family::BinomialProbit:
            return -2.0 * (y * math::log_normal_cdf(eta) + (1.0 - y) * math::log_normal_cdf(-eta));
        case Family::BinomialLog:
        case Family::PoissonLog: {
            const double mu = std::exp(eta);
            return 2.0 * ((y > 0.0 ? y * (std::log(y) - eta) : 0.0) - (y - mu));
        }
    }
    return 0.0;
}

inline double unit_log_likelihood(Family f, double y, double eta) {
    switch (f) {
        case Family::GaussianIdentity: return -0.5 * (y - eta) * (y - eta);
        case Family::BinomialLogit: return y * eta - math::log1p_exp(eta);
        case Family::BinomialProbit:
            return y * math::log_normal_cdf(eta) + (1.0 - y) * math::log_normal_cdf(-eta);
        case Family::BinomialLog:
        case Family::PoissonLog: return y * eta - std::exp(eta) - std::lgamma(y + 1.0);
    }
    return 0.0;
}

inline double link(Family f, double mu) {
    switch (f) {
        case Family::GaussianIdentity: return mu;
        case Family::BinomialLogit: return math::logit(std::clamp(mu, 1e-6, 1.0 - 1e-6));
        case Family::BinomialProbit: return math::normal_quantile(std::clamp(mu, 1e-6, 1.0 - 1e-6));
        case Family::BinomialLog:
        case Family::PoissonLog: return std::log(std::max(mu, 1e-10));
    }
    return mu;
}

inline void check_response(Family f, std::span<const double> y, const std::string& name) {
    for (double v : y) require(std::isfinite(v), "fit: response '" + name + "' has missing values");
    switch (f) {
        case Family::GaussianIdentity: break;
        case Family::BinomialLogit:
        case Family::BinomialProbit:
        case Family::BinomialLog:
            require(is_binary(y), "fit: response '" + name + "' must be 0/1 for " + to_string(f));
            break;
        case Family::PoissonLog:
            require(is_count(y),
                    "fit: response '" + name + "' must be non-negative integers for poisson_log");
            break;
    }
}

/// Solves A b = rhs for symmetric positive-definite A. The matrix is scaled to
/// unit diagonal first; a 1e-12 ridge is tried before declaring singularity.
inline Eigen::VectorXd spd_solve(const Eigen::MatrixXd& a, const Eigen::VectorXd& rhs,
                                 Eigen::MatrixXd* inverse = nullptr) {
    const Eigen::Index p = a.rows();
    Eigen::VectorXd scale(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        if (!(a(j, j) > 0.0) || !std::isfinite(a(j, j))) {
            throw NumericalError("fit: singular information matrix (term " + std::to_string(j) +
                                 " has no information)");
        }
        scale(j) = 1.0 / std::sqrt(a(j, j));
    }
    Eigen::MatrixXd scaled = scale.asDiagonal() * a * scale.asDiagonal();
    Eigen::LLT<Eigen::MatrixXd> llt(scaled);
    if (llt.info() != Eigen::Success) {
        scaled.diagonal().array() += 1e-12;
        llt.compute(scaled);
    }
    if (llt.info() != Eigen::Success) {
        throw NumericalError("fit: singular information matrix (collinear design)");
    }
    const Eigen::MatrixXd l = llt.matrixL();
    const double min_pivot = l.diagonal().minCoeff();
    if (!(min_pivot * min_pivot > 1e-10)) {
        throw NumericalError("fit: singular information matrix (collinear design)");
    }
    if (inverse) {
        const Eigen::MatrixXd inv_scaled = llt.solve(Eigen::MatrixXd::Identity(p, p));
        *inverse = scale.asDiagonal() * inv_scaled * scale.asDiagonal();
    }
    return scale.asDiagonal() * llt.solve(scale.asDiagonal() * rhs);
}

}  // namespace glm_detail

/// Family log-likelihood (up to the constant for Gaussian, unit variance) at
/// the given coefficients. BinomialLog uses the Poisson likelihood it is
/// fitted with.
inline double log_likelihood(const Dataset& data, const std::string& response,
                             const DesignSpec& design, Family family,
                             std::span<const double> coefficients) {
    const glm_detail::DesignRows rows(data, design);
    const auto y = data.column(response);
    std::vector<double> b(coefficients.begin(), coefficients.end());
    std::vector<double> xr(rows.width());
    double ll = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        rows.row(i, xr.data());
        ll += glm_detail::unit_log_likelihood(family, y[i], glm_detail::dot(xr.data(), b));
    }
    return ll;
}

/// Gradient of log_likelihood with respect to the coefficients.
inline std::vector<double> score(const Dataset& data, const std::string& response,
                                 const DesignSpec& design, Family family,
                                 std::span<const double> coefficients) {
    const glm_detail::DesignRows rows(data, design);
    const auto y = data.column(response);
    std::vector<double> b(coefficients.begin(), coefficients.end());
    std::vector<double> xr(rows.width());
    std::vector<double> g(rows.width(), 0.0);
    for (std::size_t i = 0; i < y.size(); ++i) {
        rows.row(i, xr.data());
        const auto w = glm_detail::working(family, glm_detail::dot(xr.data(), b));
        const double u = (y[i] - w.mu) * w.score_factor;
        for (std::size_t j = 0; j < g.size(); ++j) g[j] += xr[j] * u;
    }
    return g;
}

/// Fits `response ~ design` by IRLS with expected information and
/// step-halving on deviance increase. Non-convergence is returned with
/// converged = false; domain errors throw ValidationError and a singular
/// information matrix throws NumericalError.
inline GlmFit fit_glm(const Dataset& data, const std::string& response, const DesignSpec& design,
                      Family family, const FitControl& control = {}) {
    require(control.max_iter > 0 && control.coef_tol > 0.0 && control.step_halving_max > 0,
            "fit: control parameters must be positive");
    design.validate_against(data);
    const auto y = data.column(response);
    glm_detail::check_response(family, y, response);
    const glm_detail::DesignRows rows(data, design);
    const std::size_t n = y.size();
    const std::size_t p = rows.width();
    require(n > p, "fit: need more rows (" + std::to_string(n) + ") than terms (" +
                       std::to_string(p) + ")");
    for (const auto& t : design.terms) {
        for (const auto* col : {&t.a, &t.b}) {
            if (col->empty()) continue;
            for (double v : data.column(*col)) {
                require(std::isfinite(v), "fit: column '" + *col + "' has missing values");
            }
        }
    }

    std::vector<double> xr(p);
    auto deviance_at = [&](const std::vector<double>& b) {
        double dev = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            rows.row(i, xr.data());
            dev += glm_detail::unit_deviance(family, y[i], glm_detail::dot(xr.data(), b));
        }
        return dev;
    };

    GlmFit fit;
    fit.family = family;
    fit.terms = design.names();
    fit.n = n;

    std::vector<double> b(p, 0.0);
    for (std::size_t j = 0; j < p; ++j) {
        if (design.terms[j].kind == Term::Kind::Intercept) {
            double mean = 0.0;
            for (double v : y) mean += v;
            b[j] = glm_detail::link(family, mean / static_cast<double>(n));
        }
    }
    double dev = deviance_at(b);
    fit.deviance_trace.push_back(dev);

    Eigen::MatrixXd info(p, p);
    Eigen::VectorXd rhs(p);
    auto accumulate = [&](const std::vector<double>& coef) {
        info.setZero();
        rhs.setZero();
        for (std::size_t i = 0; i < n; ++i) {
            rows.row(i, xr.data());
            const double eta = glm_detail::dot(xr.data(), coef);
            const auto w = glm_detail::working(family, eta);
            const double z = w.weight * eta + (y[i] - w.mu) * w.score_factor;
            for (std::size_t j = 0; j < p; ++j) {
                const double wx = w.weight * xr[j];
                rhs(static_cast<Eigen::Index>(j)) += xr[j] * z;
                for (std::size_t k = 0; k <= j; ++k) {
                    info(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) += wx * xr[k];
                }
            }
        }
        info.triangularView<Eigen::StrictlyUpper>() = info.transpose();
    };

    for (int iter = 1; iter <= control.max_iter; ++iter) {
        accumulate(b);
        Eigen::VectorXd proposal;
        try {
            proposal = glm_detail::spd_solve(info, rhs);
        } catch (const NumericalError&) {
            // Collinearity shows up at the starting values. Information lost
            // later means the estimates are running off to infinity
            // (separation), which is reported as non-convergence.
            if (iter == 1) throw;
            break;
        }
        std::vector<double> cand(proposal.data(), proposal.data() + p);
        double cand_dev = deviance_at(cand);
        int halvings = 0;
        const double slack = 1e-12 * (std::fabs(dev) + 1.0);
        while (!(std::isfinite(cand_dev) && cand_dev <= dev + slack)) {
            if (++halvings > control.step_halving_max) break;
            for (std::size_t j = 0; j < p; ++j) cand[j] = 0.5 * (cand[j] + b[j]);
            cand_dev = deviance_at(cand);
        }
        fit.iterations = iter;
        if (halvings > control.step_halving_max) break;

        double change = 0.0;
        for (std::size_t j = 0; j < p; ++j) {
            change = std::max(change, std::fabs(cand[j] - b[j]) / (std::fabs(cand[j]) + 1.0));
        }
        b = std::move(cand);
        dev = cand_dev;
        fit.deviance_trace.push_back(dev);
        if (!std::isfinite(change)) break;
        if (change < control.coef_tol) {
            fit.converged = true;
            break;
        }
    }

    fit.coefficients = b;
    fit.deviance = dev;
    if (family == Family::GaussianIdentity) {
        fit.dispersion = dev / static_cast<double>(n - p);
    }
    fit.std_errors.assign(p, std::numeric_limits<double>::quiet_NaN());
    accumulate(b);
    Eigen::MatrixXd inverse;
    try {
        glm_detail::spd_solve(info, rhs, &inverse);
        for (std::size_t j = 0; j < p; ++j) {
            const auto jj = static_cast<Eigen::Index>(j);
            fit.std_errors[j] = std::sqrt(fit.dispersion * inverse(jj, jj));
        }
    } catch (const NumericalError&) {
        // A diverging fit loses information; it is already marked unconverged.
        if (fit.converged) throw;
    }
    if (family == Family::BinomialLog) {
        double max_eta = -INFINITY;
        for (std::size_t i = 0; i < n; ++i) {
            rows.row(i, xr.data());
            max_eta = std::max(max_eta, glm_detail::dot(xr.data(), b));
        }
        fit.boundary_flag = max_eta > -1e-8;
    }
    return fit;
}

/// Log-additive selection model
///   log P(S = 1) = d0 + sum_j d1j Xj + d2 Y [+ sum_j d3j Xj Y]
/// on all rows. Interactions are exposure x outcome only, named "xj:y".
inline GlmFit fit_logadditive_selection(const Dataset& data,
                                        const std::vector<std::string>& exposure_cols,
                                        const std::string& outcome_col,
                                        const std::string& selection_col, bool with_interactions,
                                        const FitControl& control = {}) {
    require(!exposure_cols.empty(), "fit_logadditive_selection: no exposure columns given");
    DesignSpec design = DesignSpec::with_intercept(exposure_cols);
    design.terms.push_back(Term::column(outcome_col));
    if (with_interactions) {
        for (const auto& x : exposure_cols) design.terms.push_back(Term::interaction(x, outcome_col));
    }
    return fit_glm(data, selection_col, design, Family::BinomialLog, control);
}

}  // namespace collider_lab
