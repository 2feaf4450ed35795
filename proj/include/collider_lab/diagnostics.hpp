#pragma once

// Selection-bias diagnostic for a user dataset: exposure-outcome fits on all
// rows and on selected rows, log-additive selection models with
// exposure x outcome interactions, and a logistic selection model without
// interactions for comparison.

#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "collider_lab/config.hpp"
#include "collider_lab/csv.hpp"
#include "collider_lab/error.hpp"
#include "collider_lab/glm.hpp"
#include "collider_lab/model.hpp"

namespace collider_lab {

enum class DiagnosticMode { Marginal, Joint };

inline std::string to_string(DiagnosticMode m) { return m == DiagnosticMode::Marginal ? "marginal" : "joint"; }

inline DiagnosticMode diagnostic_mode_from_string(const std::string& s) {
    if (s == "marginal") return DiagnosticMode::Marginal;
    if (s == "joint") return DiagnosticMode::Joint;
    throw ValidationError("config: unknown diagnostic mode '" + s + "' (expected marginal or joint)");
}

struct DiagnosticConfig {
    std::string outcome_col = "y";
    Family outcome_family = Family::BinomialLogit;
    std::vector<std::string> exposure_cols{"x"};
    std::string selection_col = "s";
    DiagnosticMode mode = DiagnosticMode::Marginal;
    bool drop_incomplete_rows = false;
    FitControl control;
};

/// One exposure term. Selected-sample and selection-model fields are NaN
/// when the corresponding fit was unavailable; `error` then says why.
struct DiagnosticTerm {
    std::string exposure;
    double beta_full = NAN;
    double se_full = NAN;
    double beta_selected = NAN;
    double se_selected = NAN;
    /// beta_selected - beta_full.
    double observed_bias = NAN;
    double delta3_hat = NAN;
    double delta3_hat_se = NAN;
    /// Residual variance of the selected-sample fit for a Gaussian outcome, else 1.
    double prediction_scale_factor = 1.0;
    double predicted_bias = NAN;
    /// sqrt(se_selected^2 + se_full^2).
    double combined_se = NAN;
    bool covered = false;
    std::string error;

    bool coverage_from_fields() const {
        return std::abs(observed_bias - prediction_scale_factor * delta3_hat) <= 1.96 * combined_se;
    }
};

struct CoefficientRow {
    std::string model;
    std::string term;
    double estimate = NAN;
    double std_error = NAN;
};

struct DiagnosticReport {
    DiagnosticConfig config;
    std::size_t rows_used = 0;
    std::size_t rows_selected = 0;
    std::size_t rows_dropped = 0;
    std::vector<DiagnosticTerm> terms;
    /// Logistic selection model(s) without interactions.
    std::vector<CoefficientRow> selection_logistic;
    /// Fit failures outside the per-term fields, and data caveats.
    std::vector<std::string> notes;
};

namespace diagnostic_detail {

inline GlmFit converged_fit(const Dataset& d, const std::string& response, const DesignSpec& design,
                            Family family, const FitControl& control, const std::string& what) {
    auto fit = fit_glm(d, response, design, family, control);
    if (!fit.converged) {
        throw NumericalError(what + " fit did not converge after " + std::to_string(fit.iterations) +
                             " iterations");
    }
    return fit;
}

inline void append_error(std::string& target, const std::string& msg) {
    target += (target.empty() ? "" : "; ") + msg;
}

inline std::vector<std::string> used_columns(const DiagnosticConfig& c) {
    std::vector<std::string> cols = c.exposure_cols;
    cols.push_back(c.outcome_col);
    cols.push_back(c.selection_col);
    return cols;
}

/// Checks names and domains; returns the rows to analyse.
inline Dataset prepare(const Dataset& data, const DiagnosticConfig& c, std::size_t& dropped) {
    require(!c.exposure_cols.empty(), "diagnostic: at least one exposure column is required");
    DatasetRoles roles{c.exposure_cols, c.outcome_col, c.selection_col};
    for (const auto& name : used_columns(c)) {
        require(data.has(name), "diagnostic: dataset has no column '" + name + "'");
    }
    for (std::size_t i = 0; i < c.exposure_cols.size(); ++i) {
        for (std::size_t j = i + 1; j < c.exposure_cols.size(); ++j) {
            require(c.exposure_cols[i] != c.exposure_cols[j],
                    "diagnostic: exposure '" + c.exposure_cols[i] + "' listed twice");
        }
    }

    std::vector<std::span<const double>> cols;
    for (const auto& name : used_columns(c)) cols.push_back(data.column(name));
    auto complete = [&](std::size_t i) {
        for (const auto& col : cols) {
            if (!std::isfinite(col[i])) return false;
        }
        return true;
    };
    std::size_t incomplete = 0;
    for (std::size_t i = 0; i < data.rows(); ++i) incomplete += !complete(i);
    dropped = 0;
    Dataset out;
    if (incomplete > 0) {
        if (!c.drop_incomplete_rows) {
            throw ValidationError("diagnostic: " + std::to_string(incomplete) +
                                  " rows have missing values in the analysed columns; set "
                                  "drop_incomplete_rows to analyse complete rows only");
        }
        dropped = incomplete;
        out = data.filter(complete);
    } else {
        out = data;
    }
    validate_roles(out, roles);
    glm_detail::check_response(c.outcome_family, out.column(c.outcome_col), c.outcome_col);
    return out;
}

}  // namespace diagnostic_detail

/// Runs the diagnostic. Invalid configurations and data throw; failures of
/// individual fits are recorded in the report.
inline DiagnosticReport run_diagnostic(const Dataset& data, const DiagnosticConfig& config) {
    using namespace diagnostic_detail;
    DiagnosticReport report;
    report.config = config;
    const Dataset d = prepare(data, config, report.rows_dropped);
    report.rows_used = d.rows();
    require(report.rows_used > 0, "diagnostic: no rows to analyse");
    if (report.rows_dropped > 0) {
        report.notes.push_back(std::to_string(report.rows_dropped) +
                               " incomplete rows were dropped; missingness related to the "
                               "exposure and outcome can bias the full-sample estimates too");
    }
    {
        const auto s = d.column(config.selection_col);
        for (double v : s) report.rows_selected += v == 1.0;
    }
    const bool all_selected = report.rows_selected == report.rows_used;
    if (all_selected) report.notes.push_back("every row is selected; there is no selection to diagnose");
    if (report.rows_selected == 0) report.notes.push_back("no row is selected; selected-sample fits are unavailable");
    const Dataset sel = all_selected ? d : d.selected(config.selection_col);

    // Exposure groups: one per exposure (marginal) or all together (joint).
    std::vector<std::vector<std::string>> groups;
    if (config.mode == DiagnosticMode::Marginal) {
        for (const auto& x : config.exposure_cols) groups.push_back({x});
    } else {
        groups.push_back(config.exposure_cols);
    }

    for (const auto& group : groups) {
        std::string label;
        for (const auto& x : group) label += (label.empty() ? "" : "+") + x;
        const DesignSpec design = DesignSpec::with_intercept(group);
        std::vector<DiagnosticTerm> terms(group.size());
        for (std::size_t k = 0; k < group.size(); ++k) terms[k].exposure = group[k];

        auto for_all = [&](auto&& fn) {
            for (std::size_t k = 0; k < group.size(); ++k) fn(terms[k], group[k]);
        };
        auto record = [&](const std::string& what, const std::exception& e) {
            for_all([&](DiagnosticTerm& t, const std::string&) {
                append_error(t.error, what + ": " + e.what());
            });
        };

        std::optional<GlmFit> full;
        try {
            full = converged_fit(d, config.outcome_col, design, config.outcome_family,
                                 config.control, "full-sample outcome");
            for_all([&](DiagnosticTerm& t, const std::string& x) {
                t.beta_full = full->coefficient(x);
                t.se_full = full->std_error(x);
            });
        } catch (const std::exception& e) {
            record("full-sample outcome", e);
        }

        try {
            const GlmFit fit = all_selected && full
                                   ? *full
                                   : converged_fit(sel, config.outcome_col, design,
                                                   config.outcome_family, config.control,
                                                   "selected-sample outcome");
            for_all([&](DiagnosticTerm& t, const std::string& x) {
                t.beta_selected = fit.coefficient(x);
                t.se_selected = fit.std_error(x);
                if (config.outcome_family == Family::GaussianIdentity) {
                    t.prediction_scale_factor = fit.dispersion;
                }
            });
        } catch (const std::exception& e) {
            record("selected-sample outcome", e);
        }

        try {
            auto fit = fit_logadditive_selection(d, group, config.outcome_col, config.selection_col,
                                                 true, config.control);
            if (!fit.converged) {
                throw NumericalError("did not converge after " + std::to_string(fit.iterations) +
                                     " iterations");
            }
            if (fit.boundary_flag) {
                report.notes.push_back("log-additive selection model for " + label +
                                       " has fitted probabilities at or above 1");
            }
            for_all([&](DiagnosticTerm& t, const std::string& x) {
                t.delta3_hat = fit.coefficient(x + ":" + config.outcome_col);
                t.delta3_hat_se = fit.std_error(x + ":" + config.outcome_col);
            });
        } catch (const std::exception& e) {
            record("log-additive selection model", e);
        }

        try {
            DesignSpec sdesign = design;
            sdesign.terms.push_back(Term::column(config.outcome_col));
            const auto fit = converged_fit(d, config.selection_col, sdesign, Family::BinomialLogit,
                                           config.control, "logistic selection model");
            for (std::size_t j = 0; j < fit.terms.size(); ++j) {
                report.selection_logistic.push_back(
                    {"logistic:" + label, fit.terms[j], fit.coefficients[j], fit.std_errors[j]});
            }
        } catch (const std::exception& e) {
            report.notes.push_back("logistic selection model for " + label + ": " + e.what());
        }

        for (auto& t : terms) {
            t.observed_bias = t.beta_selected - t.beta_full;
            t.predicted_bias = t.prediction_scale_factor * t.delta3_hat;
            t.combined_se = std::hypot(t.se_selected, t.se_full);
            t.covered = t.coverage_from_fields();
            report.terms.push_back(std::move(t));
        }
    }
    return report;
}

// ---------------------------------------------------------------------------
// Serialization

inline DiagnosticConfig diagnostic_config_from_json(const json& j) {
    using namespace config_detail;
    check_version(j);
    DiagnosticConfig c;
    c.outcome_col = text(j, "outcome_col", "diagnostic");
    c.outcome_family = family_from_string(text(j, "outcome_family", "diagnostic"));
    const auto& xs = field(j, "exposure_cols", "diagnostic");
    if (!xs.is_array() || xs.empty()) {
        throw ValidationError("config: 'diagnostic.exposure_cols' must be a non-empty array");
    }
    c.exposure_cols.clear();
    for (const auto& x : xs) {
        if (!x.is_string()) throw ValidationError("config: 'diagnostic.exposure_cols' must hold names");
        c.exposure_cols.push_back(x.get<std::string>());
    }
    c.selection_col = text(j, "selection_col", "diagnostic");
    if (j.contains("mode")) c.mode = diagnostic_mode_from_string(text(j, "mode", "diagnostic"));
    if (j.contains("drop_incomplete_rows")) {
        const auto& v = j["drop_incomplete_rows"];
        if (!v.is_boolean()) {
            throw ValidationError("config: 'diagnostic.drop_incomplete_rows' must be true or false");
        }
        c.drop_incomplete_rows = v.get<bool>();
    }
    if (j.contains("control")) c.control = fit_control_from_json(j["control"]);
    return c;
}

inline json to_json(const DiagnosticConfig& c) {
    return {{"version", kConfigVersion},
            {"outcome_col", c.outcome_col},
            {"outcome_family", to_string(c.outcome_family)},
            {"exposure_cols", c.exposure_cols},
            {"selection_col", c.selection_col},
            {"mode", to_string(c.mode)},
            {"drop_incomplete_rows", c.drop_incomplete_rows},
            {"control", to_json(c.control)}};
}

namespace diagnostic_detail {

// NaN is stored as null.
inline json num(double v) { return std::isnan(v) ? json(nullptr) : json(v); }
inline double num_from(const json& j, const std::string& key) {
    const auto& v = config_detail::field(j, key, "report");
    return v.is_null() ? NAN : v.get<double>();
}

}  // namespace diagnostic_detail

inline json to_json(const DiagnosticReport& r) {
    using diagnostic_detail::num;
    json terms = json::array();
    for (const auto& t : r.terms) {
        terms.push_back({{"exposure", t.exposure},
                         {"beta_full", num(t.beta_full)},
                         {"se_full", num(t.se_full)},
                         {"beta_selected", num(t.beta_selected)},
                         {"se_selected", num(t.se_selected)},
                         {"observed_bias", num(t.observed_bias)},
                         {"delta3_hat", num(t.delta3_hat)},
                         {"delta3_hat_se", num(t.delta3_hat_se)},
                         {"prediction_scale_factor", num(t.prediction_scale_factor)},
                         {"predicted_bias", num(t.predicted_bias)},
                         {"combined_se", num(t.combined_se)},
                         {"covered", t.covered},
                         {"error", t.error}});
    }
    json logistic = json::array();
    for (const auto& row : r.selection_logistic) {
        logistic.push_back({{"model", row.model},
                            {"term", row.term},
                            {"estimate", num(row.estimate)},
                            {"std_error", num(row.std_error)}});
    }
    return {{"config", to_json(r.config)},
            {"rows_used", r.rows_used},
            {"rows_selected", r.rows_selected},
            {"rows_dropped", r.rows_dropped},
            {"terms", std::move(terms)},
            {"selection_logistic", std::move(logistic)},
            {"notes", r.notes}};
}

inline DiagnosticReport diagnostic_report_from_json(const json& j) {
    using namespace config_detail;
    using diagnostic_detail::num_from;
    DiagnosticReport r;
    r.config = diagnostic_config_from_json(field(j, "config", "report"));
    r.rows_used = field(j, "rows_used", "report").get<std::size_t>();
    r.rows_selected = field(j, "rows_selected", "report").get<std::size_t>();
    r.rows_dropped = field(j, "rows_dropped", "report").get<std::size_t>();
    for (const auto& t : field(j, "terms", "report")) {
        DiagnosticTerm d;
        d.exposure = text(t, "exposure", "term");
        d.beta_full = num_from(t, "beta_full");
        d.se_full = num_from(t, "se_full");
        d.beta_selected = num_from(t, "beta_selected");
        d.se_selected = num_from(t, "se_selected");
        d.observed_bias = num_from(t, "observed_bias");
        d.delta3_hat = num_from(t, "delta3_hat");
        d.delta3_hat_se = num_from(t, "delta3_hat_se");
        d.prediction_scale_factor = num_from(t, "prediction_scale_factor");
        d.predicted_bias = num_from(t, "predicted_bias");
        d.combined_se = num_from(t, "combined_se");
        d.covered = field(t, "covered", "term").get<bool>();
        d.error = text(t, "error", "term");
        r.terms.push_back(std::move(d));
    }
    for (const auto& row : field(j, "selection_logistic", "report")) {
        r.selection_logistic.push_back({text(row, "model", "row"), text(row, "term", "row"),
                                        num_from(row, "estimate"), num_from(row, "std_error")});
    }
    for (const auto& n : field(j, "notes", "report")) r.notes.push_back(n.get<std::string>());
    return r;
}

inline CsvTable diagnostic_csv(const DiagnosticReport& r) {
    CsvTable t;
    t.header = {"exposure",      "beta_full",     "se_full",      "beta_selected",
                "se_selected",   "observed_bias", "delta3_hat",   "delta3_hat_se",
                "prediction_scale_factor", "predicted_bias", "combined_se", "covered", "error"};
    for (const auto& d : r.terms) {
        t.rows.push_back({d.exposure, format_double(d.beta_full), format_double(d.se_full),
                          format_double(d.beta_selected), format_double(d.se_selected),
                          format_double(d.observed_bias), format_double(d.delta3_hat),
                          format_double(d.delta3_hat_se), format_double(d.prediction_scale_factor),
                          format_double(d.predicted_bias), format_double(d.combined_se),
                          format_bool(d.covered), d.error});
    }
    return t;
}

/// Fixed-width summary for terminals.
inline std::string diagnostic_table(const DiagnosticReport& r) {
    auto cell = [](double v) {
        if (std::isnan(v)) return std::string("NA");
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4f", v);
        return std::string(buf);
    };
    std::string out;
    char line[256];
    std::snprintf(line, sizeof line, "rows used %zu, selected %zu, dropped %zu (%s mode, %s outcome)\n",
                  r.rows_used, r.rows_selected, r.rows_dropped, to_string(r.config.mode).c_str(),
                  to_string(r.config.outcome_family).c_str());
    out += line;
    std::snprintf(line, sizeof line, "%-16s %10s %10s %10s %10s %10s %10s %8s\n", "exposure",
                  "b_full", "b_sel", "bias", "d3_hat", "pred", "comb_se", "covered");
    out += line;
    for (const auto& t : r.terms) {
        std::snprintf(line, sizeof line, "%-16s %10s %10s %10s %10s %10s %10s %8s\n",
                      t.exposure.c_str(), cell(t.beta_full).c_str(), cell(t.beta_selected).c_str(),
                      cell(t.observed_bias).c_str(), cell(t.delta3_hat).c_str(),
                      cell(t.predicted_bias).c_str(), cell(t.combined_se).c_str(),
                      t.error.empty() ? (t.covered ? "yes" : "no") : "error");
        out += line;
        if (!t.error.empty()) out += "  " + t.exposure + ": " + t.error + "\n";
    }
    if (!r.selection_logistic.empty()) {
        out += "logistic selection model (no interactions)\n";
        for (const auto& row : r.selection_logistic) {
            std::snprintf(line, sizeof line, "  %-24s %-16s %10s %10s\n", row.model.c_str(),
                          row.term.c_str(), cell(row.estimate).c_str(), cell(row.std_error).c_str());
            out += line;
        }
    }
    for (const auto& n : r.notes) out += "note: " + n + "\n";
    return out;
}

}  // namespace collider_lab
