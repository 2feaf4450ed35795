#pragma once

// Large-sample simulation study: for each (outcome model, collider model,
// interaction, selection fraction) cell, simulate one big dataset, fit the
// outcome model on the selected rows, fit the log-additive selection model on
// all rows, and compare the observed bias with the interaction estimate.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "collider_lab/config.hpp"
#include "collider_lab/csv.hpp"
#include "collider_lab/datagen.hpp"
#include "collider_lab/error.hpp"
#include "collider_lab/glm.hpp"
#include "collider_lab/model.hpp"
#include "collider_lab/parallel.hpp"

namespace collider_lab {

enum class Experiment { Exp1_FiftyPercent, Exp2_VarySelection, ExpC_ContinuousExposure, ExpN_NullEffects };

inline std::string to_string(Experiment e) {
    switch (e) {
        case Experiment::Exp1_FiftyPercent: return "exp1";
        case Experiment::Exp2_VarySelection: return "exp2";
        case Experiment::ExpC_ContinuousExposure: return "expc";
        case Experiment::ExpN_NullEffects: return "expn";
    }
    return "unknown";
}

inline Experiment experiment_from_string(const std::string& s) {
    for (auto e : {Experiment::Exp1_FiftyPercent, Experiment::Exp2_VarySelection,
                   Experiment::ExpC_ContinuousExposure, Experiment::ExpN_NullEffects}) {
        if (to_string(e) == s) return e;
    }
    throw ValidationError("unknown experiment '" + s + "' (expected exp1, exp2, expc or expn)");
}

/// Fixed parameters of a simulation cell. Defaults are the study values.
struct CellParameters {
    double beta0 = 0.0;
    double beta1 = 0.2;
    double sigma = 0.5;
    double delta1 = 0.3;
    double delta2 = 0.3;
    double latent_sd = 1.6;
};

struct ScenarioCell {
    std::string experiment = "custom";
    OutcomeKind outcome = OutcomeKind::Logistic;
    ColliderKind collider = ColliderKind::Logistic;
    double delta3 = 0.0;
    double selection_target = 0.5;
    ExposureSpec exposure = ExposureSpec::bernoulli(0.3);
    CellParameters params;

    /// Stable label, also used as the cell's random stream name.
    std::string id() const {
        return experiment + "/" + to_string(outcome) + "/" + to_string(collider) +
               "/d3=" + format_double(delta3) + "/p=" + format_double(selection_target);
    }
};

struct BiasReport {
    std::string scenario_id;
    std::string experiment;
    OutcomeKind outcome_kind = OutcomeKind::Logistic;
    ColliderKind collider_kind = ColliderKind::Logistic;
    double delta3_true = 0.0;
    double selection_target = 0.0;
    double realized_selection = NAN;
    std::size_t n = 0;
    std::size_t n_selected = 0;
    double beta1_true = NAN;
    double beta1_full = NAN;
    double beta1_full_se = NAN;
    double beta1_selected = NAN;
    /// beta1_selected - beta1_true.
    double observed_bias = NAN;
    /// Standard error of beta1_selected; the Monte-Carlo scale of observed_bias.
    double bias_mc_se = NAN;
    double delta3_hat = NAN;
    double delta3_hat_se = NAN;
    /// sigma^2 * delta3_hat for a linear outcome, delta3_hat otherwise.
    std::optional<double> analytic_prediction;
    /// observed_bias - analytic_prediction.
    double deviation = NAN;
    /// The collider model after calibration.
    ColliderModel collider;
    /// Empty on success; the failure message otherwise.
    std::string error;

    bool ok() const { return error.empty(); }
};

struct RunOptions {
    std::size_t calibration_n = 1'000'000;
    std::size_t min_selected = 100;
    std::size_t threads = 1;
    FitControl control;
};

/// Builds the outcome model of a cell.
inline OutcomeModel cell_outcome(const ScenarioCell& c) {
    switch (c.outcome) {
        case OutcomeKind::Logistic: return OutcomeModel::logistic(c.params.beta0, c.params.beta1);
        case OutcomeKind::Linear:
            return OutcomeModel::linear(c.params.beta0, c.params.beta1, c.params.sigma);
        case OutcomeKind::Poisson: return OutcomeModel::poisson(c.params.beta0, c.params.beta1);
        case OutcomeKind::LogBinomial: break;
    }
    throw ValidationError("harness: outcome kind '" + to_string(c.outcome) +
                          "' is not part of the simulation study");
}

/// The collider model of a cell before calibration (delta0 = 0).
inline ColliderModel cell_collider(const ScenarioCell& c) {
    const auto& p = c.params;
    switch (c.collider) {
        case ColliderKind::Logistic: return ColliderModel::logistic(0.0, p.delta1, p.delta2, c.delta3);
        case ColliderKind::Probit:
            return ColliderModel::probit(0.0, p.delta1, p.delta2, c.delta3, p.latent_sd);
        case ColliderKind::DoubleThreshold:
            return ColliderModel::double_threshold(0.0, p.delta1, p.delta2, c.delta3, p.latent_sd,
                                                   -1.0, 1.0);
        case ColliderKind::LogAdditive: break;
    }
    throw ValidationError("harness: collider kind '" + to_string(c.collider) +
                          "' is not part of the simulation study");
}

/// Runs one cell. Calibration uses seed.child("calibration"), data use
/// seed.child("data"). Throws on invalid input, on too few selected rows and
/// on fits that fail to converge.
inline BiasReport run_scenario(const ScenarioCell& cell, std::size_t n, const SeedSpec& seed,
                               const RunOptions& options = {}) {
    require(n >= 1, "run_scenario: n must be >= 1");
    BiasReport r;
    r.scenario_id = cell.id();
    r.experiment = cell.experiment;
    r.outcome_kind = cell.outcome;
    r.collider_kind = cell.collider;
    r.delta3_true = cell.delta3;
    r.selection_target = cell.selection_target;
    r.n = n;
    r.beta1_true = cell.params.beta1;

    const OutcomeModel outcome = cell_outcome(cell);
    CalibrationOptions cal;
    cal.sample_size = options.calibration_n;
    cal.seed = seed.child("calibration");
    r.collider = calibrate_selection(cell_collider(cell), cell.exposure, outcome,
                                     cell.selection_target, cal);
    const Scenario scenario = validate_scenario(cell.exposure, outcome, r.collider);
    const Dataset data = simulate(scenario, n, seed.child("data"), options.threads);

    const auto s = data.column("s");
    double selected = 0.0;
    for (double v : s) selected += v;
    r.n_selected = static_cast<std::size_t>(selected);
    r.realized_selection = selected / static_cast<double>(n);
    if (r.n_selected < options.min_selected) {
        throw ValidationError("run_scenario " + r.scenario_id + ": only " +
                              std::to_string(r.n_selected) + " selected rows (need " +
                              std::to_string(options.min_selected) + ")");
    }

    const Family family = family_for(cell.outcome);
    const DesignSpec design = DesignSpec::with_intercept({"x"});
    auto checked = [&](GlmFit fit, const std::string& what) {
        if (!fit.converged) {
            throw NumericalError("run_scenario " + r.scenario_id + ": " + what +
                                 " fit did not converge after " + std::to_string(fit.iterations) +
                                 " iterations");
        }
        return fit;
    };

    const auto full = checked(fit_glm(data, "y", design, family, options.control), "full-sample");
    r.beta1_full = full.coefficient("x");
    r.beta1_full_se = full.std_error("x");

    {
        const Dataset sel = data.selected("s");
        const auto fit = checked(fit_glm(sel, "y", design, family, options.control),
                                 "selected-sample");
        r.beta1_selected = fit.coefficient("x");
        r.bias_mc_se = fit.std_error("x");
    }
    r.observed_bias = r.beta1_selected - r.beta1_true;

    const auto logadd = checked(
        fit_logadditive_selection(data, {"x"}, "y", "s", true, options.control), "log-additive");
    r.delta3_hat = logadd.coefficient("x:y");
    r.delta3_hat_se = logadd.std_error("x:y");
    const double scale =
        cell.outcome == OutcomeKind::Linear ? cell.params.sigma * cell.params.sigma : 1.0;
    r.analytic_prediction = scale * r.delta3_hat;
    r.deviation = r.observed_bias - *r.analytic_prediction;
    return r;
}

// ---------------------------------------------------------------------------
// Experiments

inline std::vector<double> default_delta3_grid() {
    return {-0.5, -0.4, -0.3, -0.2, -0.1, 0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
}

struct ExperimentPlan {
    Experiment experiment = Experiment::Exp1_FiftyPercent;
    std::size_t n = 10'000'000;
    std::vector<double> delta3_grid = default_delta3_grid();
    std::vector<double> selection_targets{0.5};
    SeedSpec seed{0, "study"};
    std::vector<OutcomeKind> outcomes{OutcomeKind::Logistic, OutcomeKind::Linear,
                                      OutcomeKind::Poisson};
    std::vector<ColliderKind> colliders{ColliderKind::Logistic, ColliderKind::Probit,
                                        ColliderKind::DoubleThreshold};
    std::size_t calibration_n = 1'000'000;
    /// Cells with fewer selected rows fail instead of being fitted.
    std::size_t min_selected = 100;

    /// The plan for an experiment with its default selection fractions.
    static ExperimentPlan defaults(Experiment e) {
        ExperimentPlan p;
        p.experiment = e;
        if (e == Experiment::Exp2_VarySelection) p.selection_targets = {0.1, 0.3, 0.5, 0.7, 0.9};
        return p;
    }

    void validate() const {
        require(n >= 10'000, "experiment plan: n must be >= 10^4");
        require(!delta3_grid.empty(), "experiment plan: delta3_grid must not be empty");
        require(!selection_targets.empty(), "experiment plan: selection_targets must not be empty");
        require(!outcomes.empty() && !colliders.empty(),
                "experiment plan: outcome and collider lists must not be empty");
        for (double t : selection_targets) {
            require(t > 0.01 && t < 0.99, "experiment plan: selection targets must lie in (0.01, 0.99)");
        }
        for (double d : delta3_grid) {
            require(std::isfinite(d), "experiment plan: delta3 values must be finite");
        }
        for (auto o : outcomes) {
            require(o != OutcomeKind::LogBinomial,
                    "experiment plan: outcomes are logistic, linear or poisson");
        }
        for (auto c : colliders) {
            require(c != ColliderKind::LogAdditive,
                    "experiment plan: colliders are logistic, probit or double_threshold");
        }
    }

    /// Cells in a fixed order: outcome, collider, selection target, delta3.
    std::vector<ScenarioCell> cells() const {
        std::vector<ScenarioCell> out;
        for (auto o : outcomes) {
            for (auto c : colliders) {
                for (double t : selection_targets) {
                    for (double d3 : delta3_grid) {
                        ScenarioCell cell;
                        cell.experiment = to_string(experiment);
                        cell.outcome = o;
                        cell.collider = c;
                        cell.delta3 = d3;
                        cell.selection_target = t;
                        if (experiment == Experiment::ExpC_ContinuousExposure ||
                            experiment == Experiment::ExpN_NullEffects) {
                            cell.exposure = ExposureSpec::normal(0.0, 1.0);
                        }
                        if (experiment == Experiment::ExpN_NullEffects) {
                            cell.params.beta1 = 0.0;
                            cell.params.delta2 = 0.0;
                        }
                        out.push_back(cell);
                    }
                }
            }
        }
        return out;
    }
};

inline json to_json(const ExperimentPlan& p) {
    json outcomes = json::array(), colliders = json::array();
    for (auto o : p.outcomes) outcomes.push_back(to_string(o));
    for (auto c : p.colliders) colliders.push_back(to_string(c));
    return {{"version", kConfigVersion},
            {"experiment", to_string(p.experiment)},
            {"n", p.n},
            {"delta3_grid", p.delta3_grid},
            {"selection_targets", p.selection_targets},
            {"seed", to_json(p.seed)},
            {"outcomes", outcomes},
            {"colliders", colliders},
            {"calibration_n", p.calibration_n},
            {"min_selected", p.min_selected}};
}

/// Reads a plan; only "version" and "experiment" are required, everything
/// else falls back to that experiment's defaults.
inline ExperimentPlan plan_from_json(const json& j) {
    using namespace config_detail;
    check_version(j);
    auto p = ExperimentPlan::defaults(experiment_from_string(text(j, "experiment", "plan")));
    auto count = [&](const std::string& key) {
        const auto& v = field(j, key, "plan");
        if (!v.is_number_unsigned()) {
            throw ValidationError("config: field 'plan." + key + "' must be a positive integer");
        }
        return v.get<std::size_t>();
    };
    auto numbers = [&](const std::string& key) {
        const auto& v = field(j, key, "plan");
        if (!v.is_array()) throw ValidationError("config: field 'plan." + key + "' must be an array");
        std::vector<double> out;
        for (const auto& e : v) {
            if (!e.is_number()) {
                throw ValidationError("config: field 'plan." + key + "' must hold numbers");
            }
            out.push_back(e.get<double>());
        }
        return out;
    };
    if (j.contains("n")) p.n = count("n");
    if (j.contains("calibration_n")) p.calibration_n = count("calibration_n");
    if (j.contains("min_selected")) p.min_selected = count("min_selected");
    if (j.contains("delta3_grid")) p.delta3_grid = numbers("delta3_grid");
    if (j.contains("selection_targets")) p.selection_targets = numbers("selection_targets");
    if (j.contains("seed")) p.seed = seed_from_json(j["seed"]);
    if (j.contains("outcomes")) {
        p.outcomes.clear();
        for (const auto& o : j["outcomes"]) p.outcomes.push_back(outcome_kind_from_string(o.get<std::string>()));
    }
    if (j.contains("colliders")) {
        p.colliders.clear();
        for (const auto& c : j["colliders"]) p.colliders.push_back(collider_kind_from_string(c.get<std::string>()));
    }
    p.validate();
    return p;
}

struct BlockSummary {
    std::string experiment;
    OutcomeKind outcome;
    ColliderKind collider;
    double selection_target;
    std::size_t cells = 0;
    std::size_t failed = 0;
    double max_abs_deviation = 0.0;
    std::vector<std::string> errors;
};

struct ExperimentResult {
    ExperimentPlan plan;
    std::vector<BiasReport> reports;  // in plan.cells() order
    std::vector<BlockSummary> summary;

    double max_abs_deviation() const {
        double m = 0.0;
        for (const auto& r : reports) {
            if (r.ok()) m = std::max(m, std::abs(r.deviation));
        }
        return m;
    }
    std::size_t failures() const {
        return static_cast<std::size_t>(
            std::count_if(reports.begin(), reports.end(), [](const BiasReport& r) { return !r.ok(); }));
    }
};

/// Per (outcome, collider, selection target) block: cell and failure counts
/// and the largest |deviation| among successful cells.
inline std::vector<BlockSummary> summarize(const std::vector<BiasReport>& reports) {
    std::map<std::tuple<int, int, double>, BlockSummary> blocks;
    for (const auto& r : reports) {
        auto& b = blocks[{static_cast<int>(r.outcome_kind), static_cast<int>(r.collider_kind),
                          r.selection_target}];
        b.experiment = r.experiment;
        b.outcome = r.outcome_kind;
        b.collider = r.collider_kind;
        b.selection_target = r.selection_target;
        ++b.cells;
        if (r.ok()) {
            b.max_abs_deviation = std::max(b.max_abs_deviation, std::abs(r.deviation));
        } else {
            ++b.failed;
            b.errors.push_back(r.scenario_id + ": " + r.error);
        }
    }
    std::vector<BlockSummary> out;
    for (auto& [_, b] : blocks) out.push_back(std::move(b));
    return out;
}

/// Runs every cell of the plan, `threads` cells at a time. Each cell draws
/// from plan.seed.child(cell id), so results do not depend on scheduling.
/// A failing cell is recorded in its report and in the summary.
inline ExperimentResult run_experiment(const ExperimentPlan& plan, std::size_t threads = 1) {
    plan.validate();
    ExperimentResult result;
    result.plan = plan;
    const auto cells = plan.cells();
    result.reports.resize(cells.size());
    RunOptions options;
    options.calibration_n = plan.calibration_n;
    options.min_selected = plan.min_selected;
    parallel_for(cells.size(), threads, [&](std::size_t i) {
        try {
            result.reports[i] = run_scenario(cells[i], plan.n, plan.seed.child(cells[i].id()), options);
        } catch (const std::exception& e) {
            BiasReport r;
            r.scenario_id = cells[i].id();
            r.experiment = cells[i].experiment;
            r.outcome_kind = cells[i].outcome;
            r.collider_kind = cells[i].collider;
            r.delta3_true = cells[i].delta3;
            r.selection_target = cells[i].selection_target;
            r.n = plan.n;
            r.beta1_true = cells[i].params.beta1;
            r.error = e.what();
            result.reports[i] = std::move(r);
        }
    });
    result.summary = summarize(result.reports);
    return result;
}

/// Least-squares line through (analytic_prediction, observed_bias) over the
/// successful cells.
struct LineFit {
    double intercept;
    double slope;
    double intercept_se;
    double slope_se;
    std::size_t points;
};

inline LineFit regress_bias_on_prediction(const std::vector<BiasReport>& reports) {
    std::vector<double> xs, ys;
    for (const auto& r : reports) {
        if (!r.ok() || !r.analytic_prediction) continue;
        xs.push_back(*r.analytic_prediction);
        ys.push_back(r.observed_bias);
    }
    require(xs.size() >= 3, "regression needs at least three successful cells");
    Dataset d;
    d.add_column("prediction", std::move(xs));
    d.add_column("bias", std::move(ys));
    const auto fit = fit_glm(d, "bias", DesignSpec::with_intercept({"prediction"}),
                             Family::GaussianIdentity);
    return {fit.coefficient("(Intercept)"), fit.coefficient("prediction"),
            fit.std_error("(Intercept)"), fit.std_error("prediction"), d.rows()};
}

// ---------------------------------------------------------------------------
// Output

inline CsvTable bias_vs_true_table(const std::vector<BiasReport>& reports) {
    CsvTable t;
    t.header = {"experiment",         "outcome", "collider",  "delta3_true", "selection_target",
                "realized_selection", "bias",    "bias_mc_se"};
    for (const auto& r : reports) {
        t.rows.push_back({r.experiment, to_string(r.outcome_kind), to_string(r.collider_kind),
                          format_double(r.delta3_true), format_double(r.selection_target),
                          format_double(r.realized_selection), format_double(r.observed_bias),
                          format_double(r.bias_mc_se)});
    }
    return t;
}

inline CsvTable bias_vs_fitted_table(const std::vector<BiasReport>& reports) {
    CsvTable t = bias_vs_true_table(reports);
    for (auto h : {"delta3_hat", "delta3_hat_se", "analytic_prediction", "deviation"}) {
        t.header.push_back(h);
    }
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const auto& r = reports[i];
        t.rows[i].push_back(format_double(r.delta3_hat));
        t.rows[i].push_back(format_double(r.delta3_hat_se));
        t.rows[i].push_back(r.analytic_prediction ? format_double(*r.analytic_prediction) : "");
        t.rows[i].push_back(format_double(r.deviation));
    }
    return t;
}

inline CsvTable summary_table(const std::vector<BlockSummary>& blocks) {
    CsvTable t;
    t.header = {"experiment", "outcome", "collider",          "selection_target",
                "cells",      "failed",  "max_abs_deviation", "errors"};
    for (const auto& b : blocks) {
        std::string errors;
        for (const auto& e : b.errors) errors += (errors.empty() ? "" : "; ") + e;
        t.rows.push_back({b.experiment, to_string(b.outcome), to_string(b.collider),
                          format_double(b.selection_target), std::to_string(b.cells),
                          std::to_string(b.failed),
                          b.cells > b.failed ? format_double(b.max_abs_deviation) : "", errors});
    }
    return t;
}

/// Run metadata: the plan, the calibrated selection parameters of each cell,
/// and how double-threshold selection fractions were split between tails.
inline json experiment_metadata(const ExperimentResult& res) {
    json cells = json::array();
    for (const auto& r : res.reports) {
        json c{{"scenario_id", r.scenario_id}, {"n_selected", r.n_selected}};
        if (r.ok()) c["collider"] = to_json(r.collider);
        if (!r.ok()) c["error"] = r.error;
        cells.push_back(std::move(c));
    }
    return {{"plan", to_json(res.plan)},
            {"double_threshold_tails", "symmetric: target/2 of the latent mass below r_lower and "
                                       "target/2 above r_upper, delta0 = 0"},
            {"calibration", {{"sample_size", res.plan.calibration_n},
                             {"stream", "<cell seed>/calibration"},
                             {"tolerance", CalibrationOptions{}.tolerance}}},
            {"cells", std::move(cells)}};
}

inline void write_experiment_outputs(const ExperimentResult& res, const std::filesystem::path& dir) {
    atomic_write(dir / "bias_vs_true_delta3.csv", bias_vs_true_table(res.reports).to_string());
    atomic_write(dir / "bias_vs_fitted_delta3.csv", bias_vs_fitted_table(res.reports).to_string());
    atomic_write(dir / "summary.csv", summary_table(res.summary).to_string());
    atomic_write(dir / "metadata.json", experiment_metadata(res).dump(2) + "\n");
}

}  // namespace collider_lab
