#pragma once

// Command-line front end. run_cli() is the whole program; tools/collider_lab.cpp
// only forwards argv to it.
//
// Exit status: 0 success, 1 invalid input (arguments, config, data),
// 2 numerical failure (non-convergence, failed oracle rows, failed cells).

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "collider_lab/analytic.hpp"
#include "collider_lab/config.hpp"
#include "collider_lab/csv.hpp"
#include "collider_lab/datagen.hpp"
#include "collider_lab/diagnostics.hpp"
#include "collider_lab/error.hpp"
#include "collider_lab/glm.hpp"
#include "collider_lab/harness.hpp"
#include "collider_lab/parallel.hpp"
#include "collider_lab/verification.hpp"

namespace collider_lab {

enum class Subcommand { Simulate, Fit, Analytic, Experiment, Oracle, Diagnose };

struct CliInvocation {
    Subcommand subcommand = Subcommand::Oracle;
    std::filesystem::path config_path;
    std::filesystem::path output_dir = ".";
    /// False when --out was left at its default.
    bool output_given = false;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> n_override;
    std::size_t threads = 1;
};

namespace cli_detail {

/// Relative data paths in a config are resolved against the config's folder.
inline std::filesystem::path resolve(const std::filesystem::path& config, const std::string& p) {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : config.parent_path() / path;
}

inline json load_config(const CliInvocation& inv) {
    require(!inv.config_path.empty(), "--config is required for this subcommand");
    return read_json_file(inv.config_path);
}

inline std::size_t count_field(const json& j, const std::string& key, std::size_t fallback) {
    if (!j.contains(key)) return fallback;
    if (!j[key].is_number_unsigned() || j[key].get<std::size_t>() == 0) {
        throw ValidationError("config: field '" + key + "' must be a positive integer");
    }
    return j[key].get<std::size_t>();
}

inline SeedSpec seed_of(const json& j, const CliInvocation& inv, const std::string& stream) {
    SeedSpec s{0, stream};
    if (j.contains("seed")) s = seed_from_json(j["seed"]);
    if (inv.seed) s.master_seed = *inv.seed;
    return s;
}

inline std::string fit_summary(const GlmFit& fit) {
    std::string out = "# family=" + to_string(fit.family) + ",deviance=" + format_double(fit.deviance) +
                      ",iterations=" + std::to_string(fit.iterations) +
                      ",converged=" + format_bool(fit.converged) +
                      ",boundary_flag=" + format_bool(fit.boundary_flag) + ",n=" + std::to_string(fit.n) +
                      "\n";
    CsvTable t;
    t.header = {"term", "estimate", "std_error"};
    for (std::size_t j = 0; j < fit.terms.size(); ++j) {
        t.rows.push_back({fit.terms[j], format_double(fit.coefficients[j]),
                          format_double(fit.std_errors[j])});
    }
    return out + t.to_string();
}

// --- subcommands -----------------------------------------------------------

/// Config: a scenario file plus optional "n" (default 10^5), "seed", and
/// "selection_target" (calibrates delta0 or the thresholds first).
inline int simulate_cmd(const CliInvocation& inv, std::ostream& out) {
    const json j = load_config(inv);
    Scenario scenario = scenario_from_json(j);
    const std::size_t n = inv.n_override.value_or(count_field(j, "n", 100'000));
    const SeedSpec seed = seed_of(j, inv, "simulate");
    if (j.contains("selection_target")) {
        CalibrationOptions cal;
        cal.seed = seed.child("calibration");
        const double target = config_detail::number(j, "selection_target", "config");
        scenario = validate_scenario(
            scenario.exposure(), scenario.outcome(),
            calibrate_selection(scenario.collider(), scenario.exposure(), scenario.outcome(), target, cal));
    }
    const Dataset d = simulate(scenario, n, seed, inv.threads);
    const std::string csv = dataset_to_csv(d).to_string();
    json used = scenario_to_json(scenario);
    used["n"] = n;
    used["seed"] = to_json(seed);
    atomic_write(inv.output_dir / "dataset.csv", csv);
    atomic_write(inv.output_dir / "scenario.json", used.dump(2) + "\n");
    double selected = 0.0;
    for (double v : d.column("s")) selected += v;
    out << "wrote " << (inv.output_dir / "dataset.csv").string() << ": " << n << " rows, "
        << static_cast<std::size_t>(selected) << " selected\n";
    return 0;
}

/// Config: {"data": csv path, "response": name, "family": name,
///          "terms": ["x", "x:y", ...], "intercept": true, "subset": column,
///          "control": {...}}. "subset" keeps rows where that column is 1.
inline int fit_cmd(const CliInvocation& inv, std::ostream& out) {
    using namespace config_detail;
    const json j = load_config(inv);
    check_version(j);
    Dataset data = dataset_from_csv(read_csv(resolve(inv.config_path, text(j, "data", "config"))));
    if (j.contains("subset")) data = data.selected(text(j, "subset", "config"));
    DesignSpec design;
    const bool intercept = !j.contains("intercept") || field(j, "intercept", "config").get<bool>();
    if (intercept) design.terms.push_back(Term::intercept());
    const auto& terms = field(j, "terms", "config");
    if (!terms.is_array()) throw ValidationError("config: 'terms' must be an array of names");
    for (const auto& t : terms) {
        if (!t.is_string()) throw ValidationError("config: 'terms' must be an array of names");
        design.terms.push_back(Term::parse(t.get<std::string>()));
    }
    const FitControl control = j.contains("control") ? fit_control_from_json(j["control"]) : FitControl{};
    const auto fit = fit_glm(data, text(j, "response", "config"), design,
                             family_from_string(text(j, "family", "config")), control);
    if (!fit.converged) {
        throw NumericalError("fit did not converge after " + std::to_string(fit.iterations) +
                             " iterations");
    }
    const std::string summary = fit_summary(fit);
    atomic_write(inv.output_dir / "fit.csv", summary);
    out << summary;
    return 0;
}

/// Config: {"formula": name, ...parameters}. Prints a one-row CSV and also
/// writes analytic.csv when --out is given. Formulas and parameters:
///   or_bias, logistic_coef_bias            delta3
///   linear_coef_bias                       delta2, delta3, sigma
///   poisson_coef_bias                      delta2, delta3
///   rr_unconditional                       outcome, x
///   rr_conditional, rr_bias                outcome, collider, x
///   logistic_collider_or_bias              collider, x
inline int analytic_cmd(const CliInvocation& inv, std::ostream& out) {
    using namespace config_detail;
    const json j = load_config(inv);
    check_version(j);
    const std::string formula = text(j, "formula", "config");
    const double x = number_or(j, "x", "config", 0.0);
    BiasScale scale = BiasScale::LogOdds;
    double value = 0.0;
    double intercept = NAN;
    double at_x = NAN;
    auto outcome = [&] { return outcome_from_json(field(j, "outcome", "config")); };
    auto collider = [&] { return collider_from_json(field(j, "collider", "config")); };
    if (formula == "or_bias") {
        scale = BiasScale::OddsRatio;
        value = or_bias_logadditive(number(j, "delta3", "config"));
    } else if (formula == "logistic_coef_bias") {
        value = logistic_coef_bias(number(j, "delta3", "config"));
    } else if (formula == "linear_coef_bias") {
        scale = BiasScale::LinearCoef;
        const auto b = linear_coef_bias(number(j, "delta2", "config"), number(j, "delta3", "config"),
                                        number(j, "sigma", "config"));
        value = b.slope;
        intercept = b.intercept;
    } else if (formula == "poisson_coef_bias") {
        scale = BiasScale::LogRate;
        const auto b = poisson_coef_bias(number(j, "delta2", "config"), number(j, "delta3", "config"));
        value = b.slope;
        intercept = b.intercept;
    } else if (formula == "rr_unconditional") {
        scale = BiasScale::RiskRatioDifference;
        value = rr_unconditional(outcome(), x);
        at_x = x;
    } else if (formula == "rr_conditional") {
        scale = BiasScale::RiskRatioDifference;
        value = rr_conditional(outcome(), collider(), x);
        at_x = x;
    } else if (formula == "rr_bias") {
        scale = BiasScale::RiskRatioDifference;
        value = rr_bias(outcome(), collider(), x);
        at_x = x;
    } else if (formula == "logistic_collider_or_bias") {
        value = logistic_collider_or_bias(collider(), x);
        at_x = x;
    } else {
        throw ValidationError("analytic: unknown formula '" + formula + "'");
    }
    CsvTable t;
    t.header = {"formula", "scale", "at_x", "value", "intercept_value"};
    t.rows.push_back({formula, to_string(scale), format_double(at_x), format_double(value),
                      format_double(intercept)});
    const std::string csv = t.to_string();
    if (inv.output_given) atomic_write(inv.output_dir / "analytic.csv", csv);
    out << csv;
    return 0;
}

inline int experiment_cmd(const CliInvocation& inv, std::ostream& out, std::ostream& err) {
    const json j = load_config(inv);
    ExperimentPlan plan = plan_from_json(j);
    if (inv.seed) plan.seed.master_seed = *inv.seed;
    if (inv.n_override) plan.n = *inv.n_override;
    plan.validate();
    const auto res = run_experiment(plan, inv.threads);
    write_experiment_outputs(res, inv.output_dir);
    out << "wrote " << res.reports.size() << " cells to " << inv.output_dir.string()
        << "; max |deviation| " << format_double(res.max_abs_deviation()) << "\n";
    if (res.failures() > 0) {
        for (const auto& r : res.reports) {
            if (!r.ok()) err << "cell " << r.scenario_id << " failed: " << r.error << "\n";
        }
        return 2;
    }
    return 0;
}

inline int oracle_cmd(const CliInvocation& inv, std::ostream& out) {
    const auto grid = run_verification_grid();
    atomic_write(inv.output_dir / "oracle_grid.csv", verification_csv(grid).to_string());
    std::size_t failed = 0;
    for (const auto& r : grid.rows) failed += !r.pass;
    out << "oracle grid: " << grid.rows.size() << " rows, " << failed << " failed, max abs deviation "
        << format_double(grid.max_deviation()) << "\n";
    return failed == 0 ? 0 : 2;
}

/// Config: a diagnostic config plus "data": csv path.
inline int diagnose_cmd(const CliInvocation& inv, std::ostream& out) {
    const json j = load_config(inv);
    const auto config = diagnostic_config_from_json(j);
    const auto data = dataset_from_csv(
        read_csv(resolve(inv.config_path, config_detail::text(j, "data", "config"))));
    const auto report = run_diagnostic(data, config);
    atomic_write(inv.output_dir / "diagnostic.csv", diagnostic_csv(report).to_string());
    atomic_write(inv.output_dir / "diagnostic.json", to_json(report).dump(2) + "\n");
    out << diagnostic_table(report);
    return 0;
}

}  // namespace cli_detail

inline int dispatch(const CliInvocation& inv, std::ostream& out, std::ostream& err) {
    using namespace cli_detail;
    switch (inv.subcommand) {
        case Subcommand::Simulate: return simulate_cmd(inv, out);
        case Subcommand::Fit: return fit_cmd(inv, out);
        case Subcommand::Analytic: return analytic_cmd(inv, out);
        case Subcommand::Experiment: return experiment_cmd(inv, out, err);
        case Subcommand::Oracle: return oracle_cmd(inv, out);
        case Subcommand::Diagnose: return diagnose_cmd(inv, out);
    }
    return 1;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
    CLI::App app{"Collider (selection) bias toolkit"};
    app.require_subcommand(1);
    CliInvocation inv;
    inv.threads = default_thread_count();
    std::string config, output = ".";
    std::uint64_t seed = 0;
    std::size_t n = 0;

    const std::pair<const char*, const char*> commands[] = {
        {"simulate", "Draw a dataset from a scenario config"},
        {"fit", "Fit a GLM to a CSV dataset"},
        {"analytic", "Evaluate a closed-form bias formula"},
        {"experiment", "Run a simulation experiment and write its CSVs"},
        {"oracle", "Check the closed forms against the exact oracles"},
        {"diagnose", "Run the selection-bias diagnostic on a CSV dataset"}};
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config, "JSON config file");
        sub->add_option("--out", output, "Output directory")->capture_default_str();
        sub->add_option("--seed", seed, "Master seed override");
        sub->add_option("--n", n, "Sample size override")->check(CLI::PositiveNumber);
        sub->add_option("--threads", inv.threads, "Worker threads (default COLLIDER_LAB_THREADS or 1)")
            ->check(CLI::PositiveNumber);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }

    auto* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    inv.subcommand = name == "simulate"     ? Subcommand::Simulate
                     : name == "fit"        ? Subcommand::Fit
                     : name == "analytic"   ? Subcommand::Analytic
                     : name == "experiment" ? Subcommand::Experiment
                     : name == "oracle"     ? Subcommand::Oracle
                                            : Subcommand::Diagnose;
    inv.config_path = config;
    inv.output_dir = output;
    inv.output_given = sub->count("--out") > 0;
    if (sub->count("--seed")) inv.seed = seed;
    if (sub->count("--n")) inv.n_override = n;

    try {
        return dispatch(inv, out, err);
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const NumericalError& e) {
        err << "numerical failure: " << e.what() << "\n";
        return 2;
    } catch (const json::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "numerical failure: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace collider_lab
