#pragma once

// JSON forms of the model types and configuration files.
//
// Scenario file:
//   {
//     "version": 1,
//     "exposure": {"kind": "bernoulli", "p": 0.3}              | {"kind": "normal", "mean": 0, "sd": 1},
//     "outcome":  {"kind": "logistic" | "linear" | "poisson" | "log_binomial",
//                  "beta0": 0, "beta1": [0.2], "sigma": 0.5},
//     "collider": {"kind": "log_additive" | "logistic" | "probit" | "double_threshold",
//                  "delta0": 0, "delta1": 0.3, "delta2": 0.3, "delta3": 0.1,
//                  "latent_sd": 1.6, "r_lower": -1, "r_upper": 1}
//   }
// "beta1" also accepts a bare number. "sigma" is only read for linear
// outcomes, "latent_sd" and the thresholds only for the latent-variable
// colliders.

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "collider_lab/csv.hpp"
#include "collider_lab/error.hpp"
#include "collider_lab/glm.hpp"
#include "collider_lab/model.hpp"
#include "collider_lab/rng.hpp"

namespace collider_lab {

using json = nlohmann::ordered_json;

inline constexpr int kConfigVersion = 1;

namespace config_detail {

inline const json& field(const json& j, const std::string& key, const std::string& where) {
    if (!j.is_object()) throw ValidationError("config: '" + where + "' must be an object");
    const auto it = j.find(key);
    if (it == j.end()) throw ValidationError("config: missing field '" + where + "." + key + "'");
    return *it;
}

inline double number(const json& j, const std::string& key, const std::string& where) {
    const auto& v = field(j, key, where);
    if (!v.is_number()) {
        throw ValidationError("config: field '" + where + "." + key + "' must be a number");
    }
    return v.get<double>();
}

inline double number_or(const json& j, const std::string& key, const std::string& where,
                        double fallback) {
    return j.contains(key) ? number(j, key, where) : fallback;
}

inline std::string text(const json& j, const std::string& key, const std::string& where) {
    const auto& v = field(j, key, where);
    if (!v.is_string()) {
        throw ValidationError("config: field '" + where + "." + key + "' must be a string");
    }
    return v.get<std::string>();
}

}  // namespace config_detail

// ---------------------------------------------------------------------------
// Enum names

inline std::string to_string(ExposureKind k) {
    return k == ExposureKind::Bernoulli ? "bernoulli" : "normal";
}

inline std::string to_string(OutcomeKind k) {
    switch (k) {
        case OutcomeKind::Logistic: return "logistic";
        case OutcomeKind::Linear: return "linear";
        case OutcomeKind::Poisson: return "poisson";
        case OutcomeKind::LogBinomial: return "log_binomial";
    }
    return "unknown";
}

inline std::string to_string(ColliderKind k) {
    switch (k) {
        case ColliderKind::LogAdditive: return "log_additive";
        case ColliderKind::Logistic: return "logistic";
        case ColliderKind::Probit: return "probit";
        case ColliderKind::DoubleThreshold: return "double_threshold";
    }
    return "unknown";
}

inline OutcomeKind outcome_kind_from_string(const std::string& s) {
    for (auto k : {OutcomeKind::Logistic, OutcomeKind::Linear, OutcomeKind::Poisson,
                   OutcomeKind::LogBinomial}) {
        if (to_string(k) == s) return k;
    }
    throw ValidationError("config: unknown outcome kind '" + s + "'");
}

inline ColliderKind collider_kind_from_string(const std::string& s) {
    for (auto k : {ColliderKind::LogAdditive, ColliderKind::Logistic, ColliderKind::Probit,
                   ColliderKind::DoubleThreshold}) {
        if (to_string(k) == s) return k;
    }
    throw ValidationError("config: unknown collider kind '" + s + "'");
}

// ---------------------------------------------------------------------------
// Model types

inline json to_json(const ExposureSpec& e) {
    if (e.kind == ExposureKind::Bernoulli) return {{"kind", "bernoulli"}, {"p", e.p}};
    return {{"kind", "normal"}, {"mean", e.mean}, {"sd", e.sd}};
}

inline ExposureSpec exposure_from_json(const json& j) {
    using namespace config_detail;
    const auto kind = text(j, "kind", "exposure");
    if (kind == "bernoulli") return ExposureSpec::bernoulli(number(j, "p", "exposure"));
    if (kind == "normal") {
        return ExposureSpec::normal(number(j, "mean", "exposure"), number(j, "sd", "exposure"));
    }
    throw ValidationError("config: unknown exposure kind '" + kind + "'");
}

inline json to_json(const OutcomeModel& o) {
    json j{{"kind", to_string(o.kind)}, {"beta0", o.beta0}, {"beta1", o.beta1}};
    if (o.kind == OutcomeKind::Linear) j["sigma"] = o.sigma;
    return j;
}

inline OutcomeModel outcome_from_json(const json& j) {
    using namespace config_detail;
    OutcomeModel o;
    o.kind = outcome_kind_from_string(text(j, "kind", "outcome"));
    o.beta0 = number(j, "beta0", "outcome");
    const auto& b1 = field(j, "beta1", "outcome");
    if (b1.is_number()) {
        o.beta1 = {b1.get<double>()};
    } else if (b1.is_array() && !b1.empty()) {
        o.beta1.clear();
        for (const auto& v : b1) {
            if (!v.is_number()) throw ValidationError("config: 'outcome.beta1' must hold numbers");
            o.beta1.push_back(v.get<double>());
        }
    } else {
        throw ValidationError("config: 'outcome.beta1' must be a number or a non-empty array");
    }
    if (o.kind == OutcomeKind::Linear) o.sigma = number(j, "sigma", "outcome");
    return o;
}

inline json to_json(const ColliderModel& c) {
    json j{{"kind", to_string(c.kind)},
           {"delta0", c.delta0},
           {"delta1", c.delta1},
           {"delta2", c.delta2},
           {"delta3", c.delta3}};
    if (c.kind == ColliderKind::Probit || c.kind == ColliderKind::DoubleThreshold) {
        j["latent_sd"] = c.latent_sd;
    }
    if (c.kind == ColliderKind::DoubleThreshold) {
        j["r_lower"] = c.r_lower;
        j["r_upper"] = c.r_upper;
    }
    return j;
}

inline ColliderModel collider_from_json(const json& j) {
    using namespace config_detail;
    ColliderModel c;
    c.kind = collider_kind_from_string(text(j, "kind", "collider"));
    c.delta0 = number_or(j, "delta0", "collider", 0.0);
    c.delta1 = number_or(j, "delta1", "collider", 0.0);
    c.delta2 = number_or(j, "delta2", "collider", 0.0);
    c.delta3 = number_or(j, "delta3", "collider", 0.0);
    if (c.kind == ColliderKind::Probit || c.kind == ColliderKind::DoubleThreshold) {
        c.latent_sd = number_or(j, "latent_sd", "collider", 1.6);
    }
    if (c.kind == ColliderKind::DoubleThreshold) {
        c.r_lower = number(j, "r_lower", "collider");
        c.r_upper = number(j, "r_upper", "collider");
    }
    return c;
}

inline json to_json(const SeedSpec& s) {
    return {{"master_seed", s.master_seed}, {"stream_id", s.stream_id}};
}

inline SeedSpec seed_from_json(const json& j) {
    using namespace config_detail;
    SeedSpec s;
    if (j.is_number_unsigned()) {
        s.master_seed = j.get<std::uint64_t>();
        return s;
    }
    const auto& m = field(j, "master_seed", "seed");
    if (!m.is_number_unsigned()) {
        throw ValidationError("config: 'seed.master_seed' must be a non-negative integer");
    }
    s.master_seed = m.get<std::uint64_t>();
    if (j.contains("stream_id")) s.stream_id = text(j, "stream_id", "seed");
    return s;
}

inline json to_json(const FitControl& c) {
    return {{"max_iter", c.max_iter}, {"coef_tol", c.coef_tol},
            {"step_halving_max", c.step_halving_max}};
}

inline FitControl fit_control_from_json(const json& j) {
    using namespace config_detail;
    FitControl c;
    if (j.contains("max_iter")) c.max_iter = static_cast<int>(number(j, "max_iter", "control"));
    c.coef_tol = number_or(j, "coef_tol", "control", c.coef_tol);
    if (j.contains("step_halving_max")) {
        c.step_halving_max = static_cast<int>(number(j, "step_halving_max", "control"));
    }
    return c;
}

// ---------------------------------------------------------------------------
// Scenario files

inline json scenario_to_json(const Scenario& s) {
    return {{"version", kConfigVersion},
            {"exposure", to_json(s.exposure())},
            {"outcome", to_json(s.outcome())},
            {"collider", to_json(s.collider())}};
}

/// A missing "version" means the current one; any other value is rejected.
inline void check_version(const json& j) {
    if (!j.is_object()) throw ValidationError("config: top level must be a JSON object");
    if (!j.contains("version")) return;
    const double v = config_detail::number(j, "version", "config");
    if (v != kConfigVersion) {
        throw ValidationError("config: unsupported version " + j["version"].dump() +
                              " (expected " + std::to_string(kConfigVersion) + ")");
    }
}

inline Scenario scenario_from_json(const json& j) {
    check_version(j);
    return validate_scenario(exposure_from_json(config_detail::field(j, "exposure", "config")),
                             outcome_from_json(config_detail::field(j, "outcome", "config")),
                             collider_from_json(config_detail::field(j, "collider", "config")));
}

/// Parses JSON text, turning syntax errors into ValidationError with the
/// line and column.
inline json parse_json(const std::string& text, const std::string& source = "config") {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i < std::min(e.byte > 0 ? e.byte - 1 : 0, text.size()); ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ValidationError(source + ": JSON syntax error at line " + std::to_string(line) +
                              ", column " + std::to_string(col));
    }
}

inline json read_json_file(const std::filesystem::path& path) {
    return parse_json(read_text_file(path), path.string());
}

}  // namespace collider_lab
