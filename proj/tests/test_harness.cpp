#include <cmath>
#include <filesystem>
#include <set>

#include <gtest/gtest.h>

#include "collider_lab/harness.hpp"

using namespace collider_lab;
namespace fs = std::filesystem;

namespace {

ExperimentPlan small_plan() {
    ExperimentPlan p;
    p.n = 40'000;
    p.calibration_n = 50'000;
    p.delta3_grid = {-0.3, 0.3};
    p.seed = {11, "harness-test"};
    return p;
}

RunOptions calibrated_on(std::size_t n) {
    RunOptions o;
    o.calibration_n = n;
    return o;
}

}  // namespace

TEST(Cells, PlanOrderAndCount) {
    const auto p = ExperimentPlan::defaults(Experiment::Exp2_VarySelection);
    const auto cells = p.cells();
    EXPECT_EQ(cells.size(), 3u * 3u * 5u * 11u);
    EXPECT_EQ(cells.front().outcome, OutcomeKind::Logistic);
    EXPECT_EQ(cells.front().delta3, -0.5);
    EXPECT_EQ(cells.back().collider, ColliderKind::DoubleThreshold);
    EXPECT_EQ(cells.back().selection_target, 0.9);
}

TEST(Cells, NullExperimentRemovesEffects) {
    const auto cells = ExperimentPlan::defaults(Experiment::ExpN_NullEffects).cells();
    for (const auto& c : cells) {
        EXPECT_EQ(c.params.beta1, 0.0);
        EXPECT_EQ(c.params.delta2, 0.0);
        EXPECT_EQ(c.exposure.kind, ExposureKind::Normal);
    }
}

TEST(Cells, IdsAreUnique) {
    const auto cells = ExperimentPlan::defaults(Experiment::Exp2_VarySelection).cells();
    std::set<std::string> ids;
    for (const auto& c : cells) ids.insert(c.id());
    EXPECT_EQ(ids.size(), cells.size());
}

TEST(RunScenario, LogisticPrediction) {
    ScenarioCell cell;
    cell.delta3 = 0.4;
    const auto r = run_scenario(cell, 200'000, {3, "scenario"}, calibrated_on(100'000));
    ASSERT_TRUE(r.ok());
    EXPECT_NEAR(r.realized_selection, 0.5, 0.01);
    EXPECT_NEAR(r.observed_bias, 0.13, 5 * r.bias_mc_se);
    ASSERT_TRUE(r.analytic_prediction.has_value());
    EXPECT_EQ(*r.analytic_prediction, r.delta3_hat);
    EXPECT_DOUBLE_EQ(r.deviation, r.observed_bias - r.delta3_hat);
    EXPECT_EQ(r.collider.kind, ColliderKind::Logistic);
}

TEST(RunScenario, LinearPredictionScaledByVariance) {
    ScenarioCell cell;
    cell.outcome = OutcomeKind::Linear;
    cell.delta3 = -0.5;
    const auto r = run_scenario(cell, 100'000, {3, "scenario"}, calibrated_on(100'000));
    EXPECT_DOUBLE_EQ(*r.analytic_prediction, 0.25 * r.delta3_hat);
}

TEST(RunScenario, DoubleThresholdCalibration) {
    ScenarioCell cell;
    cell.collider = ColliderKind::DoubleThreshold;
    cell.selection_target = 0.3;
    const auto r = run_scenario(cell, 100'000, {3, "scenario"}, calibrated_on(100'000));
    EXPECT_NEAR(r.realized_selection, 0.3, 0.01);
    EXPECT_LT(r.collider.r_lower, r.collider.r_upper);
    EXPECT_EQ(r.collider.delta0, 0.0);
}

TEST(RunScenario, TooFewSelectedRows) {
    ScenarioCell cell;
    cell.selection_target = 0.02;
    EXPECT_THROW(run_scenario(cell, 2'000, {3, "scenario"}, calibrated_on(20'000)),
                 ValidationError);
}

TEST(RunScenario, RejectsLogBinomialOutcome) {
    ScenarioCell cell;
    cell.outcome = OutcomeKind::LogBinomial;
    EXPECT_THROW(run_scenario(cell, 10'000, {}), ValidationError);
}

TEST(RunScenario, NonConvergenceNamesScenario) {
    ScenarioCell cell;
    RunOptions options;
    options.calibration_n = 20'000;
    options.control.max_iter = 1;
    try {
        run_scenario(cell, 20'000, {3, "scenario"}, options);
        FAIL();
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find(cell.id()), std::string::npos) << e.what();
    }
}

TEST(RunExperiment, DeterministicAndThreadInvariant) {
    const auto plan = small_plan();
    const auto a = run_experiment(plan, 1);
    const auto b = run_experiment(plan, 3);
    ASSERT_EQ(a.reports.size(), 18u);
    EXPECT_EQ(a.failures(), 0u);
    EXPECT_EQ(bias_vs_fitted_table(a.reports).to_string(),
              bias_vs_fitted_table(b.reports).to_string());
    EXPECT_EQ(experiment_metadata(a).dump(), experiment_metadata(b).dump());
}

TEST(RunExperiment, SeedChangesResults) {
    auto plan = small_plan();
    plan.outcomes = {OutcomeKind::Logistic};
    plan.colliders = {ColliderKind::Logistic};
    const auto a = run_experiment(plan);
    plan.seed.master_seed += 1;
    const auto b = run_experiment(plan);
    EXPECT_NE(a.reports[0].beta1_selected, b.reports[0].beta1_selected);
}

TEST(RunExperiment, FailuresAreRecorded) {
    auto plan = small_plan();
    plan.n = 10'000;
    plan.min_selected = 6'000;
    plan.colliders = {ColliderKind::Logistic};
    plan.outcomes = {OutcomeKind::Logistic};
    const auto res = run_experiment(plan);
    EXPECT_EQ(res.failures(), 2u);
    ASSERT_EQ(res.summary.size(), 1u);
    EXPECT_EQ(res.summary[0].failed, 2u);
    EXPECT_EQ(res.summary[0].errors.size(), 2u);
    const auto csv = summary_table(res.summary).to_string();
    EXPECT_NE(csv.find("selected rows"), std::string::npos);
}

TEST(RunExperiment, OutputFiles) {
    auto plan = small_plan();
    plan.outcomes = {OutcomeKind::Poisson};
    const auto res = run_experiment(plan);
    const auto dir = fs::temp_directory_path() / "collider_lab_harness_out";
    fs::remove_all(dir);
    write_experiment_outputs(res, dir);
    const auto t = read_csv(dir / "bias_vs_true_delta3.csv");
    EXPECT_EQ(t.header.size(), 8u);
    EXPECT_EQ(t.rows.size(), 6u);
    const auto f = read_csv(dir / "bias_vs_fitted_delta3.csv");
    EXPECT_EQ(f.header.back(), "deviation");
    const double dev = parse_number(f.rows[0][f.column_index("deviation")], "dev");
    EXPECT_EQ(dev, res.reports[0].deviation);
    EXPECT_EQ(read_csv(dir / "summary.csv").rows.size(), 3u);
    const auto meta = read_json_file(dir / "metadata.json");
    EXPECT_EQ(meta["cells"].size(), 6u);
    EXPECT_TRUE(meta.contains("double_threshold_tails"));
}

TEST(Regression, RecoversLine) {
    std::vector<BiasReport> reports;
    for (int i = 0; i < 10; ++i) {
        BiasReport r;
        r.analytic_prediction = 0.1 * i;
        r.observed_bias = 0.02 + 0.5 * 0.1 * i;
        reports.push_back(r);
    }
    BiasReport failed;
    failed.error = "x";
    reports.push_back(failed);
    const auto line = regress_bias_on_prediction(reports);
    EXPECT_EQ(line.points, 10u);
    EXPECT_NEAR(line.slope, 0.5, 1e-12);
    EXPECT_NEAR(line.intercept, 0.02, 1e-12);
}
