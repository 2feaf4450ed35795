#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "collider_lab/datagen.hpp"
#include "collider_lab/oracles.hpp"

using namespace collider_lab;

TEST(EnumerationOracle, NoInteractionLeavesOddsRatio) {
    const auto o = OutcomeModel::logistic(-0.4, 0.7);
    const auto c = ColliderModel::log_additive(-1.2, 0.3, 0.3, 0.0);
    const auto e = enumerate_binary_oracle(o, c);
    EXPECT_NEAR(e.or_conditional, e.or_unconditional, 1e-14);
}

TEST(EnumerationOracle, InteractionHalf) {
    const auto o = OutcomeModel::logistic(0.0, 0.2);
    const auto c = ColliderModel::log_additive(-1.5, 0.3, 0.3, 0.5);
    EXPECT_NEAR(enumerate_binary_oracle(o, c).or_ratio(), std::exp(0.5), 1e-12);
}

TEST(EnumerationOracle, LogisticColliderWithoutExposureTerms) {
    const auto o = OutcomeModel::logistic(0.3, -0.5);
    const auto c = ColliderModel::logistic(0.0, 0.0, 0.3, 0.0);
    const auto e = enumerate_binary_oracle(o, c);
    EXPECT_NEAR(e.or_conditional, e.or_unconditional, 1e-14);
}

TEST(EnumerationOracle, UnconditionalQuantities) {
    const auto o = OutcomeModel::logistic(0.0, 0.2);
    const auto c = ColliderModel::log_additive(-1.0, 0.0, 0.0, 0.0);
    const auto e = enumerate_binary_oracle(o, c);
    EXPECT_NEAR(std::log(e.or_unconditional), 0.2, 1e-14);
    EXPECT_NEAR(e.rr_unconditional, math::expit(0.2) / 0.5, 1e-14);
}

TEST(EnumerationOracle, RejectsInvalidSelectionProbability) {
    const auto o = OutcomeModel::logistic(0.0, 0.2);
    const auto c = ColliderModel::log_additive(-0.2, 0.3, 0.3, 0.1);
    EXPECT_THROW(enumerate_binary_oracle(o, c), ValidationError);
}

TEST(EnumerationOracle, RejectsInvalidOutcomeProbability) {
    const auto o = OutcomeModel::log_binomial(-0.1, 0.3);
    const auto c = ColliderModel::log_additive(-1.0, 0.0, 0.0, 0.0);
    EXPECT_THROW(enumerate_binary_oracle(o, c), ValidationError);
}

TEST(EnumerationOracle, AgreesWithLargeSimulation) {
    // 10^7 draws with X ~ Bernoulli(0.5); log-odds ratios from cell counts.
    const auto scenario = validate_scenario(ExposureSpec::bernoulli(0.5),
                                            OutcomeModel::logistic(0.0, 0.2),
                                            ColliderModel::log_additive(-1.5, 0.3, 0.3, 0.5));
    const auto d = simulate(scenario, 10'000'000, {7, "enumeration-check"});
    double all[2][2] = {{0, 0}, {0, 0}};
    double sel[2][2] = {{0, 0}, {0, 0}};
    const auto x = d.column("x");
    const auto y = d.column("y");
    const auto s = d.column("s");
    for (std::size_t i = 0; i < d.rows(); ++i) {
        const int xi = static_cast<int>(x[i]);
        const int yi = static_cast<int>(y[i]);
        all[xi][yi] += 1;
        if (s[i] == 1.0) sel[xi][yi] += 1;
    }
    auto log_or = [](double t[2][2]) {
        return std::log(t[1][1] * t[0][0] / (t[1][0] * t[0][1]));
    };
    auto var = [](double t[2][2]) {
        return 1 / t[0][0] + 1 / t[0][1] + 1 / t[1][0] + 1 / t[1][1];
    };
    const double observed = log_or(sel) - log_or(all);
    const double se = std::sqrt(var(sel) + var(all));
    const auto e = enumerate_binary_oracle(scenario.outcome(), scenario.collider());
    EXPECT_NEAR(observed, e.log_or_difference(), 3 * se);
    EXPECT_NEAR(e.log_or_difference(), 0.5, 1e-12);
}

TEST(PoissonOracle, NoSelectionOnOutcome) {
    const auto o = OutcomeModel::poisson(0.4, 0.2);
    const auto c = ColliderModel::log_additive(-1.0, 0.5, 0.0, 0.0);
    for (double x : {0.0, 1.0, 3.0}) {
        const auto r = poisson_oracle(o, c, x);
        const double lambda = std::exp(0.4 + 0.2 * x);
        EXPECT_NEAR(r.mean, lambda, 1e-14 * lambda);
    }
}

TEST(PoissonOracle, TiltedMeanExample) {
    const auto o = OutcomeModel::poisson(0.0, 0.2);
    const auto c = ColliderModel::log_additive(-2.0, 0.3, 0.3, 0.1);
    for (double x : {0.0, 1.0}) {
        const double kappa = std::exp(0.3 + (0.2 + 0.1) * x);
        EXPECT_NEAR(poisson_oracle(o, c, x).mean, kappa, 1e-10);
    }
    EXPECT_NEAR(poisson_oracle(o, c, 1.0).mean, std::exp(0.6), 1e-10);
}

TEST(PoissonOracle, MomentsMatchPoisson) {
    const auto o = OutcomeModel::poisson(1.0, -0.3);
    const auto c = ColliderModel::log_additive(-3.0, 0.1, 0.25, -0.2);
    for (double x : {-1.0, 0.0, 2.0}) {
        const auto r = poisson_oracle(o, c, x);
        const double kappa = std::exp(1.25 + (-0.5) * x);
        EXPECT_NEAR(r.mean / kappa, 1.0, 1e-9);
        EXPECT_NEAR(r.second_moment / (kappa + kappa * kappa), 1.0, 1e-9);
    }
}

TEST(PoissonOracle, LargeRate) {
    const auto o = OutcomeModel::poisson(5.0, 0.0);
    const auto c = ColliderModel::log_additive(-1.0, 0.0, 0.01, 0.0);
    const auto r = poisson_oracle(o, c, 0.0);
    const double kappa = std::exp(5.01);
    EXPECT_GT(r.truncation, static_cast<long>(kappa + 40 * std::sqrt(kappa)));
    EXPECT_LT(r.tail_bound, 1e-14);
    EXPECT_NEAR(r.mean / kappa, 1.0, 1e-10);
}

TEST(PoissonOracle, RejectsWrongModels) {
    const auto c = ColliderModel::log_additive(-1.0, 0.0, 0.0, 0.0);
    EXPECT_THROW(poisson_oracle(OutcomeModel::logistic(0, 0), c), ValidationError);
    EXPECT_THROW(poisson_oracle(OutcomeModel::poisson(0, 0), ColliderModel::logistic(0, 0, 0, 0)),
                 ValidationError);
}

TEST(GaussOracle, NoSelectionOnOutcome) {
    const auto o = OutcomeModel::linear(0.3, 0.2, 0.5);
    const auto c = ColliderModel::log_additive(-1.0, 0.4, 0.0, 0.0);
    for (double x : {-1.0, 0.0, 2.0}) {
        EXPECT_NEAR(gauss_oracle(o, c, x).mean, 0.3 + 0.2 * x, 1e-14);
    }
}

TEST(GaussOracle, MatchesCompletedSquare) {
    const auto o = OutcomeModel::linear(0.0, 0.2, 0.5);
    const auto c = ColliderModel::log_additive(-1.0, 0.3, 0.3, 0.3);
    for (double x : {-1.0, 0.0, 1.0, 2.0}) {
        const double c1 = 0.2 * x + 0.25 * 0.3 + 0.25 * 0.3 * x;
        EXPECT_NEAR(gauss_oracle(o, c, x).mean, c1, 1e-10);
    }
    const double slope = gauss_oracle(o, c, 1.0).mean - gauss_oracle(o, c, 0.0).mean;
    EXPECT_NEAR(slope, 0.275, 1e-10);
}

TEST(GaussOracle, VarianceUnchangedByTilt) {
    const auto o = OutcomeModel::linear(1.0, -0.5, 1.3);
    const auto c = ColliderModel::log_additive(-2.0, 0.1, 0.8, -0.4);
    for (double x : {0.0, 1.5}) {
        EXPECT_NEAR(gauss_oracle(o, c, x).variance(), 1.69, 1e-9);
    }
}

TEST(GaussOracle, AffineInX) {
    const auto o = OutcomeModel::linear(-0.5, 0.7, 0.8);
    const auto c = ColliderModel::log_additive(-3.0, 0.2, -0.4, 0.35);
    std::vector<double> xs{-2, -1, 0, 1, 2};
    std::vector<double> m;
    for (double x : xs) m.push_back(gauss_oracle(o, c, x).mean);
    const double slope = (m[4] - m[0]) / 4.0;
    const double icept = m[2];
    for (std::size_t i = 0; i < xs.size(); ++i) {
        EXPECT_NEAR(m[i], icept + slope * xs[i], 1e-9);
    }
    EXPECT_NEAR(slope, 0.7 + 0.35 * 0.64, 1e-9);
    EXPECT_NEAR(icept, -0.5 - 0.4 * 0.64, 1e-9);
}

TEST(GaussOracle, SignFlipSymmetry) {
    const auto o = OutcomeModel::linear(0.0, 0.2, 0.5);
    const auto c = ColliderModel::log_additive(-1.0, 0.3, 0.3, 0.3);
    const auto o_neg = OutcomeModel::linear(0.0, -0.2, 0.5);
    const auto c_neg = ColliderModel::log_additive(-1.0, -0.3, 0.3, -0.3);
    for (double x : {0.5, 1.0, 2.0}) {
        // Y | X = x under (b1, d1, d3) equals Y | X = -x under the flipped signs.
        EXPECT_NEAR(gauss_oracle(o, c, x).mean, gauss_oracle(o_neg, c_neg, -x).mean, 1e-12);
    }
}
