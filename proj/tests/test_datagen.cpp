#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "collider_lab/datagen.hpp"

using namespace collider_lab;

namespace {

double mean(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd(const std::vector<double>& v) {
    const double m = mean(v);
    double ss = 0;
    for (double a : v) ss += (a - m) * (a - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

constexpr std::size_t kMillion = 1'000'000;

}  // namespace

TEST(GenExposure, BernoulliMean) {
    const auto x = gen_exposure(ExposureSpec::bernoulli(0.3), kMillion, {1, "x"});
    EXPECT_EQ(x.size(), kMillion);
    for (double v : x) ASSERT_TRUE(v == 0.0 || v == 1.0);
    EXPECT_NEAR(mean(x), 0.3, 0.0015);
}

TEST(GenExposure, SingleDrawRepeatable) {
    const auto a = gen_exposure(ExposureSpec::bernoulli(0.5), 1, {77, "single"});
    const auto b = gen_exposure(ExposureSpec::bernoulli(0.5), 1, {77, "single"});
    ASSERT_EQ(a.size(), 1u);
    EXPECT_EQ(a, b);
}

TEST(GenExposure, NormalMoments) {
    const auto x = gen_exposure(ExposureSpec::normal(0, 1), kMillion, {2, "x"});
    EXPECT_NEAR(mean(x), 0.0, 0.003);
    EXPECT_NEAR(sd(x), 1.0, 0.003);
}

TEST(GenExposure, RejectsBadInput) {
    EXPECT_THROW(gen_exposure(ExposureSpec::bernoulli(1.0), 10, {}), ValidationError);
    EXPECT_THROW(gen_exposure(ExposureSpec::bernoulli(0.5), 0, {}), ValidationError);
}

TEST(GenOutcome, LogisticAtZero) {
    const std::vector<double> x(kMillion, 0.0);
    const auto y = gen_outcome(OutcomeModel::logistic(0, 0.2), x, {3, "y"});
    for (double v : y) ASSERT_TRUE(v == 0.0 || v == 1.0);
    EXPECT_NEAR(mean(y), 0.5, 0.0015);
}

TEST(GenOutcome, LinearAtOne) {
    const std::vector<double> x(kMillion, 1.0);
    const auto y = gen_outcome(OutcomeModel::linear(0, 0.2, 0.5), x, {4, "y"});
    EXPECT_NEAR(mean(y), 0.2, 0.0015);
    EXPECT_NEAR(sd(y), 0.5, 0.0011);
}

TEST(GenOutcome, PoissonAtOne) {
    const std::vector<double> x(kMillion, 1.0);
    const auto y = gen_outcome(OutcomeModel::poisson(0, 0.2), x, {5, "y"});
    for (double v : y) ASSERT_TRUE(v >= 0.0 && v == std::floor(v));
    EXPECT_NEAR(mean(y), std::exp(0.2), 0.0033);
}

TEST(GenOutcome, PoissonLargeRate) {
    const std::vector<double> x(kMillion, 0.0);
    const double lambda = std::exp(4.0);
    const auto y = gen_outcome(OutcomeModel::poisson(4.0, 0.0), x, {6, "y"});
    EXPECT_NEAR(mean(y), lambda, 4 * std::sqrt(lambda / kMillion));
    EXPECT_NEAR(sd(y) * sd(y) / lambda, 1.0, 0.01);
}

TEST(GenOutcome, PoissonOverflow) {
    const std::vector<double> x{0.0, 1.0};
    EXPECT_THROW(gen_outcome(OutcomeModel::poisson(0.0, 800.0), x, {}), NumericalError);
}

TEST(GenOutcome, MultipleExposures) {
    const auto a = gen_exposure(ExposureSpec::normal(0, 1), 1000, {1, "a"});
    const auto b = gen_exposure(ExposureSpec::normal(0, 1), 1000, {1, "b"});
    const OutcomeModel m{OutcomeKind::Linear, 0.0, {1.0, -1.0}, 1e-6};
    const auto y = gen_outcome(m, std::vector<std::span<const double>>{a, b}, {1, "y"});
    for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], a[i] - b[i], 1e-4);
    EXPECT_THROW(gen_outcome(m, a, {}), ValidationError);
}

TEST(GenCollider, LogisticAtOrigin) {
    const std::vector<double> z(kMillion, 0.0);
    const auto s = gen_collider(ColliderModel::logistic(0, 0.3, 0.3, 0), z, z, {7, "s"});
    for (double v : s) ASSERT_TRUE(v == 0.0 || v == 1.0);
    EXPECT_NEAR(mean(s), 0.5, 0.0015);
}

TEST(GenCollider, DoubleThresholdQuartiles) {
    const std::vector<double> z(kMillion, 0.0);
    const double q = 1.6 * math::normal_quantile(0.75);
    const auto s =
        gen_collider(ColliderModel::double_threshold(0, 0, 0, 0, 1.6, -q, q), z, z, {8, "s"});
    EXPECT_NEAR(mean(s), 0.5, 0.0015);
}

TEST(GenCollider, LogAdditiveAboveOneNamesRow) {
    const std::vector<double> x{0.0, 1.0}, y{1.0, 0.0};
    try {
        gen_collider(ColliderModel::log_additive(0.1, 0, 0, 0), x, y, {});
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("row 0"), std::string::npos) << e.what();
    }
}

TEST(GenCollider, LogAdditiveBoundaryAlwaysSelects) {
    const std::vector<double> x{0.0, 1.0, 0.0}, y{0.0, 0.0, 1.0};
    const auto s = gen_collider(ColliderModel::log_additive(0, 0, 0, 0), x, y, {});
    EXPECT_EQ(s, (std::vector<double>{1, 1, 1}));
}

TEST(Simulate, DeterministicAndThreadInvariant) {
    const auto sc = validate_scenario(ExposureSpec::bernoulli(0.3), OutcomeModel::poisson(0, 0.2),
                                      ColliderModel::probit(-0.5, 0.3, 0.3, 0.2, 1.6));
    const auto a = simulate(sc, 100'000, {11, "sim"}, 1);
    const auto b = simulate(sc, 100'000, {11, "sim"}, 4);
    const auto c = simulate(sc, 100'000, {11, "sim"}, 1);
    for (const auto& name : {"x", "y", "s"}) {
        const auto ca = a.column(name), cb = b.column(name), cc = c.column(name);
        ASSERT_TRUE(std::equal(ca.begin(), ca.end(), cb.begin()));
        ASSERT_TRUE(std::equal(ca.begin(), ca.end(), cc.begin()));
    }
    const auto d = simulate(sc, 100'000, {12, "sim"}, 1);
    const auto ya = a.column("y"), yd = d.column("y");
    EXPECT_FALSE(std::equal(ya.begin(), ya.end(), yd.begin()));
}

TEST(Simulate, ExposureAndNoiseStreamsIndependent) {
    // Null outcome model: y is pure noise drawn from its own stream.
    const auto sc = validate_scenario(ExposureSpec::normal(0, 1), OutcomeModel::linear(0, 0, 1),
                                      ColliderModel::logistic(0, 0, 0, 0));
    const auto d = simulate(sc, kMillion, {13, "indep"});
    const auto x = d.column("x"), y = d.column("y");
    double sxy = 0, sx = 0, sy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < d.rows(); ++i) {
        sxy += x[i] * y[i];
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        syy += y[i] * y[i];
    }
    const double n = static_cast<double>(d.rows());
    const double r = (sxy / n - sx / n * sy / n) /
                     std::sqrt((sxx / n - sx * sx / n / n) * (syy / n - sy * sy / n / n));
    EXPECT_LT(std::abs(r), 4 / std::sqrt(n));
}

TEST(Calibrate, LogisticNullHalf) {
    const auto m = calibrate_selection(ColliderModel::logistic(5, 0, 0, 0),
                                       ExposureSpec::bernoulli(0.3), OutcomeModel::logistic(0, 0.2),
                                       0.5);
    EXPECT_NEAR(m.delta0, 0.0, 1e-8);
}

TEST(Calibrate, ProbitNullMatchesInverse) {
    const auto m = calibrate_selection(ColliderModel::probit(0, 0, 0, 0, 1.6),
                                       ExposureSpec::bernoulli(0.3), OutcomeModel::logistic(0, 0.2),
                                       0.3);
    EXPECT_NEAR(m.delta0, 1.6 * math::normal_quantile(0.3), 1e-8);
    EXPECT_NEAR(m.delta0, -0.839, 0.001);
}

TEST(Calibrate, DoubleThresholdQuartiles) {
    const auto m = calibrate_selection(ColliderModel::double_threshold(0, 0, 0, 0, 1.6, -1, 1),
                                       ExposureSpec::bernoulli(0.3), OutcomeModel::logistic(0, 0.2),
                                       0.5);
    const double q = 1.6 * math::normal_quantile(0.75);
    EXPECT_EQ(m.delta0, 0.0);
    EXPECT_NEAR(m.r_lower, -q, 0.01);
    EXPECT_NEAR(m.r_upper, q, 0.01);
}

TEST(Calibrate, FreshSampleHitsTarget) {
    const auto exposure = ExposureSpec::bernoulli(0.3);
    for (auto kind : {ColliderKind::Logistic, ColliderKind::Probit, ColliderKind::DoubleThreshold,
                      ColliderKind::LogAdditive}) {
        for (auto outcome : {OutcomeModel::logistic(0, 0.2), OutcomeModel::linear(0, 0.2, 0.5),
                             OutcomeModel::poisson(0, 0.2)}) {
            for (double target : {0.1, 0.5, 0.9}) {
                ColliderModel base{kind, 0.0, 0.3, 0.3, -0.2};
                if (kind == ColliderKind::LogAdditive) {
                    if (outcome.kind != OutcomeKind::Logistic) continue;
                    base.delta2 = -0.3;
                    if (target > 0.5) continue;
                }
                const auto m = calibrate_selection(base, exposure, outcome, target);
                const auto sc = validate_scenario(exposure, outcome, m);
                const auto d = simulate(sc, kMillion, {99, "fresh"});
                const auto s = d.column("s");
                const double frac =
                    std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
                EXPECT_NEAR(frac, target, 0.004)
                    << static_cast<int>(kind) << " " << static_cast<int>(outcome.kind);
            }
        }
    }
}

TEST(Calibrate, Errors) {
    const auto e = ExposureSpec::bernoulli(0.3);
    const auto o = OutcomeModel::logistic(0, 0.2);
    EXPECT_THROW(calibrate_selection(ColliderModel::logistic(0, 0, 0, 0), e, o, 0.005),
                 ValidationError);
    EXPECT_THROW(calibrate_selection(ColliderModel::logistic(0, 0, 0, 0), e, o, 0.995),
                 ValidationError);
    CalibrationOptions narrow;
    narrow.delta0_hi = 1.0;
    EXPECT_THROW(calibrate_selection(ColliderModel::logistic(0, 0, 0, 0), e, o, 0.9, narrow),
                 NumericalError);
}
