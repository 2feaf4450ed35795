#include <cmath>

#include <gtest/gtest.h>

#include "collider_lab/math.hpp"

using namespace collider_lab::math;

TEST(LogSumExp, LargeAndSmallArguments) {
    EXPECT_DOUBLE_EQ(log_sum_exp(0.0, 0.0), std::log(2.0));
    EXPECT_DOUBLE_EQ(log_sum_exp(800.0, 800.0), 800.0 + std::log(2.0));
    EXPECT_DOUBLE_EQ(log_sum_exp(-800.0, 0.0), 0.0);
    EXPECT_EQ(log_sum_exp(-INFINITY, -INFINITY), -INFINITY);
    EXPECT_EQ(log_sum_exp(1.5, -0.25), log_sum_exp(-0.25, 1.5));
}

TEST(Log1pExp, AgreesWithDirectFormAndStaysFinite) {
    for (double x : {-30.0, -2.0, 0.0, 0.7, 20.0}) {
        EXPECT_NEAR(log1p_exp(x), std::log1p(std::exp(x)), 1e-15 * (1 + std::abs(x)));
    }
    EXPECT_DOUBLE_EQ(log1p_exp(700.0), 700.0);
    EXPECT_NEAR(log1p_exp(-700.0), std::exp(-700.0), 1e-310);
    EXPECT_EQ(log1p_exp(0.3), log_sum_exp(0.3, 0.0));
}

TEST(Expit, SymmetricAndBounded) {
    EXPECT_EQ(expit(0.0), 0.5);
    for (double x : {0.1, 1.0, 5.0, 40.0}) EXPECT_NEAR(expit(x) + expit(-x), 1.0, 5e-16);
    EXPECT_EQ(expit(-800.0), 0.0);
    EXPECT_EQ(expit(800.0), 1.0);
    EXPECT_NEAR(logit(expit(1.3)), 1.3, 1e-14);
}

TEST(Normal, CdfAndQuantile) {
    EXPECT_EQ(normal_cdf(0.0), 0.5);
    EXPECT_NEAR(normal_cdf(1.959963984540054), 0.975, 1e-15);
    EXPECT_NEAR(normal_cdf(-8.0), 6.22096057427174e-16, 1e-28);
    EXPECT_NEAR(normal_quantile(0.3), -0.5244005127080409, 1e-15);
    EXPECT_NEAR(normal_quantile(0.75), 0.6744897501960817, 1e-15);
    for (double p : {1e-10, 0.01, 0.5, 0.9, 0.999999}) {
        EXPECT_NEAR(normal_cdf(normal_quantile(p)), p, 1e-14 * std::max(p, 1e-3));
    }
    EXPECT_NEAR(normal_pdf(0.0), 0.3989422804014327, 1e-16);
}

TEST(Normal, LogCdfTail) {
    EXPECT_NEAR(log_normal_cdf(-1.0), std::log(normal_cdf(-1.0)), 1e-14);
    EXPECT_NEAR(log_normal_cdf(-29.9), std::log(normal_cdf(-29.9)), 1e-9);
    const double z = -40.0;
    EXPECT_TRUE(std::isfinite(log_normal_cdf(z)));
    EXPECT_NEAR(log_normal_cdf(z), -804.6084420137538, 1e-6);
}
