#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "adfq/math.hpp"
#include "adfq/rng.hpp"

using namespace adfq;

// Reference values below were evaluated once with mpmath at 30 digits.

TEST(NormalCdf, MatchesHighPrecisionValues) {
    EXPECT_NEAR(normal_cdf(1.0), 0.841344746068542948585, 1e-15);
    EXPECT_NEAR(normal_cdf(-3.0) / 0.00134989803163009452665, 1.0, 1e-13);
    EXPECT_DOUBLE_EQ(normal_cdf(0.0), 0.5);
}

TEST(LogNormalCdf, LowerTailStaysFiniteAndAccurate) {
    EXPECT_NEAR(log_normal_cdf(-10.0), -53.2312851505124705783, 1e-11);
    EXPECT_NEAR(log_normal_cdf(-37.0), -689.030585576890593601, 1e-9);
    EXPECT_NEAR(log_normal_cdf(-40.0), -804.608442013753788167, 1e-9);
    EXPECT_NEAR(log_normal_cdf(-100.0), -5005.52420869420508863, 1e-8);
    EXPECT_NEAR(log_normal_cdf(8.0), -6.22096057427178580937e-16, 1e-25);
}

TEST(LogNormalCdf, ContinuousAcrossBranchSwitch) {
    for (double x : {-35.0, 5.0}) {
        const double lo = log_normal_cdf(std::nextafter(x, -1e9));
        const double hi = log_normal_cdf(std::nextafter(x, 1e9));
        EXPECT_NEAR(lo, hi, 1e-12 * (1.0 + std::abs(lo)));
    }
}

TEST(LogNormalCdf, Monotone) {
    double prev = log_normal_cdf(-200.0);
    for (double x = -199.5; x < 20.0; x += 0.5) {
        const double cur = log_normal_cdf(x);
        EXPECT_GE(cur, prev) << x;
        prev = cur;
    }
}

TEST(ReluCdfApprox, ExactInTailsAndBoundedByOne) {
    EXPECT_DOUBLE_EQ(relu_cdf_approx(3.0), 1.0);
    EXPECT_DOUBLE_EQ(relu_cdf_approx(0.0), 1.0);
    EXPECT_NEAR(relu_cdf_approx(-2.0), std::exp(-2.0), 1e-15);
    // log of the surrogate and of Phi agree to leading order far in the lower tail
    const double y = -30.0;
    EXPECT_NEAR(std::log(relu_cdf_approx(y)) / log_normal_cdf(y), 1.0, 0.01);
}

TEST(LogSumExp, HandlesLargeAndEmpty) {
    const std::vector<double> xs{1000.0, 1000.0};
    EXPECT_NEAR(log_sum_exp(xs), 1000.0 + std::log(2.0), 1e-12);
    const std::vector<double> tiny{-1000.0, -1001.0};
    EXPECT_NEAR(log_sum_exp(tiny), -1000.0 + std::log1p(std::exp(-1.0)), 1e-12);
    EXPECT_THROW(log_sum_exp(std::vector<double>{}), std::domain_error);
    const double ninf = -std::numeric_limits<double>::infinity();
    EXPECT_EQ(log_sum_exp(std::vector<double>{ninf, ninf}), ninf);
}

TEST(MaxGaussianPdf, MatchesHighPrecisionValues) {
    const std::vector<GaussianParams> two{{0.0, 1.0}, {1.0, 4.0}};
    EXPECT_NEAR(max_gaussian_pdf(0.5, two), 0.274964832447230679710, 1e-14);
    const std::vector<GaussianParams> three{{0.0, 1.0}, {1.0, 4.0}, {-2.0, 0.25}};
    EXPECT_NEAR(max_gaussian_pdf(0.3, three), 0.254445026654309686793, 1e-14);
}

TEST(MaxGaussianPdf, SingleComponentIsNormalPdf) {
    const std::vector<GaussianParams> one{{1.5, 2.0}};
    EXPECT_NEAR(max_gaussian_pdf(0.7, one), normal_pdf(0.7, 1.5, std::sqrt(2.0)), 1e-15);
}

TEST(MaxGaussianPdf, IntegratesToOneOnRandomInputs) {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<GaussianParams> ps;
        const std::size_t n = 2 + rng.uniform_index(6);
        for (std::size_t i = 0; i < n; ++i) ps.push_back({rng.uniform(-3, 3), std::pow(rng.uniform(0.2, 2.0), 2)});
        double total = 0.0;
        const double h = 1e-3;
        for (double x = -20.0; x <= 20.0; x += h) total += max_gaussian_pdf(x, ps) * h;
        EXPECT_NEAR(total, 1.0, 1e-6) << trial;
    }
}

TEST(MaxGaussianPdf, LogFormSurvivesManyFarComponents) {
    std::vector<GaussianParams> ps(200, GaussianParams{40.0, 1.0});
    ps.push_back({0.0, 1.0});
    const double lp = log_max_gaussian_pdf(0.0, ps);
    EXPECT_TRUE(std::isfinite(lp));
    EXPECT_LT(lp, -1e5);
    EXPECT_THROW(log_max_gaussian_pdf(0.0, std::vector<GaussianParams>{{0.0, 0.0}}), std::domain_error);
}
