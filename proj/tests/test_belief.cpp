#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "adfq/belief.hpp"

using namespace adfq;

TEST(BeliefTable, RejectsBadShapeAndParameters) {
    EXPECT_THROW(BeliefTable(0, 2, 0.9, 0.0), std::invalid_argument);
    EXPECT_THROW(BeliefTable(2, 2, 1.0, 0.0), std::invalid_argument);
    EXPECT_THROW(BeliefTable(2, 2, 0.9, -1.0), std::invalid_argument);
    EXPECT_THROW(BeliefTable(2, 2, 0.9, 0.0, 0.0), std::invalid_argument);
    BeliefTable t(2, 2, 0.9, 0.0);
    EXPECT_THROW(t.at(2, 0), std::out_of_range);
}

TEST(BeliefTable, SetClampsVarianceAtFloor) {
    BeliefTable t(1, 1, 0.9, 0.0, 1e-6);
    t.set(0, 0, {1.0, 1e-9});
    EXPECT_DOUBLE_EQ(t.at(0, 0).variance, 1e-6);
    t.set(0, 0, {1.0, -3.0});
    EXPECT_DOUBLE_EQ(t.at(0, 0).variance, 1e-6);
    EXPECT_THROW(t.set(0, 0, {NAN, 1.0}), std::domain_error);
}

TEST(InitializeBeliefs, DrawsMeansInRangeWithFixedVariance) {
    BeliefTable t(10, 3, 0.9, 0.0);
    Rng rng(4);
    initialize_beliefs(t, {}, rng);
    for (const auto& b : t.entries()) {
        EXPECT_GE(b.mean, 0.0);
        EXPECT_LT(b.mean, 1.0);
        EXPECT_EQ(b.variance, 100.0);
    }
    BeliefTable u(10, 3, 0.9, 0.0);
    Rng rng2(4);
    initialize_beliefs(u, {}, rng2);
    EXPECT_TRUE(t == u);
}

TEST(TdComponents, FigureOneBranches) {
    const GaussianBelief prior{0.0, 1.0};
    const auto c1 = td_components(prior, {-2.0, 2.0}, 0.0, 0.9, 0.0);
    EXPECT_NEAR(c1.m, -1.8, 1e-15);
    EXPECT_NEAR(c1.v, 1.62, 1e-15);
    EXPECT_NEAR(c1.var_bar, 1.62 / 2.62, 1e-15);
    EXPECT_NEAR(c1.mu_bar, -1.8 / 2.62, 1e-15);
    EXPECT_NEAR(c1.c, std::exp(-1.8 * 1.8 / (2 * 2.62)) / std::sqrt(2 * M_PI * 2.62), 1e-15);
    const auto c3 = td_components(prior, {4.5, 0.5}, 0.0, 0.9, 0.0);
    EXPECT_NEAR(c3.m, 4.05, 1e-15);
    EXPECT_NEAR(c3.v, 0.405, 1e-15);
    EXPECT_NEAR(c3.mu_bar, 4.05 / 1.405, 1e-14);
    EXPECT_NEAR(c3.log_c, std::log(c3.c), 1e-12);
}

TEST(TdComponents, NoiseAddsToTargetVariance) {
    const auto c = td_components({0.0, 1.0}, {1.0, 1.0}, 0.5, 0.9, 0.3);
    EXPECT_NEAR(c.v, 0.81 + 0.09, 1e-15);
    EXPECT_NEAR(c.m, 1.4, 1e-15);
}

TEST(TdComponents, VarBarIsBelowBothInputs) {
    Rng rng(9);
    for (int i = 0; i < 500; ++i) {
        const GaussianBelief prior{rng.uniform(-5, 5), rng.uniform(0.01, 10)};
        const GaussianBelief next{rng.uniform(-5, 5), rng.uniform(0.01, 10)};
        const auto c = td_components(prior, next, rng.uniform(-1, 1), 0.9, 0.0);
        EXPECT_LE(c.var_bar, prior.variance);
        EXPECT_LE(c.var_bar, c.v);
        EXPECT_GE(c.mu_bar, std::min(prior.mean, c.m) - 1e-12);
        EXPECT_LE(c.mu_bar, std::max(prior.mean, c.m) + 1e-12);
    }
}

TEST(TerminalComponents, ClampsZeroNoise) {
    const auto c = terminal_components({0.0, 1.0}, 2.0, 0.0);
    EXPECT_EQ(c.v, kTerminalVarianceClamp);
    EXPECT_NEAR(c.mu_bar, 2.0, 1e-10);
    EXPECT_THROW(td_components({0.0, 0.0}, {0.0, 1.0}, 0, 0.9, 0), std::domain_error);
}

TEST(MakeProblem, ReadsRowOfNextState) {
    BeliefTable t(3, 2, 0.95, 0.1);
    t.set(0, 1, {0.5, 2.0});
    t.set(2, 0, {1.0, 3.0});
    t.set(2, 1, {-1.0, 4.0});
    const auto p = make_problem(t, {0, 1, 1.0, 2, false});
    EXPECT_EQ(p.prior.mean, 0.5);
    ASSERT_EQ(p.next.size(), 2u);
    EXPECT_EQ(p.next[1].variance, 4.0);
    EXPECT_EQ(p.gamma, 0.95);
    EXPECT_EQ(p.sigma_w, 0.1);
    const auto q = make_problem(t, {0, 1, 1.0, 2, true});
    EXPECT_TRUE(q.next.empty());
    EXPECT_TRUE(q.single_target());
    EXPECT_THROW(make_problem(t, {0, 1, 1.0, 3, false}), std::out_of_range);
}

TEST(BeliefCsv, RoundTripsExactly) {
    BeliefTable t(4, 3, 0.9, 0.0);
    Rng rng(1);
    initialize_beliefs(t, {-2.0, 2.0, 0.1234567890123}, rng);
    t.set(3, 2, {1.0 / 3.0, 1e-7});
    std::stringstream ss;
    write_beliefs_csv(ss, t);
    BeliefTable u(4, 3, 0.9, 0.0);
    read_beliefs_csv(ss, u);
    EXPECT_TRUE(t == u);
    std::stringstream bad("nope\n");
    EXPECT_THROW(read_beliefs_csv(bad, u), std::runtime_error);
}
