#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "adfq/oracles.hpp"
#include "adfq/problems.hpp"

using namespace adfq;

namespace {

UpdateProblem make(GaussianBelief prior, std::vector<GaussianBelief> next, double r, double gamma) {
    UpdateProblem p;
    p.prior = prior;
    p.next = std::move(next);
    p.r = r;
    p.gamma = gamma;
    return p;
}

// Moments of N(q; prior) * density of r + gamma max_b Q'_b at q, from mpmath.
struct Reference {
    UpdateProblem p;
    double z, mean, var;
};

std::vector<Reference> references() {
    return {
        {make({0.0, 1.0}, {{-2.0, 2.0}, {-2.0, 0.5}, {4.5, 0.5}}, 0.0, 0.9), 0.000981622094681136266, 2.88271623465650135,
         0.288128007681386578},
        {make({0.0, 1.0}, {{-2.0, 2.0}, {1.0, 0.5}}, 0.5, 0.9), 0.164905769900031945, 1.01406775976927139,
         0.281041429113054348},
        {make({0.3, 2.0}, {{1.0, 1.0}, {0.5, 0.3}}, 0.2, 0.95), 0.202037675153925956, 1.14669403068604722,
         0.348217857360320535},
    };
}

}  // namespace

TEST(PosteriorDensity, MatchesPriorTimesMaxDensity) {
    for (const auto& ref : references()) {
        std::vector<GaussianParams> targets;
        for (const auto& b : ref.p.next)
            targets.push_back({ref.p.r + ref.p.gamma * b.mean, ref.p.gamma * ref.p.gamma * b.variance});
        for (double q = -3.0; q <= 5.0; q += 0.25) {
            const double direct = normal_pdf(q, ref.p.prior.mean, std::sqrt(ref.p.prior.variance)) * max_gaussian_pdf(q, targets);
            EXPECT_NEAR(posterior_unnorm_pdf(q, ref.p) / direct, 1.0, 1e-12) << q;
        }
    }
}

TEST(QuadratureMoments, MatchesHighPrecisionReference) {
    for (const auto& ref : references()) {
        const auto m = quadrature_moments(ref.p);
        EXPECT_NEAR(m.z / ref.z, 1.0, 1e-8);
        EXPECT_NEAR(m.mean, ref.mean, 1e-8);
        EXPECT_NEAR(m.variance / ref.var, 1.0, 1e-7);
    }
}

TEST(ExactTwoAction, MatchesHighPrecisionReference) {
    for (const auto& ref : references()) {
        if (ref.p.next.size() != 2) continue;
        const auto m = exact_two_action_moments(ref.p);
        EXPECT_NEAR(m.z / ref.z, 1.0, 1e-12);
        EXPECT_NEAR(m.mean, ref.mean, 1e-12);
        EXPECT_NEAR(m.variance / ref.var, 1.0, 1e-11);
    }
}

TEST(ExactTwoAction, AgreesWithQuadratureOnRandomProblems) {
    Rng rng(21);
    ProblemRanges R;
    R.min_actions = R.max_actions = 2;
    R.r_lo = -1.0;
    R.r_hi = 1.0;
    for (int t = 0; t < 300; ++t) {
        UpdateProblem p = sample_problem(rng, R);
        if (t % 3 == 0) p.sigma_w = rng.uniform(0.1, 1.0);
        const auto e = exact_two_action_moments(p);
        const auto q = quadrature_moments(p, {.n = 4001});
        EXPECT_NEAR(e.mean, q.mean, 1e-6 * std::max(1.0, std::abs(q.mean))) << t;
        EXPECT_NEAR(e.variance / q.variance, 1.0, 1e-5) << t;
        EXPECT_NEAR(e.log_z, q.log_z, 1e-6) << t;
    }
}

TEST(ExactTwoAction, FarTailsStayFinite) {
    const auto p = make({-200.0, 0.01}, {{300.0, 0.01}, {-100.0, 1.0}}, 0.0, 0.9);
    const auto m = exact_two_action_moments(p);
    EXPECT_TRUE(std::isfinite(m.mean));
    EXPECT_GT(m.variance, 0.0);
    EXPECT_TRUE(std::isfinite(m.log_z));
    EXPECT_THROW(exact_two_action_moments(make({0, 1}, {{0, 1}}, 0, 0.9)), std::domain_error);
}

TEST(QuadratureMoments, TerminalIsConjugateGaussian) {
    UpdateProblem p;
    p.prior = {1.0, 4.0};
    p.r = 3.0;
    p.sigma_w = 2.0;
    p.terminal = true;
    const auto m = quadrature_moments(p);
    EXPECT_NEAR(m.mean, 2.0, 1e-9);
    EXPECT_NEAR(m.variance, 2.0, 1e-8);
    EXPECT_NEAR(m.z, normal_pdf(3.0, 1.0, std::sqrt(8.0)), 1e-10);
}

TEST(QuadratureMoments, GridChecks) {
    const auto p = make({0.0, 1.0}, {{1.0, 1.0}, {0.0, 1.0}}, 0.0, 0.9);
    EXPECT_THROW(quadrature_moments(p, {.n = 1000}), std::invalid_argument);
    EXPECT_THROW(quadrature_moments(p, {.lo = 1.0, .hi = 1.0}), std::invalid_argument);
    const auto [lo, hi] = auto_support(p);
    EXPECT_LT(lo, -5.0);
    EXPECT_GT(hi, 5.0);
    // the log-space integrand keeps working on a grid far out in the tail
    const auto far = quadrature_moments(p, {.lo = 1e3, .hi = 1e3 + 1});
    EXPECT_TRUE(std::isfinite(far.log_z));
    EXPECT_LT(far.log_z, -1e5);
}

TEST(QuadratureMoments, AccurateAtSmallestGrid) {
    for (const auto& ref : references()) {
        const auto m = quadrature_moments(ref.p, {.n = 1001});
        EXPECT_NEAR(m.mean, ref.mean, 1e-8);
        EXPECT_NEAR(m.variance / ref.var, 1.0, 1e-7);
    }
}
