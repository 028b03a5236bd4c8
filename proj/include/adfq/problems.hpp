#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "adfq/belief.hpp"
#include "adfq/rng.hpp"

namespace adfq {

/// Ranges for randomly drawn single-transition update problems.
struct ProblemRanges {
    std::size_t min_actions = 2;
    std::size_t max_actions = 10;
    double mean_lo = -10.0;
    double mean_hi = 10.0;
    double sd_lo = 0.1;  // standard deviations of the prior and every next-state belief
    double sd_hi = 10.0;
    std::vector<double> gammas{0.5, 0.9, 0.95};
    double r_lo = 0.0;
    double r_hi = 0.0;
    double sigma_w = 0.0;
};

/// Draws n, gamma, r, prior and next-state beliefs in that order.
inline UpdateProblem sample_problem(Rng& rng, const ProblemRanges& R) {
    if (R.min_actions == 0 || R.max_actions < R.min_actions) throw std::invalid_argument("sample_problem: bad action range");
    if (R.gammas.empty()) throw std::invalid_argument("sample_problem: no discount factors");
    UpdateProblem p;
    const std::size_t n = R.min_actions + rng.uniform_index(R.max_actions - R.min_actions + 1);
    p.gamma = R.gammas[rng.uniform_index(R.gammas.size())];
    p.r = rng.uniform(R.r_lo, R.r_hi);
    p.sigma_w = R.sigma_w;
    auto belief = [&] {
        const double sd = rng.uniform(R.sd_lo, R.sd_hi);
        return GaussianBelief{rng.uniform(R.mean_lo, R.mean_hi), sd * sd};
    };
    p.prior = belief();
    p.next.reserve(n);
    for (std::size_t b = 0; b < n; ++b) p.next.push_back(belief());
    return p;
}

/// Multiplies every variance, sigma_w^2 included, by `scale`. Means are untouched.
inline UpdateProblem scale_variances(UpdateProblem p, double scale) {
    p.prior.variance *= scale;
    for (auto& b : p.next) b.variance *= scale;
    p.sigma_w *= std::sqrt(scale);
    return p;
}

}  // namespace adfq
