#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "adfq/belief.hpp"
#include "adfq/math.hpp"

namespace adfq {

/// A competing TD target N(m, v) entering a branch through its ReLU penalty.
struct TargetMoments {
    double m = 0.0;
    double v = 1.0;
};

/// Peak-matched Gaussian component for one next action b.
struct ActionBranch {
    ActionId b = 0;
    BranchComponents components;
    double mu_star = 0.0;
    double var_star = 1.0;
    double log_k_star = 0.0;
    double weight = 1.0;
};

struct UpdateResult {
    double new_mean = 0.0;
    double new_variance = 1.0;
    std::vector<ActionBranch> branches;
};

/// Location of the peak of
///
///   -(q - mu_bar)^2 / (2 var_bar) - sum_j [m_j - q]_+^2 / (2 v_j).
///
/// The stationarity condition is piecewise linear, so the peak is the
/// inverse-variance weighted mean of (mu_bar, var_bar) and every target with
/// m_j > q. Targets are scanned in descending order of m; the first prefix
/// whose weighted mean lands at or above the next target is the unique
/// self-consistent one, since adding a target above the running mean moves
/// the mean up but never past that target.
inline double solve_peak_mean(const BranchComponents& branch, std::span<const TargetMoments> others) {
    if (!(branch.var_bar > 0.0)) throw std::domain_error("solve_peak_mean: var_bar must be positive");
    std::vector<TargetMoments> sorted(others.begin(), others.end());
    std::sort(sorted.begin(), sorted.end(), [](const TargetMoments& x, const TargetMoments& y) { return x.m > y.m; });

    double precision = 1.0 / branch.var_bar;
    double weighted = branch.mu_bar / branch.var_bar;
    for (std::size_t k = 0;; ++k) {
        const double mu = weighted / precision;
        if (k == sorted.size() || mu >= sorted[k].m) return mu;
        if (!(sorted[k].v > 0.0)) throw std::domain_error("solve_peak_mean: target variance must be positive");
        precision += 1.0 / sorted[k].v;
        weighted += sorted[k].m / sorted[k].v;
    }
}

/// Curvature at the peak. Targets sitting exactly at mu_star are inactive (H(0) = 0).
inline double peak_variance(const BranchComponents& branch, std::span<const TargetMoments> others, double mu_star) {
    double precision = 1.0 / branch.var_bar;
    for (const auto& t : others)
        if (t.m > mu_star) precision += 1.0 / t.v;
    return 1.0 / precision;
}

/// log k* of one branch: log c + log(sigma*/sigma_bar) plus the exponent at the peak.
inline double log_peak_height(const BranchComponents& branch, std::span<const TargetMoments> others, double mu_star,
                              double var_star) {
    const double d = mu_star - branch.mu_bar;
    double out = branch.log_c + 0.5 * std::log(var_star / branch.var_bar) - d * d / (2.0 * branch.var_bar);
    for (const auto& t : others) {
        const double gap = std::max(0.0, t.m - mu_star);
        out -= gap * gap / (2.0 * t.v);
    }
    return out;
}

/// Normalized weights proportional to exp(x_i), shifted by the max.
inline std::vector<double> softmax_weights(std::span<const double> log_values) {
    if (log_values.empty()) throw std::domain_error("softmax_weights: empty input");
    const double mx = *std::max_element(log_values.begin(), log_values.end());
    std::vector<double> w(log_values.size());
    double total = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) total += w[i] = std::exp(log_values[i] - mx);
    for (double& x : w) x /= total;
    return w;
}

namespace detail {

inline UpdateResult single_branch_result(const BranchComponents& comp, double variance_floor) {
    ActionBranch br;
    br.components = comp;
    br.mu_star = comp.mu_bar;
    br.var_star = comp.var_bar;
    br.log_k_star = comp.log_c;
    br.weight = 1.0;
    UpdateResult out;
    out.new_mean = comp.mu_bar;
    out.new_variance = std::max(comp.var_bar, variance_floor);
    out.branches.push_back(br);
    return out;
}

}  // namespace detail

/// Moment-matched Gaussian for Q(s, a) after one transition.
///
/// Every next action contributes a Gaussian component located at the peak of
/// its term in the ReLU-approximated posterior. Competing targets in the
/// penalty use the CDF scale gamma^2 * sigma'^2; the branch's own target
/// carries the extra sigma_w^2 of the noisy likelihood.
inline UpdateResult adfq_update(const UpdateProblem& p, double variance_floor = kDefaultVarianceFloor) {
    if (p.single_target()) return detail::single_branch_result(terminal_components(p.prior, p.r, p.sigma_w), variance_floor);
    if (p.next.empty()) throw std::domain_error("adfq_update: next state has no actions");

    const std::size_t n = p.next.size();
    std::vector<TargetMoments> cdf_targets(n);
    for (std::size_t b = 0; b < n; ++b) {
        if (!(p.next[b].variance > 0.0)) throw std::domain_error("adfq_update: next-state variance must be positive");
        cdf_targets[b] = {p.r + p.gamma * p.next[b].mean, p.gamma * p.gamma * p.next[b].variance};
    }

    UpdateResult out;
    out.branches.resize(n);
    std::vector<TargetMoments> others;
    others.reserve(n);
    std::vector<double> log_k(n);
    for (std::size_t b = 0; b < n; ++b) {
        others.clear();
        for (std::size_t j = 0; j < n; ++j)
            if (j != b) others.push_back(cdf_targets[j]);
        ActionBranch& br = out.branches[b];
        br.b = b;
        br.components = td_components(p.prior, p.next[b], p.r, p.gamma, p.sigma_w);
        br.mu_star = solve_peak_mean(br.components, others);
        br.var_star = peak_variance(br.components, others, br.mu_star);
        br.log_k_star = log_peak_height(br.components, others, br.mu_star, br.var_star);
        log_k[b] = br.log_k_star;
    }

    const auto w = softmax_weights(log_k);
    double mean = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
        out.branches[b].weight = w[b];
        mean += w[b] * out.branches[b].mu_star;
    }
    // sum w (var* + mu*^2) - mean^2, with the dispersion term centred for accuracy
    double var = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
        const double d = out.branches[b].mu_star - mean;
        var += w[b] * (out.branches[b].var_star + d * d);
    }
    out.new_mean = mean;
    out.new_variance = std::max(var, variance_floor);
    return out;
}

inline UpdateResult adfq_update(const BeliefTable& table, const Transition& tau) {
    return adfq_update(make_problem(table, tau), table.variance_floor());
}

/// Writes an update result into (s, a).
inline void apply_update(BeliefTable& table, const Transition& tau, const UpdateResult& result) {
    table.set(tau.s, tau.a, {result.new_mean, result.new_variance});
}

struct QLearningLimit {
    double mean = 0.0;
    double alpha = 0.0;
};

/// Small-variance limit of the update: a Q-learning step toward the greedy
/// target with learning rate var / (var + gamma^2 var_b+ + sigma_w^2).
/// b+ is the lowest-index argmax of the next-state means.
inline QLearningLimit qlearning_limit_target(const UpdateProblem& p) {
    double target = p.r;
    double target_var = p.sigma_w * p.sigma_w;
    if (p.terminal) {
        if (target_var == 0.0) target_var = kTerminalVarianceClamp;
    } else {
        if (p.next.empty()) throw std::domain_error("qlearning_limit_target: next state has no actions");
        std::size_t best = 0;
        for (std::size_t b = 1; b < p.next.size(); ++b)
            if (p.next[b].mean > p.next[best].mean) best = b;
        target += p.gamma * p.next[best].mean;
        target_var += p.gamma * p.gamma * p.next[best].variance;
        if (target_var == 0.0) target_var = kTerminalVarianceClamp;
    }
    const double alpha = p.prior.variance / (p.prior.variance + target_var);
    return {(1.0 - alpha) * p.prior.mean + alpha * target, alpha};
}

inline QLearningLimit qlearning_limit_target(const BeliefTable& table, const Transition& tau) {
    return qlearning_limit_target(make_problem(table, tau));
}

}  // namespace adfq
