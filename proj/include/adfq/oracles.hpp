#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "adfq/belief.hpp"
#include "adfq/math.hpp"

// Reference computations for the belief update: the unnormalized exact
// posterior over Q(s, a), its moments by trapezoid quadrature, and the
// closed-form moments for two next actions. Nothing in the learning path
// depends on this header except the quadrature-backed agent.

namespace adfq {

/// Unnormalized exact posterior over Q(s, a) with the branch constants cached.
///
/// Branch b contributes (c_b / sigma_bar_b) phi((q - mu_bar_b) / sigma_bar_b)
/// times Phi((q - m_b') / (gamma sigma_b')) for every other b'. The Gaussian
/// part uses the noisy target variance, the CDFs the noiseless one.
class PosteriorDensity {
public:
    explicit PosteriorDensity(const UpdateProblem& p) {
        if (p.single_target()) {
            add_branch(terminal_components(p.prior, p.r, p.sigma_w));
            return;
        }
        const std::size_t n = p.next.size();
        if (n == 0) throw std::domain_error("posterior_unnorm_pdf: next state has no actions");
        for (std::size_t b = 0; b < n; ++b) {
            add_branch(td_components(p.prior, p.next[b], p.r, p.gamma, p.sigma_w));
            if (n > 1) {
                const double scale = p.gamma * std::sqrt(p.next[b].variance);
                if (!(scale > 0.0)) throw std::domain_error("posterior_unnorm_pdf: zero CDF scale");
                cdf_mean_.push_back(p.r + p.gamma * p.next[b].mean);
                cdf_scale_.push_back(scale);
            }
        }
    }

    double log_pdf(double q) const {
        const std::size_t n = mu_bar_.size();
        double log_cdf_sum = 0.0;
        bool any_neg_inf = false;
        for (std::size_t j = 0; j < cdf_mean_.size(); ++j) {
            log_cdf_[j] = log_normal_cdf((q - cdf_mean_[j]) / cdf_scale_[j]);
            log_cdf_sum += log_cdf_[j];
            any_neg_inf |= !std::isfinite(log_cdf_[j]);
        }
        for (std::size_t b = 0; b < n; ++b) {
            double t = log_scale_[b] + log_std_normal_pdf((q - mu_bar_[b]) / sd_bar_[b]);
            if (!cdf_mean_.empty()) {
                if (any_neg_inf) {
                    for (std::size_t j = 0; j < n; ++j)
                        if (j != b) t += log_cdf_[j];
                } else {
                    t += log_cdf_sum - log_cdf_[b];
                }
            }
            terms_[b] = t;
        }
        return log_sum_exp(terms_);
    }

    const std::vector<double>& branch_means() const { return mu_bar_; }
    const std::vector<double>& branch_stddevs() const { return sd_bar_; }

private:
    void add_branch(const BranchComponents& c) {
        const double sd = std::sqrt(c.var_bar);
        mu_bar_.push_back(c.mu_bar);
        sd_bar_.push_back(sd);
        log_scale_.push_back(c.log_c - std::log(sd));
        terms_.push_back(0.0);
        log_cdf_.push_back(0.0);
    }

    std::vector<double> mu_bar_, sd_bar_, log_scale_;
    std::vector<double> cdf_mean_, cdf_scale_;
    mutable std::vector<double> terms_, log_cdf_;
};

/// log of the unnormalized posterior density at q.
inline double log_posterior_unnorm_pdf(double q, const UpdateProblem& p) { return PosteriorDensity(p).log_pdf(q); }

inline double posterior_unnorm_pdf(double q, const UpdateProblem& p) { return std::exp(log_posterior_unnorm_pdf(q, p)); }

inline double posterior_unnorm_pdf(double q, const BeliefTable& table, const Transition& tau) {
    return posterior_unnorm_pdf(q, make_problem(table, tau));
}

/// Integration grid; NaN bounds are replaced by the automatic support.
struct QuadratureGrid {
    double lo = std::numeric_limits<double>::quiet_NaN();
    double hi = std::numeric_limits<double>::quiet_NaN();
    std::size_t n = 2001;
};

struct PosteriorMoments {
    double log_z = 0.0;
    double z = 0.0;
    double mean = 0.0;
    double variance = 0.0;
};

/// Interval holding every branch's Gaussian factor to +-10 standard deviations.
/// The CDF products are bounded by one, so the posterior mass lies inside it.
inline std::pair<double, double> auto_support(const UpdateProblem& p) {
    const PosteriorDensity density(p);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t b = 0; b < density.branch_means().size(); ++b) {
        lo = std::min(lo, density.branch_means()[b] - 10.0 * density.branch_stddevs()[b]);
        hi = std::max(hi, density.branch_means()[b] + 10.0 * density.branch_stddevs()[b]);
    }
    return {lo, hi};
}

/// Zeroth, first and central second moments of the posterior by the trapezoid rule.
///
/// The integrand is evaluated in log space and shifted by its maximum before
/// exponentiation, so Z itself is carried as log_z and never underflows
/// during integration.
inline PosteriorMoments quadrature_moments(const UpdateProblem& p, QuadratureGrid grid = {}) {
    if (grid.n < 1001) throw std::invalid_argument("quadrature_moments: grid needs at least 1001 points");
    if (std::isnan(grid.lo) || std::isnan(grid.hi)) {
        const auto [lo, hi] = auto_support(p);
        if (std::isnan(grid.lo)) grid.lo = lo;
        if (std::isnan(grid.hi)) grid.hi = hi;
    }
    if (!(grid.hi > grid.lo)) throw std::invalid_argument("quadrature_moments: empty interval");

    const std::size_t n = grid.n;
    const double h = (grid.hi - grid.lo) / static_cast<double>(n - 1);
    const PosteriorDensity density(p);
    std::vector<double> q(n), logf(n);
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        q[i] = grid.lo + h * static_cast<double>(i);
        logf[i] = density.log_pdf(q[i]);
        peak = std::max(peak, logf[i]);
    }
    if (!std::isfinite(peak)) throw std::underflow_error("quadrature_moments: posterior vanishes on the grid");

    std::vector<double> f(n);
    double m0 = 0.0, m1 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double wt = (i == 0 || i + 1 == n) ? 0.5 : 1.0;
        f[i] = wt * std::exp(logf[i] - peak);
        m0 += f[i];
        m1 += f[i] * q[i];
    }
    const double mean = m1 / m0;
    double m2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) m2 += f[i] * (q[i] - mean) * (q[i] - mean);

    PosteriorMoments out;
    out.log_z = peak + std::log(m0 * h);
    out.z = std::exp(out.log_z);
    out.mean = mean;
    out.variance = m2 / m0;
    if (!(out.variance > 0.0)) throw std::underflow_error("quadrature_moments: grid does not resolve the posterior");
    return out;
}

inline PosteriorMoments quadrature_moments(const BeliefTable& table, const Transition& tau, QuadratureGrid grid = {}) {
    return quadrature_moments(make_problem(table, tau), grid);
}

/// Closed-form posterior mean and variance for exactly two next actions.
///
/// With S_b^2 = sigma_bar_b^2 + gamma^2 sigma_o^2 (o the other action) and
/// u_b = (mu_bar_b - m_o) / S_b:
///
///   Z     = c_1 Phi_1 + c_2 Phi_2
///   E[q]  = sum_b c_b (mu_bar_b Phi_b + sigma_bar_b^2 phi_b) / Z
///   E[q2] = sum_b c_b ((mu_bar_b^2 + sigma_bar_b^2) Phi_b + 2 mu_bar_b sigma_bar_b^2 phi_b
///                      - sigma_bar_b^4 / S_b^2 (mu_bar_b - m_o) phi_b) / Z
///
/// where Phi_b = Phi(u_b) and phi_b = phi(u_b) / S_b. Every term is divided
/// through by Phi_b so the branch weights c_b Phi_b / Z come from a
/// log-domain softmax and the ratio phi_b / Phi_b stays finite in the tails.
inline PosteriorMoments exact_two_action_moments(const UpdateProblem& p) {
    if (p.single_target() || p.next.size() != 2)
        throw std::domain_error("exact_two_action_moments: requires exactly two next actions");
    double log_w[2], e1[2], e2[2];
    for (int b = 0; b < 2; ++b) {
        const int o = 1 - b;
        const auto c = td_components(p.prior, p.next[b], p.r, p.gamma, p.sigma_w);
        const double m_o = p.r + p.gamma * p.next[o].mean;
        const double s2 = c.var_bar + p.gamma * p.gamma * p.next[o].variance;
        const double s = std::sqrt(s2);
        const double u = (c.mu_bar - m_o) / s;
        const double log_cdf = log_normal_cdf(u);
        const double ratio = std::exp(log_std_normal_pdf(u) - log_cdf) / s;  // phi_b / Phi_b
        log_w[b] = c.log_c + log_cdf;
        e1[b] = c.mu_bar + c.var_bar * ratio;
        e2[b] = (c.mu_bar * c.mu_bar + c.var_bar) + 2.0 * c.mu_bar * c.var_bar * ratio -
                c.var_bar * c.var_bar / s2 * (c.mu_bar - m_o) * ratio;
    }
    const double lse = log_sum_exp(log_w);
    const double w0 = std::exp(log_w[0] - lse), w1 = std::exp(log_w[1] - lse);
    PosteriorMoments out;
    out.log_z = lse;
    out.z = std::exp(lse);
    out.mean = w0 * e1[0] + w1 * e1[1];
    out.variance = w0 * e2[0] + w1 * e2[1] - out.mean * out.mean;
    return out;
}

inline PosteriorMoments exact_two_action_moments(const BeliefTable& table, const Transition& tau) {
    return exact_two_action_moments(make_problem(table, tau));
}

}  // namespace adfq
