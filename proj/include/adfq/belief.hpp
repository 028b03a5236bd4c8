#pragma once

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "adfq/math.hpp"
#include "adfq/rng.hpp"

namespace adfq {

using StateId = std::size_t;
using ActionId = std::size_t;

inline constexpr double kDefaultVarianceFloor = 1e-10;
inline constexpr double kDefaultInitialVariance = 100.0;
/// Target variance used for a terminal transition in a noiseless model.
inline constexpr double kTerminalVarianceClamp = 1e-12;

/// Gaussian belief over one Q(s, a).
struct GaussianBelief {
    double mean = 0.0;
    double variance = kDefaultInitialVariance;
};

/// One observed step <s, a, r, s'>.
struct Transition {
    StateId s = 0;
    ActionId a = 0;
    double r = 0.0;
    StateId s_next = 0;
    bool terminal = false;
};

/// All Q-beliefs of a finite MDP together with the likelihood parameters.
class BeliefTable {
public:
    BeliefTable() = default;

    BeliefTable(std::size_t n_states, std::size_t n_actions, double gamma, double sigma_w,
                double variance_floor = kDefaultVarianceFloor)
        : n_states_(n_states),
          n_actions_(n_actions),
          gamma_(gamma),
          sigma_w_(sigma_w),
          variance_floor_(variance_floor),
          beliefs_(n_states * n_actions) {
        if (n_states == 0 || n_actions == 0) throw std::invalid_argument("BeliefTable: empty state or action space");
        if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("BeliefTable: gamma must lie in [0, 1)");
        if (!(sigma_w >= 0.0)) throw std::invalid_argument("BeliefTable: sigma_w must be nonnegative");
        if (!(variance_floor > 0.0)) throw std::invalid_argument("BeliefTable: variance floor must be positive");
    }

    std::size_t n_states() const { return n_states_; }
    std::size_t n_actions() const { return n_actions_; }
    double gamma() const { return gamma_; }
    double sigma_w() const { return sigma_w_; }
    double variance_floor() const { return variance_floor_; }

    const GaussianBelief& at(StateId s, ActionId a) const { return beliefs_.at(index(s, a)); }

    /// Overwrites one entry, clamping the variance at the floor.
    void set(StateId s, ActionId a, GaussianBelief b) {
        if (!std::isfinite(b.mean)) throw std::domain_error("BeliefTable::set: non-finite mean");
        if (!(b.variance >= variance_floor_)) b.variance = variance_floor_;
        beliefs_.at(index(s, a)) = b;
    }

    std::vector<double> means() const {
        std::vector<double> out(beliefs_.size());
        for (std::size_t i = 0; i < beliefs_.size(); ++i) out[i] = beliefs_[i].mean;
        return out;
    }

    const std::vector<GaussianBelief>& entries() const { return beliefs_; }

    friend bool operator==(const BeliefTable& x, const BeliefTable& y) {
        if (x.n_states_ != y.n_states_ || x.n_actions_ != y.n_actions_) return false;
        for (std::size_t i = 0; i < x.beliefs_.size(); ++i)
            if (x.beliefs_[i].mean != y.beliefs_[i].mean || x.beliefs_[i].variance != y.beliefs_[i].variance)
                return false;
        return true;
    }

private:
    std::size_t index(StateId s, ActionId a) const {
        if (s >= n_states_ || a >= n_actions_) throw std::out_of_range("BeliefTable: (state, action) out of range");
        return s * n_actions_ + a;
    }

    std::size_t n_states_ = 0;
    std::size_t n_actions_ = 0;
    double gamma_ = 0.9;
    double sigma_w_ = 0.0;
    double variance_floor_ = kDefaultVarianceFloor;
    std::vector<GaussianBelief> beliefs_;
};

struct BeliefInit {
    double mean_lo = 0.0;
    double mean_hi = 1.0;
    double variance = kDefaultInitialVariance;
};

/// Means ~ U[mean_lo, mean_hi), variance fixed. Draw order is row-major over (s, a).
inline void initialize_beliefs(BeliefTable& table, const BeliefInit& init, Rng& rng) {
    for (StateId s = 0; s < table.n_states(); ++s)
        for (ActionId a = 0; a < table.n_actions(); ++a)
            table.set(s, a, {rng.uniform(init.mean_lo, init.mean_hi), init.variance});
}

/// Per-next-action quantities of the exact posterior.
///
/// `m`, `v` are the TD target mean r + gamma*mu' and its effective variance
/// gamma^2*sigma'^2 + sigma_w^2. `mu_bar`, `var_bar` are the precision-weighted
/// combination of prior and target, and `c` the TD-error weight density.
struct BranchComponents {
    double m = 0.0;
    double v = 1.0;
    double c = 0.0;
    double log_c = 0.0;
    double mu_bar = 0.0;
    double var_bar = 1.0;
};

/// Combines the prior with one Gaussian target N(m, v).
inline BranchComponents combine_with_target(const GaussianBelief& prior, double m, double v) {
    if (!(prior.variance > 0.0)) throw std::domain_error("td_components: prior variance must be positive");
    if (!(v > 0.0)) throw std::domain_error("td_components: degenerate target variance");
    BranchComponents out;
    out.m = m;
    out.v = v;
    out.var_bar = 1.0 / (1.0 / prior.variance + 1.0 / v);
    out.mu_bar = out.var_bar * (prior.mean / prior.variance + m / v);
    const double total = prior.variance + v;
    const double delta = m - prior.mean;
    out.log_c = -0.5 * delta * delta / total - 0.5 * std::log(total) - kLogSqrt2Pi;
    out.c = std::exp(out.log_c);
    return out;
}

inline BranchComponents td_components(const GaussianBelief& prior, const GaussianBelief& target, double r,
                                      double gamma, double sigma_w) {
    if (!(target.variance > 0.0)) throw std::domain_error("td_components: target variance must be positive");
    const double v = gamma * gamma * target.variance + sigma_w * sigma_w;
    return combine_with_target(prior, r + gamma * target.mean, v);
}

/// Terminal s': the target is r with variance sigma_w^2 (clamped when zero).
inline BranchComponents terminal_components(const GaussianBelief& prior, double r, double sigma_w) {
    const double v = sigma_w > 0.0 ? sigma_w * sigma_w : kTerminalVarianceClamp;
    return combine_with_target(prior, r, v);
}

/// Everything one belief update reads, detached from the table.
struct UpdateProblem {
    GaussianBelief prior;
    std::vector<GaussianBelief> next;  // beliefs over Q(s', b), unused when terminal
    double r = 0.0;
    double gamma = 0.9;
    double sigma_w = 0.0;
    bool terminal = false;

    /// True when the update reduces to a single Gaussian target.
    bool single_target() const { return terminal || gamma == 0.0; }
};

inline UpdateProblem make_problem(const BeliefTable& table, const Transition& tau) {
    UpdateProblem p;
    p.prior = table.at(tau.s, tau.a);
    p.r = tau.r;
    p.gamma = table.gamma();
    p.sigma_w = table.sigma_w();
    p.terminal = tau.terminal;
    if (tau.s_next >= table.n_states()) throw std::out_of_range("make_problem: next state out of range");
    if (!tau.terminal) {
        p.next.reserve(table.n_actions());
        for (ActionId b = 0; b < table.n_actions(); ++b) p.next.push_back(table.at(tau.s_next, b));
    }
    return p;
}

/// Writes `state,action,mean,variance` rows with round-trip precision.
inline void write_beliefs_csv(std::ostream& os, const BeliefTable& table) {
    os << "state,action,mean,variance\n";
    char buf[64];
    for (StateId s = 0; s < table.n_states(); ++s) {
        for (ActionId a = 0; a < table.n_actions(); ++a) {
            const auto& b = table.at(s, a);
            std::snprintf(buf, sizeof buf, "%.17g", b.mean);
            os << s << ',' << a << ',' << buf << ',';
            std::snprintf(buf, sizeof buf, "%.17g", b.variance);
            os << buf << '\n';
        }
    }
}

/// Loads rows written by write_beliefs_csv into an already-shaped table.
inline void read_beliefs_csv(std::istream& is, BeliefTable& table) {
    std::string line;
    if (!std::getline(is, line) || line != "state,action,mean,variance")
        throw std::runtime_error("read_beliefs_csv: missing header");
    std::size_t row = 1;
    while (std::getline(is, line)) {
        ++row;
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string f[4];
        for (auto& field : f)
            if (!std::getline(ss, field, ','))
                throw std::runtime_error("read_beliefs_csv: short row " + std::to_string(row));
        table.set(std::stoul(f[0]), std::stoul(f[1]), {std::stod(f[2]), std::stod(f[3])});
    }
}

}  // namespace adfq
