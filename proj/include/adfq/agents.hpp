#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "adfq/adfq.hpp"
#include "adfq/belief.hpp"
#include "adfq/envs.hpp"
#include "adfq/oracles.hpp"
#include "adfq/rng.hpp"
#include "adfq/values.hpp"

namespace adfq {

// ---------------------------------------------------------------------------
// Action selection

enum class PolicyKind { kEpsilonGreedy, kBoltzmann, kThompson, kUniformRandom };

struct PolicySpec {
    PolicyKind kind = PolicyKind::kEpsilonGreedy;
    double epsilon = 0.1;
    double temperature = 1.0;

    void validate() const {
        if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("PolicySpec: epsilon must lie in [0, 1]");
        if (!(temperature > 0.0)) throw std::invalid_argument("PolicySpec: temperature must be positive");
    }
};

inline std::string to_string(PolicyKind k) {
    switch (k) {
        case PolicyKind::kEpsilonGreedy: return "egreedy";
        case PolicyKind::kBoltzmann: return "boltzmann";
        case PolicyKind::kThompson: return "ts";
        case PolicyKind::kUniformRandom: return "uniform";
    }
    return "?";
}

inline PolicyKind parse_policy_kind(const std::string& s) {
    if (s == "egreedy" || s == "epsilon_greedy") return PolicyKind::kEpsilonGreedy;
    if (s == "boltzmann") return PolicyKind::kBoltzmann;
    if (s == "ts" || s == "thompson") return PolicyKind::kThompson;
    if (s == "uniform" || s == "uniform_random") return PolicyKind::kUniformRandom;
    throw std::invalid_argument("unknown policy '" + s + "'");
}

namespace detail {

inline ActionId sample_boltzmann(std::span<const double> values, double temperature, Rng& rng) {
    double mx = values[0];
    for (double v : values) mx = std::max(mx, v);
    std::vector<double> w(values.size());
    double total = 0.0;
    for (std::size_t a = 0; a < values.size(); ++a) {
        w[a] = std::exp((values[a] - mx) / temperature);
        total += w[a];
    }
    const double u = rng.uniform() * total;
    double acc = 0.0;
    for (std::size_t a = 0; a < w.size(); ++a) {
        acc += w[a];
        if (u < acc) return a;
    }
    return w.size() - 1;
}

}  // namespace detail

/// Action from point estimates (Q-values or belief means).
inline ActionId select_action(const PolicySpec& policy, std::span<const double> values, Rng& rng) {
    if (values.empty()) throw std::domain_error("select_action: no actions");
    switch (policy.kind) {
        case PolicyKind::kEpsilonGreedy:
            if (rng.uniform() < policy.epsilon) return rng.uniform_index(values.size());
            return argmax(values);
        case PolicyKind::kBoltzmann:
            return detail::sample_boltzmann(values, policy.temperature, rng);
        case PolicyKind::kUniformRandom:
            return rng.uniform_index(values.size());
        case PolicyKind::kThompson:
            throw std::invalid_argument("select_action: Thompson sampling needs beliefs, not point values");
    }
    throw std::logic_error("select_action: bad policy kind");
}

/// Action from Gaussian beliefs. Greedy choices use the means; Thompson
/// sampling draws one value per action and takes the argmax.
inline ActionId select_action(const PolicySpec& policy, std::span<const GaussianBelief> beliefs, Rng& rng) {
    if (beliefs.empty()) throw std::domain_error("select_action: no actions");
    std::vector<double> values(beliefs.size());
    if (policy.kind == PolicyKind::kThompson) {
        for (std::size_t a = 0; a < beliefs.size(); ++a)
            values[a] = rng.normal(beliefs[a].mean, std::sqrt(beliefs[a].variance));
        return argmax(values);
    }
    for (std::size_t a = 0; a < beliefs.size(); ++a) values[a] = beliefs[a].mean;
    return select_action(policy, std::span<const double>(values), rng);
}

// ---------------------------------------------------------------------------
// Q-learning

struct QTable {
    ActionValues values;
    std::vector<std::uint64_t> visit_counts;

    QTable() = default;
    QTable(std::size_t n_states, std::size_t n_actions)
        : values(n_states, n_actions), visit_counts(n_states * n_actions, 0) {}

    std::uint64_t visits(StateId s, ActionId a) const { return visit_counts.at(s * values.n_actions + a); }
};

/// alpha0 (n0 + 1) / (n0 + t) for the t-th visit, t >= 1.
inline double qlearning_rate(double alpha0, double n0, std::uint64_t t) {
    return alpha0 * (n0 + 1.0) / (n0 + static_cast<double>(t));
}

/// One tabular Q-learning step; returns the new Q(s, a).
inline double qlearning_update(QTable& q, const Transition& tau, double alpha0, double n0, double gamma) {
    const std::size_t idx = tau.s * q.values.n_actions + tau.a;
    const std::uint64_t t = ++q.visit_counts.at(idx);
    const double alpha = qlearning_rate(alpha0, n0, t);
    const double target = tau.r + (tau.terminal ? 0.0 : gamma * q.values.max_value(tau.s_next));
    double& cur = q.values.values.at(idx);
    cur = (1.0 - alpha) * cur + alpha * target;
    return cur;
}

// ---------------------------------------------------------------------------
// Agents

enum class AgentKind { kAdfq, kAdfqNumeric, kQLearning };

inline std::string to_string(AgentKind k) {
    switch (k) {
        case AgentKind::kAdfq: return "adfq";
        case AgentKind::kAdfqNumeric: return "adfq-numeric";
        case AgentKind::kQLearning: return "qlearning";
    }
    return "?";
}

inline AgentKind parse_agent_kind(const std::string& s) {
    if (s == "adfq") return AgentKind::kAdfq;
    if (s == "adfq-numeric" || s == "adfq_numeric" || s == "numeric") return AgentKind::kAdfqNumeric;
    if (s == "qlearning" || s == "q" || s == "ql") return AgentKind::kQLearning;
    throw std::invalid_argument("unknown agent '" + s + "'");
}

struct AgentParams {
    double gamma = 0.95;
    double sigma_w = 0.0;
    double variance_floor = kDefaultVarianceFloor;
    BeliefInit init;
    std::size_t quadrature_points = 2001;
    double alpha0 = 0.5;
    double n0 = 100.0;
};

class Agent {
public:
    virtual ~Agent() = default;

    virtual AgentKind kind() const = 0;
    /// Draws any random initial state from `init_rng`.
    virtual void reset(Rng& init_rng) = 0;
    virtual ActionId act(StateId s, const PolicySpec& policy, Rng& rng) const = 0;
    /// Greedy action on point estimates, no randomness.
    virtual ActionId greedy(StateId s) const = 0;
    virtual void observe(const Transition& tau) = 0;
    /// Current point estimates (means for belief agents).
    virtual ActionValues estimates() const = 0;
    virtual std::unique_ptr<Agent> clone() const = 0;
};

/// Gaussian-belief agent; the update is either the analytic peak-matched
/// mixture or quadrature moments of the exact posterior.
class AdfqAgent final : public Agent {
public:
    AdfqAgent(std::size_t n_states, std::size_t n_actions, const AgentParams& params, bool numeric = false)
        : params_(params), numeric_(numeric),
          table_(n_states, n_actions, params.gamma, params.sigma_w, params.variance_floor) {}

    AgentKind kind() const override { return numeric_ ? AgentKind::kAdfqNumeric : AgentKind::kAdfq; }

    void reset(Rng& init_rng) override { initialize_beliefs(table_, params_.init, init_rng); }

    ActionId act(StateId s, const PolicySpec& policy, Rng& rng) const override {
        return select_action(policy, row(s), rng);
    }

    ActionId greedy(StateId s) const override {
        const auto r = row(s);
        std::vector<double> means(r.size());
        for (std::size_t a = 0; a < r.size(); ++a) means[a] = r[a].mean;
        return argmax(means);
    }

    void observe(const Transition& tau) override {
        if (!numeric_) {
            apply_update(table_, tau, adfq_update(table_, tau));
            return;
        }
        try {
            const auto m = quadrature_moments(make_problem(table_, tau), QuadratureGrid{.n = params_.quadrature_points});
            table_.set(tau.s, tau.a, {m.mean, m.variance});
        } catch (const std::underflow_error&) {
            // the grid no longer resolves the posterior; keep the mean, collapse the variance
            table_.set(tau.s, tau.a, {table_.at(tau.s, tau.a).mean, table_.variance_floor()});
        }
    }

    ActionValues estimates() const override {
        ActionValues out(table_.n_states(), table_.n_actions());
        out.values = table_.means();
        return out;
    }

    std::unique_ptr<Agent> clone() const override { return std::make_unique<AdfqAgent>(*this); }

    const BeliefTable& table() const { return table_; }
    BeliefTable& table() { return table_; }

private:
    std::span<const GaussianBelief> row(StateId s) const {
        return {table_.entries().data() + s * table_.n_actions(), table_.n_actions()};
    }

    AgentParams params_;
    bool numeric_;
    BeliefTable table_;
};

/// Tabular Q-learning with the visit-count learning-rate schedule; Q starts at 0.
class QLearningAgent final : public Agent {
public:
    QLearningAgent(std::size_t n_states, std::size_t n_actions, const AgentParams& params)
        : params_(params), q_(n_states, n_actions) {}

    AgentKind kind() const override { return AgentKind::kQLearning; }

    void reset(Rng&) override { q_ = QTable(q_.values.n_states, q_.values.n_actions); }

    ActionId act(StateId s, const PolicySpec& policy, Rng& rng) const override {
        return select_action(policy, q_.values.row(s), rng);
    }

    ActionId greedy(StateId s) const override { return argmax(q_.values.row(s)); }

    void observe(const Transition& tau) override { qlearning_update(q_, tau, params_.alpha0, params_.n0, params_.gamma); }

    ActionValues estimates() const override { return q_.values; }

    std::unique_ptr<Agent> clone() const override { return std::make_unique<QLearningAgent>(*this); }

    const QTable& qtable() const { return q_; }

private:
    AgentParams params_;
    QTable q_;
};

inline std::unique_ptr<Agent> make_agent(AgentKind kind, const TabularMdp& mdp, AgentParams params) {
    params.gamma = mdp.gamma();
    switch (kind) {
        case AgentKind::kAdfq: return std::make_unique<AdfqAgent>(mdp.n_states(), mdp.n_actions(), params, false);
        case AgentKind::kAdfqNumeric: return std::make_unique<AdfqAgent>(mdp.n_states(), mdp.n_actions(), params, true);
        case AgentKind::kQLearning: return std::make_unique<QLearningAgent>(mdp.n_states(), mdp.n_actions(), params);
    }
    throw std::logic_error("make_agent: bad kind");
}

// ---------------------------------------------------------------------------
// Interaction

/// Current position of an episode in a TabularMdp.
class EnvRunner {
public:
    explicit EnvRunner(const TabularMdp& mdp) : mdp_(&mdp), s_(mdp.start_state()) {}

    StateId state() const { return s_; }
    bool done() const { return mdp_->is_terminal(s_); }
    void reset() { s_ = mdp_->start_state(); }
    const TabularMdp& mdp() const { return *mdp_; }

    Transition step(ActionId a, Rng& rng) {
        const StepResult res = adfq::step(*mdp_, s_, a, rng);
        Transition tau{s_, a, res.r, res.s_next, res.terminal};
        s_ = res.s_next;
        return tau;
    }

private:
    const TabularMdp* mdp_;
    StateId s_;
};

/// Choose, act, learn. The caller resets the runner after a terminal step.
inline Transition agent_step(Agent& agent, const PolicySpec& policy, EnvRunner& env, Rng& policy_rng, Rng& env_rng) {
    if (env.done()) throw std::domain_error("agent_step: episode already terminated");
    const ActionId a = agent.act(env.state(), policy, policy_rng);
    const Transition tau = env.step(a, env_rng);
    agent.observe(tau);
    return tau;
}

}  // namespace adfq
