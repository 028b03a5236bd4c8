#pragma once

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "adfq/agents.hpp"
#include "adfq/envs.hpp"
#include "adfq/rng.hpp"
#include "adfq/values.hpp"

namespace adfq {

enum class DomainKind { kLoop, kMaze, kArms };

struct DomainSpec {
    DomainKind kind = DomainKind::kLoop;
    double slip = 0.0;
    std::string maze_text{kDefaultMaze};
    std::size_t n_arms = 2;
};

inline DomainKind parse_domain_kind(const std::string& s) {
    if (s == "loop") return DomainKind::kLoop;
    if (s == "maze") return DomainKind::kMaze;
    if (s == "arms") return DomainKind::kArms;
    throw std::invalid_argument("unknown domain '" + s + "'");
}

/// Short name used in output file names: loop, maze, arms2, arms10, ...
inline std::string domain_name(const DomainSpec& d) {
    switch (d.kind) {
        case DomainKind::kLoop: return "loop";
        case DomainKind::kMaze: return "maze";
        case DomainKind::kArms: return "arms" + std::to_string(d.n_arms);
    }
    return "?";
}

inline TabularMdp make_domain(const DomainSpec& d) {
    switch (d.kind) {
        case DomainKind::kLoop: return build_loop(d.slip);
        case DomainKind::kMaze: return build_maze(d.maze_text, d.slip);
        case DomainKind::kArms: return build_arms_mdp(d.n_arms);
    }
    throw std::logic_error("make_domain: bad kind");
}

struct ExperimentConfig {
    DomainSpec domain;
    std::vector<AgentKind> agents{AgentKind::kAdfq};
    AgentParams params;        // params.sigma_w is ignored; see sigma_w below
    std::optional<double> sigma_w;  // unset: 0 on deterministic domains, kStochasticSigmaW otherwise
    PolicySpec policy;
    std::size_t horizon = 10000;
    std::size_t eval_every = 0;  // 0: horizon / 100, at least 1
    std::size_t eval_episodes = 1;
    std::size_t n_trials = 10;
    std::uint64_t seed = 0;
    std::size_t jobs = 1;
    bool record_wall_time = false;  // off by default so output is reproducible byte for byte

    std::size_t cadence() const { return eval_every > 0 ? eval_every : std::max<std::size_t>(1, horizon / 100); }

    void validate() const {
        if (agents.empty()) throw std::invalid_argument("config: no agents");
        if (n_trials == 0) throw std::invalid_argument("config: n_trials must be at least 1");
        if (eval_episodes == 0) throw std::invalid_argument("config: eval_episodes must be at least 1");
        if (sigma_w && !(*sigma_w >= 0.0)) throw std::invalid_argument("config: sigma_w must be nonnegative");
        if (!(params.variance_floor > 0.0)) throw std::invalid_argument("config: variance floor must be positive");
        if (!(params.init.variance > 0.0)) throw std::invalid_argument("config: initial variance must be positive");
        if (!(params.init.mean_hi >= params.init.mean_lo)) throw std::invalid_argument("config: empty initial mean interval");
        policy.validate();
        if (policy.kind == PolicyKind::kThompson)
            for (AgentKind a : agents)
                if (a == AgentKind::kQLearning)
                    throw std::invalid_argument("config: Thompson sampling needs a belief agent, not qlearning");
    }
};

inline constexpr double kStochasticSigmaW = 0.01;

/// Agent parameters with sigma_w resolved against the domain.
inline AgentParams effective_params(const ExperimentConfig& cfg, const TabularMdp& mdp) {
    AgentParams p = cfg.params;
    p.sigma_w = cfg.sigma_w ? *cfg.sigma_w : (is_stochastic(mdp) ? kStochasticSigmaW : 0.0);
    p.gamma = mdp.gamma();
    return p;
}

struct EvalRecord {
    std::size_t trial = 0;
    std::size_t step = 0;
    double rmse = 0.0;
    double greedy_return = 0.0;
    std::int64_t wall_ms = 0;

    friend bool operator==(const EvalRecord&, const EvalRecord&) = default;
};

/// All records of one agent, sorted by (trial, step).
struct AgentRun {
    AgentKind agent = AgentKind::kAdfq;
    std::vector<EvalRecord> records;
    std::vector<ActionValues> final_values;  // point estimates at the horizon, one per trial
};

/// Ground truth and rollout cap shared by every trial of an experiment.
struct DomainContext {
    TabularMdp mdp;
    ActionValues qstar;
    std::vector<StateId> keys;  // states scored by rmse
    std::size_t rollout_cap = 1;

    explicit DomainContext(TabularMdp m) : mdp(std::move(m)) {
        mdp.validate();
        qstar = optimal_q(mdp);
        keys = learnable_states(mdp);
        rollout_cap = std::max<std::size_t>(1, (3 * optimal_path_length(mdp, qstar)) / 2);
    }
};

/// Steps at which records are taken: 0, k, 2k, ... and the horizon itself.
inline std::vector<std::size_t> eval_steps(std::size_t horizon, std::size_t every) {
    std::vector<std::size_t> out;
    for (std::size_t t = 0; t <= horizon; t += every) out.push_back(t);
    if (out.back() != horizon) out.push_back(horizon);
    return out;
}

/// Undiscounted return of the frozen greedy policy, averaged over `episodes`
/// rollouts of at most `cap` steps. Reads the agent, never writes it.
inline double greedy_return(const Agent& agent, const TabularMdp& mdp, std::size_t cap, std::size_t episodes, Rng& rng) {
    double total = 0.0;
    for (std::size_t e = 0; e < episodes; ++e) {
        StateId s = mdp.start_state();
        for (std::size_t t = 0; t < cap && !mdp.is_terminal(s); ++t) {
            const StepResult res = step(mdp, s, agent.greedy(s), rng);
            total += res.r;
            s = res.s_next;
        }
    }
    return total / static_cast<double>(episodes);
}

namespace detail {

using Clock = std::chrono::steady_clock;

class Recorder {
public:
    Recorder(const ExperimentConfig& cfg, const DomainContext& ctx, std::size_t trial)
        : cfg_(cfg), ctx_(ctx), trial_(trial), start_(Clock::now()) {}

    EvalRecord record(const Agent& agent, std::size_t step, std::size_t eval_index) const {
        Rng rng(derive_seed(cfg_.seed, {trial_, tag(Stream::kEval), eval_index}));
        EvalRecord r;
        r.trial = trial_;
        r.step = step;
        r.rmse = rmse(agent.estimates(), ctx_.qstar, ctx_.keys);
        r.greedy_return = greedy_return(agent, ctx_.mdp, ctx_.rollout_cap, cfg_.eval_episodes, rng);
        if (cfg_.record_wall_time)
            r.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start_).count();
        return r;
    }

private:
    const ExperimentConfig& cfg_;
    const DomainContext& ctx_;
    std::size_t trial_;
    Clock::time_point start_;
};

/// Runs fn(trial) for every trial on up to `jobs` threads. Results land in
/// per-trial slots, so the merged output does not depend on scheduling.
template <class Fn>
auto run_trials(std::size_t n_trials, std::size_t jobs, Fn fn) -> std::vector<decltype(fn(std::size_t{}))> {
    std::vector<decltype(fn(std::size_t{}))> slots(n_trials);
    jobs = std::clamp<std::size_t>(jobs, 1, n_trials);
    if (jobs == 1) {
        for (std::size_t t = 0; t < n_trials; ++t) slots[t] = fn(t);
        return slots;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j) {
        pool.emplace_back([&] {
            for (std::size_t t = next++; t < n_trials; t = next++) {
                try {
                    slots[t] = fn(t);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
    return slots;
}

/// One agent's output from one trial.
struct TrialRun {
    std::vector<EvalRecord> records;
    ActionValues final_values;
};

inline std::vector<AgentRun> merge(const ExperimentConfig& cfg, const std::vector<std::vector<TrialRun>>& per_trial) {
    std::vector<AgentRun> out(cfg.agents.size());
    for (std::size_t i = 0; i < cfg.agents.size(); ++i) {
        out[i].agent = cfg.agents[i];
        for (const auto& trial : per_trial) {
            out[i].records.insert(out[i].records.end(), trial[i].records.begin(), trial[i].records.end());
            out[i].final_values.push_back(trial[i].final_values);
        }
    }
    return out;
}

}  // namespace detail

/// Fixed uniform-policy trajectory of `length` transitions; terminal states
/// restart the episode from the start state.
inline std::vector<Transition> random_trajectory(const TabularMdp& mdp, std::size_t length, Rng& rng) {
    std::vector<Transition> out;
    out.reserve(length);
    StateId s = mdp.start_state();
    for (std::size_t t = 0; t < length; ++t) {
        const ActionId a = rng.uniform_index(mdp.n_actions());
        const StepResult res = step(mdp, s, a, rng);
        out.push_back({s, a, res.r, res.s_next, res.terminal});
        s = res.terminal ? mdp.start_state() : res.s_next;
    }
    return out;
}

/// Every agent learns from the same fixed random trajectory per trial; records
/// hold the RMSE to Q* over reachable non-terminal states.
inline std::vector<AgentRun> run_convergence(const ExperimentConfig& cfg) {
    cfg.validate();
    const DomainContext ctx(make_domain(cfg.domain));
    const AgentParams params = effective_params(cfg, ctx.mdp);
    const auto steps = eval_steps(cfg.horizon, cfg.cadence());

    auto per_trial = detail::run_trials(cfg.n_trials, cfg.jobs, [&](std::size_t trial) {
        Rng traj_rng(derive_seed(cfg.seed, {trial, tag(Stream::kTrajectory)}));
        const auto trajectory = random_trajectory(ctx.mdp, cfg.horizon, traj_rng);
        std::vector<detail::TrialRun> runs;
        for (AgentKind kind : cfg.agents) {
            auto agent = make_agent(kind, ctx.mdp, params);
            Rng init_rng(derive_seed(cfg.seed, {trial, tag(Stream::kInit)}));
            agent->reset(init_rng);
            const detail::Recorder rec(cfg, ctx, trial);
            std::vector<EvalRecord> records;
            std::size_t t = 0;
            for (std::size_t k = 0; k < steps.size(); ++k) {
                for (; t < steps[k]; ++t) agent->observe(trajectory[t]);
                records.push_back(rec.record(*agent, t, k));
            }
            runs.push_back({std::move(records), agent->estimates()});
        }
        return runs;
    });
    return detail::merge(cfg, per_trial);
}

/// Online learning under the configured policy with periodic frozen greedy
/// evaluation. Evaluation draws from its own stream, so it never perturbs the
/// learning trajectory.
inline std::vector<AgentRun> run_learning(const ExperimentConfig& cfg) {
    cfg.validate();
    const DomainContext ctx(make_domain(cfg.domain));
    const AgentParams params = effective_params(cfg, ctx.mdp);
    const auto steps = eval_steps(cfg.horizon, cfg.cadence());

    auto per_trial = detail::run_trials(cfg.n_trials, cfg.jobs, [&](std::size_t trial) {
        std::vector<detail::TrialRun> runs;
        for (AgentKind kind : cfg.agents) {
            auto agent = make_agent(kind, ctx.mdp, params);
            Rng init_rng(derive_seed(cfg.seed, {trial, tag(Stream::kInit)}));
            Rng policy_rng(derive_seed(cfg.seed, {trial, tag(Stream::kPolicy)}));
            Rng env_rng(derive_seed(cfg.seed, {trial, tag(Stream::kEnv)}));
            agent->reset(init_rng);
            EnvRunner env(ctx.mdp);
            const detail::Recorder rec(cfg, ctx, trial);
            std::vector<EvalRecord> records;
            std::size_t t = 0;
            for (std::size_t k = 0; k < steps.size(); ++k) {
                for (; t < steps[k]; ++t) {
                    agent_step(*agent, cfg.policy, env, policy_rng, env_rng);
                    if (env.done()) env.reset();
                }
                records.push_back(rec.record(*agent, t, k));
            }
            runs.push_back({std::move(records), agent->estimates()});
        }
        return runs;
    });
    return detail::merge(cfg, per_trial);
}

// ---------------------------------------------------------------------------
// CSV

namespace detail {

/// Shortest round-trip decimal form; locale independent.
inline std::string format_double(double x) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

}  // namespace detail

inline constexpr std::string_view kRecordHeader = "trial,step,rmse,greedy_return,wall_ms";

inline void write_records_csv(std::ostream& os, const std::vector<EvalRecord>& records) {
    os << kRecordHeader << '\n';
    for (const auto& r : records)
        os << r.trial << ',' << r.step << ',' << detail::format_double(r.rmse) << ','
           << detail::format_double(r.greedy_return) << ',' << r.wall_ms << '\n';
}

struct MeanRecord {
    std::size_t step = 0;
    double rmse = 0.0;
    double greedy_return = 0.0;
    std::size_t n_trials = 0;
};

/// Per-step averages across trials, in step order.
inline std::vector<MeanRecord> average_over_trials(const std::vector<EvalRecord>& records) {
    std::vector<MeanRecord> out;
    for (const auto& r : records) {
        auto it = std::lower_bound(out.begin(), out.end(), r.step,
                                   [](const MeanRecord& m, std::size_t step) { return m.step < step; });
        if (it == out.end() || it->step != r.step) it = out.insert(it, MeanRecord{r.step});
        it->rmse += r.rmse;
        it->greedy_return += r.greedy_return;
        ++it->n_trials;
    }
    for (auto& m : out) {
        m.rmse /= static_cast<double>(m.n_trials);
        m.greedy_return /= static_cast<double>(m.n_trials);
    }
    return out;
}

inline void write_mean_csv(std::ostream& os, const std::vector<MeanRecord>& means) {
    os << "step,rmse,greedy_return,n_trials\n";
    for (const auto& m : means)
        os << m.step << ',' << detail::format_double(m.rmse) << ',' << detail::format_double(m.greedy_return) << ','
           << m.n_trials << '\n';
}

/// Trailing moving average with window w (shorter at the start).
inline std::vector<double> moving_average(const std::vector<double>& xs, std::size_t w) {
    if (w == 0) throw std::invalid_argument("moving_average: window must be positive");
    std::vector<double> out(xs.size());
    double acc = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        acc += xs[i];
        if (i >= w) acc -= xs[i - w];
        out[i] = acc / static_cast<double>(std::min(i + 1, w));
    }
    return out;
}

/// File stem for one run: <domain>_<agent>_<policy>.
inline std::string run_file_stem(const DomainSpec& d, AgentKind agent, const std::string& policy) {
    return domain_name(d) + "_" + to_string(agent) + "_" + policy;
}

}  // namespace adfq
