#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <deque>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "adfq/belief.hpp"
#include "adfq/rng.hpp"
#include "adfq/values.hpp"

namespace adfq {

struct RewardOutcome {
    double value = 0.0;
    double prob = 1.0;
};

/// Finite-support reward distribution.
using RewardDist = std::vector<RewardOutcome>;

inline RewardDist constant_reward(double r) { return {{r, 1.0}}; }

inline double expected_reward(const RewardDist& dist) {
    double e = 0.0;
    for (const auto& o : dist) e += o.prob * o.value;
    return e;
}

/// One branch of P(. | s, a): the next state and the reward paid on the way.
///
/// Rewards live on outcomes rather than on (s, a) so that an action slip can
/// change the payout without changing the next state.
struct Outcome {
    double prob = 1.0;
    StateId next = 0;
    RewardDist reward = constant_reward(0.0);
};

class TabularMdp {
public:
    TabularMdp(std::size_t n_states, std::size_t n_actions, double gamma)
        : n_states_(n_states), n_actions_(n_actions), gamma_(gamma), outcomes_(n_states * n_actions),
          terminal_(n_states, false) {
        if (n_states == 0 || n_actions == 0) throw std::invalid_argument("TabularMdp: empty state or action space");
        if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("TabularMdp: gamma must lie in [0, 1)");
    }

    std::size_t n_states() const { return n_states_; }
    std::size_t n_actions() const { return n_actions_; }
    double gamma() const { return gamma_; }
    StateId start_state() const { return start_; }
    bool is_terminal(StateId s) const { return terminal_.at(s); }
    const std::vector<Outcome>& outcomes(StateId s, ActionId a) const { return outcomes_.at(s * n_actions_ + a); }

    void set_start_state(StateId s) {
        if (s >= n_states_) throw std::out_of_range("TabularMdp: start state out of range");
        start_ = s;
    }
    void set_terminal(StateId s, bool t = true) { terminal_.at(s) = t; }

    /// Adds probability mass; zero-probability outcomes are dropped.
    void add_outcome(StateId s, ActionId a, Outcome o) {
        if (o.next >= n_states_) throw std::out_of_range("TabularMdp: next state out of range");
        if (o.prob <= 0.0) return;
        outcomes_.at(s * n_actions_ + a).push_back(std::move(o));
    }

    /// Dense row P(. | s, a).
    std::vector<double> transition_row(StateId s, ActionId a) const {
        std::vector<double> row(n_states_, 0.0);
        for (const auto& o : outcomes(s, a)) row[o.next] += o.prob;
        return row;
    }

    double expected_reward(StateId s, ActionId a) const {
        double e = 0.0;
        for (const auto& o : outcomes(s, a)) e += o.prob * adfq::expected_reward(o.reward);
        return e;
    }

    /// Checks row sums, reward normalization and absorbing terminals.
    void validate() const {
        for (StateId s = 0; s < n_states_; ++s) {
            for (ActionId a = 0; a < n_actions_; ++a) {
                double total = 0.0;
                for (const auto& o : outcomes(s, a)) {
                    total += o.prob;
                    double rp = 0.0;
                    for (const auto& r : o.reward) rp += r.prob;
                    if (std::abs(rp - 1.0) > 1e-12) throw std::logic_error("TabularMdp: reward probabilities do not sum to 1");
                    if (terminal_[s] && o.next != s) throw std::logic_error("TabularMdp: terminal state is not absorbing");
                }
                if (std::abs(total - 1.0) > 1e-12) throw std::logic_error("TabularMdp: transition row does not sum to 1");
            }
        }
    }

private:
    std::size_t n_states_;
    std::size_t n_actions_;
    double gamma_;
    StateId start_ = 0;
    std::vector<std::vector<Outcome>> outcomes_;
    std::vector<bool> terminal_;
};

struct StepResult {
    double r = 0.0;
    StateId s_next = 0;
    bool terminal = false;
};

inline double sample_reward(const RewardDist& dist, Rng& rng) {
    if (dist.size() == 1) return dist.front().value;
    const double u = rng.uniform();
    double acc = 0.0;
    for (const auto& o : dist) {
        acc += o.prob;
        if (u < acc) return o.value;
    }
    return dist.back().value;
}

/// Samples s' and r. One uniform picks the outcome (only when there is a
/// choice), one more picks the reward.
inline StepResult step(const TabularMdp& mdp, StateId s, ActionId a, Rng& rng) {
    if (mdp.is_terminal(s)) throw std::domain_error("step: state is terminal");
    const auto& outs = mdp.outcomes(s, a);
    const Outcome* chosen = &outs.back();
    if (outs.size() > 1) {
        const double u = rng.uniform();
        double acc = 0.0;
        for (const auto& o : outs) {
            acc += o.prob;
            if (u < acc) {
                chosen = &o;
                break;
            }
        }
    }
    StepResult out;
    out.s_next = chosen->next;
    out.r = sample_reward(chosen->reward, rng);
    out.terminal = mdp.is_terminal(out.s_next);
    return out;
}

// ---------------------------------------------------------------------------
// Loop

inline constexpr ActionId kLoopA = 0;
inline constexpr ActionId kLoopB = 1;

/// Nine states, two actions. Action a walks 0 -> 1 -> 2 -> 3 -> 4 -> 0 and is
/// paid +1 on leaving 4; action b walks 0 -> 5 -> 6 -> 7 -> 8 -> 0 and is paid
/// +2 on leaving 8. The other action inside either loop returns to 0 unpaid.
/// With probability `slip` the other action is executed instead.
///
///   state | a        | b
///   ------+----------+---------
///   0     | 1        | 5
///   1..3  | s+1      | 0
///   4     | 0 (+1)   | 0
///   5..7  | 0        | s+1
///   8     | 0        | 0 (+2)
inline TabularMdp build_loop(double slip = 0.0, double gamma = 0.95) {
    if (!(slip >= 0.0 && slip <= 0.5)) throw std::invalid_argument("build_loop: slip must lie in [0, 0.5]");
    TabularMdp mdp(9, 2, gamma);
    auto executed = [](StateId s, ActionId a) -> Outcome {
        if (s == 0) return {1.0, a == kLoopA ? StateId{1} : StateId{5}, constant_reward(0.0)};
        if (s <= 4) {
            if (a == kLoopB) return {1.0, 0, constant_reward(0.0)};
            return {1.0, s == 4 ? StateId{0} : s + 1, constant_reward(s == 4 ? 1.0 : 0.0)};
        }
        if (a == kLoopA) return {1.0, 0, constant_reward(0.0)};
        return {1.0, s == 8 ? StateId{0} : s + 1, constant_reward(s == 8 ? 2.0 : 0.0)};
    };
    for (StateId s = 0; s < 9; ++s) {
        for (ActionId a = 0; a < 2; ++a) {
            Outcome intended = executed(s, a);
            Outcome slipped = executed(s, 1 - a);
            intended.prob = 1.0 - slip;
            slipped.prob = slip;
            mdp.add_outcome(s, a, intended);
            mdp.add_outcome(s, a, slipped);
        }
    }
    mdp.set_start_state(0);
    return mdp;
}

// ---------------------------------------------------------------------------
// Maze

struct MazeParseError : std::runtime_error {
    std::size_t line;
    std::size_t column;
    MazeParseError(const std::string& what, std::size_t l, std::size_t c)
        : std::runtime_error("maze:" + std::to_string(l) + ":" + std::to_string(c) + ": " + what), line(l), column(c) {}
};

/// Shipped layout: 33 open cells, 3 flags, 264 states. The shortest route that
/// collects every flag is 16 steps.
inline constexpr std::string_view kDefaultMaze =
    "S......\n"
    "##.###.\n"
    "..F....\n"
    ".######\n"
    "...F...\n"
    "###.##.\n"
    "G..F...\n";

/// Grid bookkeeping for a maze built from text.
struct MazeLayout {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::string> grid;
    std::vector<std::size_t> cell_of;  // grid index -> open-cell index, or npos for walls
    std::vector<std::size_t> grid_of;  // open-cell index -> grid index
    std::vector<std::size_t> flag_of;  // grid index -> flag bit, or npos
    std::size_t n_flags = 0;
    std::size_t start_cell = 0;
    std::size_t goal_cell = 0;

    static constexpr std::size_t npos = static_cast<std::size_t>(-1);

    std::size_t n_cells() const { return grid_of.size(); }
    std::size_t n_masks() const { return std::size_t{1} << n_flags; }
    StateId state(std::size_t cell, std::size_t mask) const { return cell * n_masks() + mask; }
    std::size_t cell_of_state(StateId s) const { return s / n_masks(); }
    std::size_t mask_of_state(StateId s) const { return s % n_masks(); }
};

inline MazeLayout parse_maze(std::string_view text) {
    MazeLayout L;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    std::size_t starts = 0, goals = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) {
            // trailing blank lines are fine, interior ones are not
            std::string rest;
            while (std::getline(in, rest))
                if (!rest.empty() && rest != "\r") throw MazeParseError("blank line inside layout", lineno, 1);
            break;
        }
        if (!L.grid.empty() && line.size() != L.cols)
            throw MazeParseError("ragged row: expected " + std::to_string(L.cols) + " columns", lineno,
                                 std::min(line.size(), L.cols) + 1);
        for (std::size_t c = 0; c < line.size(); ++c) {
            switch (line[c]) {
                case '#': case '.': case 'F': break;
                case 'S': ++starts; break;
                case 'G': ++goals; break;
                default: throw MazeParseError(std::string("unexpected character '") + line[c] + "'", lineno, c + 1);
            }
        }
        L.cols = line.size();
        L.grid.push_back(line);
    }
    if (L.grid.empty()) throw MazeParseError("empty layout", 1, 1);
    if (starts != 1) throw MazeParseError("layout needs exactly one S", lineno, 1);
    if (goals != 1) throw MazeParseError("layout needs exactly one G", lineno, 1);
    L.rows = L.grid.size();
    L.cell_of.assign(L.rows * L.cols, MazeLayout::npos);
    L.flag_of.assign(L.rows * L.cols, MazeLayout::npos);
    for (std::size_t r = 0; r < L.rows; ++r) {
        for (std::size_t c = 0; c < L.cols; ++c) {
            const char ch = L.grid[r][c];
            if (ch == '#') continue;
            const std::size_t g = r * L.cols + c;
            L.cell_of[g] = L.grid_of.size();
            if (ch == 'S') L.start_cell = L.grid_of.size();
            if (ch == 'G') L.goal_cell = L.grid_of.size();
            if (ch == 'F') L.flag_of[g] = L.n_flags++;
            L.grid_of.push_back(g);
        }
    }
    if (L.n_flags > 16) throw MazeParseError("too many flags (max 16)", lineno, 1);
    return L;
}

enum MazeAction : ActionId { kNorth = 0, kEast = 1, kSouth = 2, kWest = 3 };

/// Maze MDP over (cell, collected-flag mask). Moving into a wall or off the
/// grid leaves the agent in place. Reaching G ends the episode and pays the
/// number of flags held. With probability `slip` the move goes 90 degrees to
/// the right of the chosen direction instead.
inline TabularMdp build_maze(std::string_view layout_text, double slip = 0.0, double gamma = 0.95) {
    if (!(slip >= 0.0 && slip <= 1.0)) throw std::invalid_argument("build_maze: slip must lie in [0, 1]");
    const MazeLayout L = parse_maze(layout_text);
    const std::size_t n_states = L.n_cells() * L.n_masks();
    TabularMdp mdp(n_states, 4, gamma);
    constexpr int dr[4] = {-1, 0, 1, 0};
    constexpr int dc[4] = {0, 1, 0, -1};

    auto move = [&](std::size_t cell, std::size_t mask, ActionId dir) -> Outcome {
        const std::size_t g = L.grid_of[cell];
        const long r = static_cast<long>(g / L.cols) + dr[dir];
        const long c = static_cast<long>(g % L.cols) + dc[dir];
        std::size_t target = cell;
        if (r >= 0 && c >= 0 && r < static_cast<long>(L.rows) && c < static_cast<long>(L.cols)) {
            const std::size_t ng = static_cast<std::size_t>(r) * L.cols + static_cast<std::size_t>(c);
            if (L.cell_of[ng] != MazeLayout::npos) target = L.cell_of[ng];
        }
        const std::size_t tg = L.grid_of[target];
        if (L.flag_of[tg] != MazeLayout::npos) mask |= std::size_t{1} << L.flag_of[tg];
        const double r_goal = target == L.goal_cell ? static_cast<double>(std::popcount(mask)) : 0.0;
        return {1.0, L.state(target, mask), constant_reward(r_goal)};
    };

    for (std::size_t cell = 0; cell < L.n_cells(); ++cell) {
        for (std::size_t mask = 0; mask < L.n_masks(); ++mask) {
            const StateId s = L.state(cell, mask);
            if (cell == L.goal_cell) {
                mdp.set_terminal(s);
                for (ActionId a = 0; a < 4; ++a) mdp.add_outcome(s, a, {1.0, s, constant_reward(0.0)});
                continue;
            }
            for (ActionId a = 0; a < 4; ++a) {
                Outcome intended = move(cell, mask, a);
                Outcome slipped = move(cell, mask, (a + 1) % 4);
                intended.prob = 1.0 - slip;
                slipped.prob = slip;
                mdp.add_outcome(s, a, intended);
                mdp.add_outcome(s, a, slipped);
            }
        }
    }
    mdp.set_start_state(L.state(L.start_cell, 0));
    return mdp;
}

// ---------------------------------------------------------------------------
// Stochastic-reward arms

/// Default payouts: the last arm pays +5 w.p. 0.8 and -5 w.p. 0.2, every other arm pays 0.
inline std::vector<RewardDist> default_arm_rewards(std::size_t n_arms) {
    std::vector<RewardDist> out(n_arms, constant_reward(0.0));
    if (n_arms > 0) out.back() = {{5.0, 0.8}, {-5.0, 0.2}};
    return out;
}

/// s0 -> s1 under every action with reward 0; from s1, arm i leads to the
/// terminal state 2 + i and pays reward_spec[i].
inline TabularMdp build_arms_mdp(std::size_t n_arms, std::vector<RewardDist> reward_spec = {}, double gamma = 0.9) {
    if (n_arms < 2) throw std::invalid_argument("build_arms_mdp: need at least two arms");
    if (reward_spec.empty()) reward_spec = default_arm_rewards(n_arms);
    if (reward_spec.size() != n_arms) throw std::invalid_argument("build_arms_mdp: one reward spec per arm");
    TabularMdp mdp(2 + n_arms, n_arms, gamma);
    for (ActionId a = 0; a < n_arms; ++a) {
        mdp.add_outcome(0, a, {1.0, 1, constant_reward(0.0)});
        mdp.add_outcome(1, a, {1.0, 2 + a, reward_spec[a]});
    }
    for (std::size_t i = 0; i < n_arms; ++i) {
        const StateId t = 2 + i;
        mdp.set_terminal(t);
        for (ActionId a = 0; a < n_arms; ++a) mdp.add_outcome(t, a, {1.0, t, constant_reward(0.0)});
    }
    mdp.set_start_state(0);
    return mdp;
}

// ---------------------------------------------------------------------------
// Ground truth

/// One application of the Bellman optimality operator. Terminal next states
/// contribute no continuation value.
inline ActionValues bellman_backup(const TabularMdp& mdp, const ActionValues& q) {
    ActionValues out(mdp.n_states(), mdp.n_actions());
    for (StateId s = 0; s < mdp.n_states(); ++s) {
        for (ActionId a = 0; a < mdp.n_actions(); ++a) {
            double v = 0.0;
            for (const auto& o : mdp.outcomes(s, a)) {
                double cont = 0.0;
                if (!mdp.is_terminal(s) && !mdp.is_terminal(o.next)) cont = mdp.gamma() * q.max_value(o.next);
                v += o.prob * (expected_reward(o.reward) + cont);
            }
            out(s, a) = v;
        }
    }
    return out;
}

/// Q* by value iteration; the result's Bellman residual is below `tol`.
inline ActionValues optimal_q(const TabularMdp& mdp, double tol = 1e-10) {
    if (!(tol > 0.0)) throw std::invalid_argument("optimal_q: tol must be positive");
    ActionValues q(mdp.n_states(), mdp.n_actions());
    for (std::size_t iter = 0; iter < 1000000; ++iter) {
        ActionValues next = bellman_backup(mdp, q);
        double diff = 0.0;
        for (std::size_t i = 0; i < q.values.size(); ++i) diff = std::max(diff, std::abs(next.values[i] - q.values[i]));
        q = std::move(next);
        if (diff < tol) return q;
    }
    throw std::runtime_error("optimal_q: value iteration did not converge");
}

/// True when some transition or reward has more than one outcome.
inline bool is_stochastic(const TabularMdp& mdp) {
    for (StateId s = 0; s < mdp.n_states(); ++s)
        for (ActionId a = 0; a < mdp.n_actions(); ++a) {
            const auto& outs = mdp.outcomes(s, a);
            if (outs.size() > 1) return true;
            for (const auto& o : outs)
                if (o.reward.size() > 1) return true;
        }
    return false;
}

/// States reachable from the start state with positive probability.
inline std::vector<StateId> reachable_states(const TabularMdp& mdp) {
    std::vector<bool> seen(mdp.n_states(), false);
    std::deque<StateId> queue{mdp.start_state()};
    seen[mdp.start_state()] = true;
    while (!queue.empty()) {
        const StateId s = queue.front();
        queue.pop_front();
        for (ActionId a = 0; a < mdp.n_actions(); ++a)
            for (const auto& o : mdp.outcomes(s, a))
                if (!seen[o.next]) {
                    seen[o.next] = true;
                    queue.push_back(o.next);
                }
    }
    std::vector<StateId> out;
    for (StateId s = 0; s < mdp.n_states(); ++s)
        if (seen[s]) out.push_back(s);
    return out;
}

/// Reachable non-terminal states: the keys learning can actually move.
inline std::vector<StateId> learnable_states(const TabularMdp& mdp) {
    std::vector<StateId> out;
    for (StateId s : reachable_states(mdp))
        if (!mdp.is_terminal(s)) out.push_back(s);
    return out;
}

/// Steps of the greedy(Q*) policy from the start state, following the most
/// likely outcome, until it reaches a terminal state or comes back to the
/// start. Episodic and cyclic domains both get a finite length this way.
inline std::size_t optimal_path_length(const TabularMdp& mdp, const ActionValues& qstar) {
    StateId s = mdp.start_state();
    for (std::size_t steps = 1; steps <= mdp.n_states(); ++steps) {
        const ActionId a = argmax(qstar.row(s));
        const auto& outs = mdp.outcomes(s, a);
        const Outcome* best = &outs.front();
        for (const auto& o : outs)
            if (o.prob > best->prob) best = &o;
        s = best->next;
        if (mdp.is_terminal(s) || s == mdp.start_state()) return steps;
    }
    return mdp.n_states();
}

}  // namespace adfq
