#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace adfq {

/// Dense (state, action) -> value table, row-major.
struct ActionValues {
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    std::vector<double> values;

    ActionValues() = default;
    ActionValues(std::size_t ns, std::size_t na, double init = 0.0) : n_states(ns), n_actions(na), values(ns * na, init) {}

    double& operator()(std::size_t s, std::size_t a) { return values[s * n_actions + a]; }
    double operator()(std::size_t s, std::size_t a) const { return values[s * n_actions + a]; }

    std::span<const double> row(std::size_t s) const { return {values.data() + s * n_actions, n_actions}; }

    double max_value(std::size_t s) const {
        double best = (*this)(s, 0);
        for (std::size_t a = 1; a < n_actions; ++a) best = std::max(best, (*this)(s, a));
        return best;
    }
};

/// Index of the largest entry; lowest index wins ties.
inline std::size_t argmax(std::span<const double> xs) {
    if (xs.empty()) throw std::domain_error("argmax: empty input");
    std::size_t best = 0;
    for (std::size_t i = 1; i < xs.size(); ++i)
        if (xs[i] > xs[best]) best = i;
    return best;
}

/// Root mean square difference over the listed (state, action) keys, or over
/// every key when `states` is empty.
inline double rmse(const ActionValues& estimates, const ActionValues& reference, std::span<const std::size_t> states = {}) {
    if (estimates.n_states != reference.n_states || estimates.n_actions != reference.n_actions ||
        estimates.values.size() != reference.values.size())
        throw std::domain_error("rmse: key sets differ");
    double sum = 0.0;
    std::size_t count = 0;
    auto add_state = [&](std::size_t s) {
        if (s >= reference.n_states) throw std::domain_error("rmse: state outside table");
        for (std::size_t a = 0; a < reference.n_actions; ++a) {
            const double d = estimates(s, a) - reference(s, a);
            sum += d * d;
            ++count;
        }
    };
    if (states.empty()) {
        for (std::size_t s = 0; s < reference.n_states; ++s) add_state(s);
    } else {
        for (std::size_t s : states) add_state(s);
    }
    if (count == 0) throw std::domain_error("rmse: no keys");
    return std::sqrt(sum / static_cast<double>(count));
}

}  // namespace adfq
