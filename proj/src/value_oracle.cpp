#include "avgdqn/value_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "avgdqn/errors.hpp"

namespace avgdqn {

namespace {

struct Edge {
    State next;
    double probability;
    double reward;
};

// Sparse successor lists; the dense tables are mostly zeros.
struct SparseModel {
    std::vector<std::vector<Edge>> edges;  // indexed by s * A + a

    explicit SparseModel(const MdpSpec& mdp) : edges(mdp.num_states() * mdp.num_actions()) {
        for (State s = 0; s < mdp.num_states(); ++s) {
            for (Action a = 0; a < mdp.num_actions(); ++a) {
                auto p = mdp.transition_row(s, a);
                auto r = mdp.reward_row(s, a);
                for (State j = 0; j < p.size(); ++j)
                    if (p[j] > 0.0) edges[s * mdp.num_actions() + a].push_back({j, p[j], r[j]});
            }
        }
    }
};

void backup(const MdpSpec& mdp, const SparseModel& model, std::span<const double> q, std::span<double> out) {
    const std::size_t A = mdp.num_actions();
    std::vector<double> v(mdp.num_states());
    for (State s = 0; s < mdp.num_states(); ++s)
        v[s] = mdp.is_terminal(s) ? 0.0 : *std::max_element(q.begin() + s * A, q.begin() + (s + 1) * A);

    for (State s = 0; s < mdp.num_states(); ++s) {
        for (Action a = 0; a < A; ++a) {
            if (mdp.is_terminal(s)) {
                out[s * A + a] = 0.0;
                continue;
            }
            double acc = 0.0;
            for (const Edge& e : model.edges[s * A + a])
                acc += e.probability * (e.reward + mdp.gamma() * (mdp.is_terminal(e.next) ? 0.0 : v[e.next]));
            out[s * A + a] = acc;
        }
    }
}

double sup_distance(std::span<const double> a, std::span<const double> b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

}  // namespace

double ExactQ::state_value(State s) const {
    auto r = row(s);
    return *std::max_element(r.begin(), r.end());
}

std::size_t argmax(std::span<const double> values) {
    if (values.empty()) throw std::invalid_argument("argmax of an empty range");
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] > values[best]) best = i;
    return best;
}

double bellman_residual(const MdpSpec& mdp, std::span<const double> q) {
    if (q.size() != mdp.num_states() * mdp.num_actions())
        throw std::invalid_argument("bellman_residual: table size mismatch");
    SparseModel model(mdp);
    std::vector<double> next(q.size());
    backup(mdp, model, q, next);
    return sup_distance(q, next);
}

ExactQ value_iteration(const MdpSpec& mdp, double tol) {
    if (!(tol > 0.0)) throw std::invalid_argument("value_iteration: tol must be positive");
    if (!std::isfinite(mdp.max_abs_reward()))
        throw std::invalid_argument("value_iteration: non-finite rewards");

    SparseModel model(mdp);
    ExactQ result{mdp.num_states(), mdp.num_actions(), std::vector<double>(mdp.num_states() * mdp.num_actions(), 0.0)};
    std::vector<double> next(result.values.size());
    while (true) {
        backup(mdp, model, result.values, next);
        result.residual = sup_distance(result.values, next);
        if (result.residual <= tol) return result;
        result.values.swap(next);
        ++result.sweeps;
    }
}

std::vector<Action> greedy_policy(const ExactQ& q) {
    std::vector<Action> policy(q.num_states);
    for (State s = 0; s < q.num_states; ++s) policy[s] = argmax(q.row(s));
    return policy;
}

double rollout_return(const MdpSpec& mdp, std::span<const Action> policy, State start, std::size_t max_steps) {
    if (policy.size() != mdp.num_states()) throw std::invalid_argument("rollout_return: policy size mismatch");
    double ret = 0.0;
    double discount = 1.0;
    State s = start;
    for (std::size_t t = 0; t < max_steps && !mdp.is_terminal(s); ++t) {
        auto next = mdp.deterministic_successor(s, policy[s]);
        if (!next) throw Unsupported("rollout_return: stochastic transition");
        ret += discount * mdp.reward(s, policy[s], *next);
        discount *= mdp.gamma();
        s = *next;
    }
    return ret;
}

}  // namespace avgdqn
