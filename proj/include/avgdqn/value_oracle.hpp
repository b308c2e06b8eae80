#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "avgdqn/mdp.hpp"

namespace avgdqn {

/// Dense Q* table (row-major, num_states x num_actions) with the Bellman
/// sup-norm residual it was accepted at.
struct ExactQ {
    std::size_t num_states = 0;
    std::size_t num_actions = 0;
    std::vector<double> values;
    double residual = 0.0;
    std::size_t sweeps = 0;

    double operator()(State s, Action a) const { return values[s * num_actions + a]; }
    std::span<const double> row(State s) const { return {values.data() + s * num_actions, num_actions}; }
    double state_value(State s) const;
};

/// Sup-norm of T(q) - q for the Bellman optimality operator T.
double bellman_residual(const MdpSpec& mdp, std::span<const double> q);

/// Iterates the Bellman optimality backup from Q = 0 until the residual of the
/// current table is at most `tol`. Terminal states bootstrap with zero.
ExactQ value_iteration(const MdpSpec& mdp, double tol);

/// Argmax action per state; ties go to the lowest action index.
std::vector<Action> greedy_policy(const ExactQ& q);

/// Discounted return of following `policy` from `start` for at most `max_steps`
/// steps (or until a terminal state). The MDP must be deterministic.
double rollout_return(const MdpSpec& mdp, std::span<const Action> policy, State start, std::size_t max_steps);

/// Lowest-index argmax.
std::size_t argmax(std::span<const double> values);

}  // namespace avgdqn
