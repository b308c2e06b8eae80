#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "avgdqn/random.hpp"

namespace avgdqn {

using State = std::size_t;
using Action = std::size_t;

/// Finite MDP with dense transition and reward tables.
///
/// Probabilities and rewards are stored per (s, a, s') in row-major order, so
/// the transition row of (s, a) is a contiguous span of num_states() entries.
/// Instances are immutable once built and may be shared between runs.
class MdpSpec {
public:
    /// Validates the tables; throws std::invalid_argument on any violated invariant
    /// (row sums, terminal self-loops, gamma range, finiteness).
    MdpSpec(std::size_t num_states, std::size_t num_actions, std::vector<double> transition,
            std::vector<double> reward, double gamma, std::vector<State> terminal);

    std::size_t num_states() const { return num_states_; }
    std::size_t num_actions() const { return num_actions_; }
    double gamma() const { return gamma_; }

    std::span<const double> transition_row(State s, Action a) const;
    std::span<const double> reward_row(State s, Action a) const;
    double probability(State s, Action a, State next) const;
    double reward(State s, Action a, State next) const;

    bool is_terminal(State s) const { return terminal_mask_.at(s); }
    const std::vector<State>& terminal_states() const { return terminal_; }

    /// Successor of (s, a) when the row is a point mass, nullopt otherwise.
    std::optional<State> deterministic_successor(State s, Action a) const;
    bool is_deterministic() const;
    double max_abs_reward() const;

private:
    std::size_t index(State s, Action a, State next) const {
        return (s * num_actions_ + a) * num_states_ + next;
    }
    void check(State s, Action a) const;

    std::size_t num_states_;
    std::size_t num_actions_;
    std::vector<double> transition_;
    std::vector<double> reward_;
    double gamma_;
    std::vector<State> terminal_;
    std::vector<bool> terminal_mask_;
};

/// 1-based grid geometry. Cell (x, y) maps to state (y-1)*width + (x-1).
struct GridworldSpec {
    std::size_t width = 20;
    std::size_t height = 20;
    std::size_t goal_x = 20;
    std::size_t goal_y = 20;
    double goal_reward = 1.0;
    double step_reward = 0.0;
    double gamma = 0.9;

    State state_of(std::size_t x, std::size_t y) const { return (y - 1) * width + (x - 1); }
    std::size_t x_of(State s) const { return s % width + 1; }
    std::size_t y_of(State s) const { return s / width + 1; }
};

/// Compass actions of the gridworld, in tie-break order.
enum GridAction : Action { kNorth = 0, kEast = 1, kSouth = 2, kWest = 3 };

/// M-state chain: every action moves s_m to s_{m+1}; s_{M-1} is terminal, rewards are zero.
MdpSpec make_unidirectional_chain(std::size_t length, double gamma, std::size_t num_actions = 1);

/// Deterministic compass gridworld. Off-grid moves stay put; the goal is terminal and
/// goal_reward is paid on the transition that enters it.
MdpSpec make_gridworld(const GridworldSpec& spec);

struct Step {
    State next;
    double reward;
    bool done;
};

Step sample_transition(const MdpSpec& mdp, State s, Action a, Rng& rng);

/// One-hot encoding of states: row s has a single 1 at column s.
class FeatureMap {
public:
    explicit FeatureMap(std::size_t num_states);

    std::size_t dim() const { return dim_; }
    std::span<const double> operator()(State s) const;

private:
    std::size_t dim_;
    std::vector<double> table_;
};

/// An MDP plus what an agent needs to interact with it episodically.
struct Environment {
    MdpSpec mdp;
    State start = 0;
    /// Step cap for greedy evaluation rollouts.
    std::size_t rollout_cap = 0;
    std::optional<GridworldSpec> grid;
};

Environment gridworld_environment(const GridworldSpec& spec);
Environment chain_environment(std::size_t length, double gamma, std::size_t num_actions = 1);

/// Plain-text matrix dump. Layout:
///
///     # avgdqn-mdp v1
///     states <S> actions <A> gamma <g>
///     terminal <t...>
///     <s> <a> p <S probabilities> r <S rewards>      (one line per (s, a))
void write_mdp_text(std::ostream& out, const MdpSpec& mdp);
MdpSpec read_mdp_text(std::istream& in);

}  // namespace avgdqn
