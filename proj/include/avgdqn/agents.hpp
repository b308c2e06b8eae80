#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "avgdqn/approximator.hpp"
#include "avgdqn/mdp.hpp"
#include "avgdqn/replay.hpp"
#include "avgdqn/value_oracle.hpp"

namespace avgdqn {

enum class Algorithm { dqn, averaged, ensemble };

std::string to_string(Algorithm algo);
Algorithm algorithm_from_string(const std::string& name);

/// Linear epsilon decay from `initial` to `final` over `decay_steps` environment steps.
struct ExplorationSchedule {
    double initial = 1.0;
    double final = 0.1;
    std::size_t decay_steps = 1000;
    /// Environment steps per iteration; 0 disables exploration.
    std::size_t steps_per_iteration = 0;

    double epsilon(std::size_t step) const;
};

enum class EvalStates { all, start };

struct AgentConfig {
    Algorithm algorithm = Algorithm::dqn;
    /// Averaged: networks in the target average. Ensemble: networks trained. Forced to 1 for dqn.
    std::size_t K = 1;
    std::size_t num_iterations = 1000;
    std::size_t minibatches_per_iteration = 100;
    std::size_t batch_size = 32;
    /// Each minibatch is the whole buffer in order instead of a uniform sample.
    bool full_batch = false;
    ExplorationSchedule exploration{};
    OptimizerConfig optimizer{};
    ModelKind model = ModelKind::mlp;
    std::size_t hidden_units = 80;
    double tabular_learning_rate = 1.0;
    double tabular_init_scale = 0.0;
    std::uint64_t seed = 0;
    std::size_t log_every = 1;
    EvalStates eval_states = EvalStates::all;

    /// Checks ranges and applies the dqn => K = 1 rule.
    AgentConfig normalized() const;
};

/// The last K frozen networks, newest first.
class NetworkHistory {
public:
    explicit NetworkHistory(std::size_t capacity);

    void push(std::shared_ptr<const QApproximator> net);
    std::size_t size() const { return nets_.size(); }
    std::size_t capacity() const { return capacity_; }
    bool empty() const { return nets_.empty(); }
    const QApproximator& at(std::size_t i) const { return *nets_.at(i); }
    std::vector<const QApproximator*> members() const;
    const std::deque<std::shared_ptr<const QApproximator>>& shared_members() const { return nets_; }

private:
    std::size_t capacity_;
    std::deque<std::shared_ptr<const QApproximator>> nets_;
};

/// Per-action mean over a set of networks. This is what the averaged and
/// ensemble algorithms output, and what their targets maximize over.
class QFunction {
public:
    QFunction() = default;
    explicit QFunction(std::vector<std::shared_ptr<const QApproximator>> members);

    std::vector<double> operator()(std::span<const double> features) const;
    std::size_t size() const { return members_.size(); }

    /// Dense (num_states x num_actions) table of this function.
    std::vector<double> table(const FeatureMap& features) const;

private:
    std::vector<std::shared_ptr<const QApproximator>> members_;
};

/// y = r + gamma * max_a' Q(s', a'; target), bootstrap masked when done.
std::vector<double> dqn_target(std::span<const Transition> batch, const QApproximator& target,
                               const FeatureMap& features, double gamma, std::uint64_t* forward_passes = nullptr);

/// y = r + gamma * max_a' mean_k Q(s', a'; theta_{i-k}); the mean is taken per
/// action before the max. Throws InvalidOperation on an empty history.
std::vector<double> averaged_target(std::span<const Transition> batch, const NetworkHistory& history,
                                    const FeatureMap& features, double gamma,
                                    std::uint64_t* forward_passes = nullptr);

/// Same shape as averaged_target over the K current ensemble members.
std::vector<double> ensemble_target(std::span<const Transition> batch,
                                    std::span<const QApproximator* const> ensemble, const FeatureMap& features,
                                    double gamma, std::uint64_t* forward_passes = nullptr);

/// With probability epsilon a uniform action, otherwise the lowest-index argmax.
Action epsilon_greedy(std::span<const double> q_values, double epsilon, Rng& rng);

/// Mean over `states` of max_a q(s, a) - max_a Q*(s, a), with q given as a dense table.
double measure_overestimation(std::span<const double> q_table, const ExactQ& oracle,
                              std::span<const State> states);
double measure_overestimation(const QFunction& q, const FeatureMap& features, const ExactQ& oracle,
                              std::span<const State> states);

struct CurveRecord {
    std::size_t iteration = 0;
    double pred_value = 0.0;
    double true_value = 0.0;
    double overestimation = 0.0;
    double eval_return = 0.0;
    double wall_clock = 0.0;
};

using LearningCurve = std::vector<CurveRecord>;

/// Columns: iteration,pred_value,true_value,overestimation,eval_return,seed,algo,K
void write_curve_csv(std::ostream& out, const LearningCurve& curve, std::uint64_t seed, Algorithm algo,
                     std::size_t K);

/// One training run of DQN, Averaged-DQN or Ensemble-DQN.
///
/// Each iteration freezes the target network(s), fits the learner(s) for
/// `minibatches_per_iteration` optimizer steps against targets built from the
/// frozen copies, rotates the history and then explores (fifo buffers only).
class Agent {
public:
    Agent(const AgentConfig& config, std::shared_ptr<const Environment> env, ReplayBuffer buffer,
          std::shared_ptr<const ExactQ> oracle = nullptr);

    const AgentConfig& config() const { return config_; }
    std::size_t iteration() const { return iteration_; }
    const ReplayBuffer& buffer() const { return buffer_; }
    const NetworkHistory& history() const { return history_; }

    /// Advances one iteration. Returns a curve record when an oracle is attached
    /// and the new iteration index is a multiple of log_every.
    std::optional<CurveRecord> run_iteration();

    /// Runs the remaining iterations; the curve includes iteration 0 (before training).
    LearningCurve train();

    /// Record for the current state of the agent; needs an oracle.
    CurveRecord evaluate() const;

    /// dqn: latest network; averaged: mean of the last K networks; ensemble: mean of the K members.
    QFunction output_q() const;

    /// Takes `steps` epsilon-greedy environment steps into a fifo buffer.
    void explore(std::size_t steps);

    /// Current parameters of the learner(s) being fitted.
    std::vector<ParameterSet> learner_parameters() const;

    std::uint64_t gradient_updates() const;
    std::uint64_t target_forward_passes() const { return target_forward_passes_; }

private:
    std::unique_ptr<QApproximator> make_learner(std::size_t index) const;
    std::vector<double> targets_for(std::span<const Transition> batch,
                                    std::span<const QApproximator* const> frozen);

    AgentConfig config_;
    std::shared_ptr<const Environment> env_;
    std::shared_ptr<const ExactQ> oracle_;
    FeatureMap features_;
    ReplayBuffer buffer_;
    std::vector<std::unique_ptr<QApproximator>> learners_;
    NetworkHistory history_;
    std::vector<Rng> sample_rngs_;
    Rng explore_rng_;
    std::size_t iteration_ = 0;
    std::size_t env_steps_ = 0;
    State env_state_ = 0;
    std::uint64_t target_forward_passes_ = 0;
    std::chrono::steady_clock::time_point started_;
};

}  // namespace avgdqn
