#include "avgdqn/agents.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "avgdqn/errors.hpp"
#include "avgdqn/text.hpp"

namespace avgdqn {

namespace {

// Streams derived from the run seed; learner k of every algorithm draws from the
// same streams, which is what makes K = 1 variants replay DQN exactly.
constexpr std::uint64_t kInitStream = 1000;
constexpr std::uint64_t kSampleStream = 2000;
constexpr std::uint64_t kExploreStream = 3000;

double max_of(std::span<const double> v) { return *std::max_element(v.begin(), v.end()); }

std::vector<double> mean_max_target(std::span<const Transition> batch, std::span<const QApproximator* const> nets,
                                    const FeatureMap& features, double gamma, std::uint64_t* forward_passes) {
    std::vector<double> y(batch.size());
    const double count = static_cast<double>(nets.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto x = features(batch[i].next_state);
        std::vector<double> mean = nets[0]->predict(x);
        for (std::size_t k = 1; k < nets.size(); ++k) {
            const auto q = nets[k]->predict(x);
            for (std::size_t a = 0; a < mean.size(); ++a) mean[a] += q[a];
        }
        for (double& m : mean) m /= count;
        if (forward_passes) *forward_passes += nets.size();
        y[i] = batch[i].reward + (batch[i].done ? 0.0 : gamma * max_of(mean));
    }
    return y;
}

}  // namespace

std::string to_string(Algorithm algo) {
    switch (algo) {
        case Algorithm::dqn: return "dqn";
        case Algorithm::averaged: return "averaged";
        case Algorithm::ensemble: return "ensemble";
    }
    return "?";
}

Algorithm algorithm_from_string(const std::string& name) {
    if (name == "dqn") return Algorithm::dqn;
    if (name == "averaged") return Algorithm::averaged;
    if (name == "ensemble") return Algorithm::ensemble;
    throw std::invalid_argument("unknown algorithm '" + name + "'");
}

double ExplorationSchedule::epsilon(std::size_t step) const {
    if (decay_steps == 0 || step >= decay_steps) return final;
    const double frac = static_cast<double>(step) / static_cast<double>(decay_steps);
    return initial + frac * (final - initial);
}

AgentConfig AgentConfig::normalized() const {
    AgentConfig c = *this;
    if (c.K == 0) throw std::invalid_argument("K must be at least 1");
    if (c.algorithm == Algorithm::dqn) c.K = 1;
    if (!c.full_batch && c.batch_size == 0) throw std::invalid_argument("batch_size must be positive");
    if (c.log_every == 0) throw std::invalid_argument("log_every must be positive");
    for (double e : {c.exploration.initial, c.exploration.final})
        if (!(e >= 0.0 && e <= 1.0)) throw std::invalid_argument("epsilon must lie in [0, 1]");
    if (c.model == ModelKind::mlp) {
        c.optimizer.validate();
        if (c.hidden_units == 0) throw std::invalid_argument("hidden_units must be positive");
    }
    return c;
}

// --- NetworkHistory ---------------------------------------------------------

NetworkHistory::NetworkHistory(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("history capacity must be positive");
}

void NetworkHistory::push(std::shared_ptr<const QApproximator> net) {
    nets_.push_front(std::move(net));
    while (nets_.size() > capacity_) nets_.pop_back();
}

std::vector<const QApproximator*> NetworkHistory::members() const {
    std::vector<const QApproximator*> out;
    for (const auto& n : nets_) out.push_back(n.get());
    return out;
}

// --- QFunction --------------------------------------------------------------

QFunction::QFunction(std::vector<std::shared_ptr<const QApproximator>> members) : members_(std::move(members)) {
    if (members_.empty()) throw std::invalid_argument("QFunction needs at least one network");
}

std::vector<double> QFunction::operator()(std::span<const double> features) const {
    std::vector<double> mean = members_.front()->predict(features);
    for (std::size_t k = 1; k < members_.size(); ++k) {
        const auto q = members_[k]->predict(features);
        for (std::size_t a = 0; a < mean.size(); ++a) mean[a] += q[a];
    }
    const double count = static_cast<double>(members_.size());
    for (double& m : mean) m /= count;
    return mean;
}

std::vector<double> QFunction::table(const FeatureMap& features) const {
    std::vector<double> out;
    for (State s = 0; s < features.dim(); ++s) {
        const auto row = (*this)(features(s));
        out.insert(out.end(), row.begin(), row.end());
    }
    return out;
}

// --- targets ----------------------------------------------------------------

std::vector<double> dqn_target(std::span<const Transition> batch, const QApproximator& target,
                               const FeatureMap& features, double gamma, std::uint64_t* forward_passes) {
    std::vector<double> y(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto q = target.predict(features(batch[i].next_state));
        if (forward_passes) ++*forward_passes;
        y[i] = batch[i].reward + (batch[i].done ? 0.0 : gamma * max_of(q));
    }
    return y;
}

std::vector<double> averaged_target(std::span<const Transition> batch, const NetworkHistory& history,
                                    const FeatureMap& features, double gamma, std::uint64_t* forward_passes) {
    if (history.empty()) throw InvalidOperation("averaged_target with an empty network history");
    const auto nets = history.members();
    return mean_max_target(batch, nets, features, gamma, forward_passes);
}

std::vector<double> ensemble_target(std::span<const Transition> batch,
                                    std::span<const QApproximator* const> ensemble, const FeatureMap& features,
                                    double gamma, std::uint64_t* forward_passes) {
    if (ensemble.empty()) throw std::invalid_argument("ensemble_target needs at least one network");
    return mean_max_target(batch, ensemble, features, gamma, forward_passes);
}

Action epsilon_greedy(std::span<const double> q_values, double epsilon, Rng& rng) {
    if (q_values.empty()) throw std::invalid_argument("epsilon_greedy over no actions");
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("epsilon must lie in [0, 1]");
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    if (u < epsilon) return std::uniform_int_distribution<std::size_t>(0, q_values.size() - 1)(rng);
    return argmax(q_values);
}

double measure_overestimation(std::span<const double> q_table, const ExactQ& oracle, std::span<const State> states) {
    if (q_table.size() != oracle.values.size())
        throw std::invalid_argument("measure_overestimation: table size mismatch");
    if (states.empty()) throw std::invalid_argument("measure_overestimation: empty evaluation set");
    const std::size_t A = oracle.num_actions;
    double acc = 0.0;
    for (State s : states) {
        const double predicted = max_of(q_table.subspan(s * A, A));
        acc += predicted - oracle.state_value(s);
    }
    return acc / static_cast<double>(states.size());
}

double measure_overestimation(const QFunction& q, const FeatureMap& features, const ExactQ& oracle,
                              std::span<const State> states) {
    return measure_overestimation(q.table(features), oracle, states);
}

void write_curve_csv(std::ostream& out, const LearningCurve& curve, std::uint64_t seed, Algorithm algo,
                     std::size_t K) {
    out << "iteration,pred_value,true_value,overestimation,eval_return,seed,algo,K\n";
    for (const auto& r : curve) {
        out << r.iteration << ',' << format_double(r.pred_value) << ',' << format_double(r.true_value) << ','
            << format_double(r.overestimation) << ',' << format_double(r.eval_return) << ',' << seed << ','
            << to_string(algo) << ',' << K << '\n';
    }
}

// --- Agent ------------------------------------------------------------------

Agent::Agent(const AgentConfig& config, std::shared_ptr<const Environment> env, ReplayBuffer buffer,
             std::shared_ptr<const ExactQ> oracle)
    : config_(config.normalized()),
      env_(std::move(env)),
      oracle_(std::move(oracle)),
      features_(env_->mdp.num_states()),
      buffer_(std::move(buffer)),
      history_(config_.algorithm == Algorithm::averaged ? config_.K : 1),
      explore_rng_(make_rng(config_.seed, kExploreStream)),
      env_state_(env_->start),
      started_(std::chrono::steady_clock::now()) {
    if (oracle_ && (oracle_->num_states != env_->mdp.num_states() || oracle_->num_actions != env_->mdp.num_actions()))
        throw std::invalid_argument("Agent: oracle does not match the environment");
    if (buffer_.mode() == ReplayMode::full_coverage && buffer_.empty()) buffer_.fill_exhaustive(env_->mdp);

    const std::size_t n = config_.algorithm == Algorithm::ensemble ? config_.K : 1;
    for (std::size_t k = 0; k < n; ++k) {
        learners_.push_back(make_learner(k));
        sample_rngs_.push_back(make_rng(config_.seed, kSampleStream + k));
    }
    if (config_.algorithm != Algorithm::ensemble) history_.push(learners_[0]->clone());
}

std::unique_ptr<QApproximator> Agent::make_learner(std::size_t index) const {
    Rng init = make_rng(config_.seed, kInitStream + index);
    const auto& mdp = env_->mdp;
    if (config_.model == ModelKind::tabular)
        return std::make_unique<TabularQ>(mdp.num_states(), mdp.num_actions(), config_.tabular_learning_rate,
                                          config_.tabular_init_scale, init);
    MlpArchitecture arch{features_.dim(), config_.hidden_units, mdp.num_actions()};
    return std::make_unique<MlpQ>(arch, config_.optimizer, init);
}

std::vector<double> Agent::targets_for(std::span<const Transition> batch,
                                       std::span<const QApproximator* const> frozen) {
    const double gamma = env_->mdp.gamma();
    switch (config_.algorithm) {
        case Algorithm::dqn: return dqn_target(batch, *frozen[0], features_, gamma, &target_forward_passes_);
        case Algorithm::averaged: return averaged_target(batch, history_, features_, gamma, &target_forward_passes_);
        case Algorithm::ensemble: return ensemble_target(batch, frozen, features_, gamma, &target_forward_passes_);
    }
    return {};
}

std::optional<CurveRecord> Agent::run_iteration() {
    // Targets for this iteration only ever see these frozen copies.
    std::vector<std::unique_ptr<QApproximator>> frozen_members;
    std::vector<const QApproximator*> frozen;
    if (config_.algorithm == Algorithm::ensemble) {
        for (const auto& l : learners_) frozen_members.push_back(l->clone());
        for (const auto& f : frozen_members) frozen.push_back(f.get());
    } else {
        frozen = history_.members();
    }

    // The full-coverage buffer never changes, so its targets are built once.
    std::vector<double> precomputed;
    if (buffer_.mode() == ReplayMode::full_coverage) precomputed = targets_for(buffer_.contents(), frozen);

    std::vector<std::size_t> all_indices;
    if (config_.full_batch) {
        all_indices.resize(buffer_.size());
        std::iota(all_indices.begin(), all_indices.end(), std::size_t{0});
    }

    std::vector<Transition> batch;
    std::vector<FitSample> samples;
    for (std::size_t k = 0; k < learners_.size(); ++k) {
        for (std::size_t mb = 0; mb < config_.minibatches_per_iteration; ++mb) {
            const auto indices =
                config_.full_batch ? all_indices : buffer_.sample_indices(config_.batch_size, sample_rngs_[k]);
            batch.clear();
            for (std::size_t i : indices) batch.push_back(buffer_.at(i));
            std::vector<double> targets;
            if (precomputed.empty()) {
                targets = targets_for(batch, frozen);
            } else {
                targets.reserve(indices.size());
                for (std::size_t i : indices) targets.push_back(precomputed[i]);
            }
            samples.clear();
            for (std::size_t j = 0; j < batch.size(); ++j)
                samples.push_back({features_(batch[j].state), batch[j].action, targets[j]});
            learners_[k]->fit_minibatch(samples);
        }
    }

    ++iteration_;
    if (config_.algorithm != Algorithm::ensemble) history_.push(learners_[0]->clone());
    if (config_.exploration.steps_per_iteration > 0) explore(config_.exploration.steps_per_iteration);

    if (oracle_ && iteration_ % config_.log_every == 0) return evaluate();
    return std::nullopt;
}

LearningCurve Agent::train() {
    LearningCurve curve;
    if (oracle_ && iteration_ == 0) curve.push_back(evaluate());
    while (iteration_ < config_.num_iterations)
        if (auto rec = run_iteration()) curve.push_back(*rec);
    return curve;
}

QFunction Agent::output_q() const {
    std::vector<std::shared_ptr<const QApproximator>> members;
    if (config_.algorithm == Algorithm::ensemble) {
        for (const auto& l : learners_) members.push_back(l->clone());
    } else if (config_.algorithm == Algorithm::averaged) {
        members.assign(history_.shared_members().begin(), history_.shared_members().end());
    } else {
        members.push_back(history_.shared_members().front());
    }
    return QFunction(std::move(members));
}

CurveRecord Agent::evaluate() const {
    if (!oracle_) throw InvalidOperation("evaluate needs an oracle");
    const auto& mdp = env_->mdp;
    const auto table = output_q().table(features_);

    std::vector<State> states;
    if (config_.eval_states == EvalStates::start) {
        states.push_back(env_->start);
    } else {
        states.resize(mdp.num_states());
        std::iota(states.begin(), states.end(), State{0});
    }

    CurveRecord rec;
    rec.iteration = iteration_;
    const std::size_t A = mdp.num_actions();
    for (State s : states) {
        rec.pred_value += max_of(std::span<const double>(table).subspan(s * A, A));
        rec.true_value += oracle_->state_value(s);
    }
    rec.pred_value /= static_cast<double>(states.size());
    rec.true_value /= static_cast<double>(states.size());
    rec.overestimation = measure_overestimation(table, *oracle_, states);

    std::vector<Action> policy(mdp.num_states());
    for (State s = 0; s < mdp.num_states(); ++s) policy[s] = argmax(std::span<const double>(table).subspan(s * A, A));
    rec.eval_return = rollout_return(mdp, policy, env_->start, env_->rollout_cap);
    rec.wall_clock = std::chrono::duration<double>(std::chrono::steady_clock::now() - started_).count();
    return rec;
}

void Agent::explore(std::size_t steps) {
    if (buffer_.mode() != ReplayMode::fifo) return;
    const auto& mdp = env_->mdp;
    for (std::size_t t = 0; t < steps; ++t) {
        const auto x = features_(env_state_);
        std::vector<double> q;
        if (config_.algorithm == Algorithm::ensemble) {
            q = learners_[0]->predict(x);
            for (std::size_t k = 1; k < learners_.size(); ++k) {
                const auto qk = learners_[k]->predict(x);
                for (std::size_t a = 0; a < q.size(); ++a) q[a] += qk[a];
            }
            for (double& v : q) v /= static_cast<double>(learners_.size());
        } else {
            q = QFunction(std::vector<std::shared_ptr<const QApproximator>>(history_.shared_members().begin(),
                                                                            history_.shared_members().end()))(x);
        }
        const Action a = epsilon_greedy(q, config_.exploration.epsilon(env_steps_), explore_rng_);
        const Step step = sample_transition(mdp, env_state_, a, explore_rng_);
        buffer_.push({env_state_, a, step.reward, step.next, step.done});
        env_state_ = step.done ? env_->start : step.next;
        ++env_steps_;
    }
}

std::vector<ParameterSet> Agent::learner_parameters() const {
    std::vector<ParameterSet> out;
    for (const auto& l : learners_) out.push_back(l->snapshot());
    return out;
}

std::uint64_t Agent::gradient_updates() const {
    std::uint64_t n = 0;
    for (const auto& l : learners_) n += l->update_count();
    return n;
}

}  // namespace avgdqn
