#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "avgdqn/mdp.hpp"
#include "avgdqn/random.hpp"

namespace avgdqn {

enum class ModelKind { tabular, mlp };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& name);

/// Flat parameter vector plus the shape it was built for.
///
/// mlp:     shape = {input, hidden, output}; values = [w1 | b1 | w2 | b2] where
///          w1 is input-major (w1[j * hidden + h] connects input j to hidden h)
///          and w2 is output-major (w2[o * hidden + h]).
/// tabular: shape = {states, actions}; values[s * actions + a].
struct ParameterSet {
    ModelKind kind = ModelKind::mlp;
    std::vector<std::size_t> shape;
    std::vector<double> values;

    bool operator==(const ParameterSet&) const = default;

    /// Throws std::invalid_argument if the length disagrees with the shape or any entry is non-finite.
    void validate() const;
};

struct MlpArchitecture {
    std::size_t input_dim = 0;
    std::size_t hidden_units = 80;
    std::size_t output_dim = 0;

    std::size_t parameter_count() const {
        return input_dim * hidden_units + hidden_units + output_dim * hidden_units + output_dim;
    }
    static MlpArchitecture from(const ParameterSet& params);
};

enum class OptimizerKind { adam, sgd };

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::adam;
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void validate() const;
};

/// Weights and biases drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
ParameterSet mlp_init(const MlpArchitecture& arch, Rng& rng);

/// W2 relu(W1 x + b1) + b2.
std::vector<double> mlp_forward(const ParameterSet& params, std::span<const double> features);

/// Gradient of 0.5 * (target - Q(x, action))^2 with respect to every parameter.
ParameterSet mlp_backward(const ParameterSet& params, std::span<const double> features, Action action,
                          double target);

struct AdamState {
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    std::uint64_t step = 0;

    AdamState() = default;
    explicit AdamState(std::size_t n) : first_moment(n, 0.0), second_moment(n, 0.0) {}
};

/// Bias-corrected ADAM update in place.
void adam_step(std::span<double> params, std::span<const double> gradient, AdamState& state,
               const OptimizerConfig& config);

void sgd_step(std::span<double> params, std::span<const double> gradient, const OptimizerConfig& config);

struct TabularSample {
    State state;
    Action action;
    double target;
};

/// Moves each addressed entry a fraction `learning_rate` of the way to its target,
/// applying samples in order.
void tabular_fit(ParameterSet& table, std::span<const TabularSample> batch, double learning_rate);

struct FitSample {
    std::span<const double> features;
    Action action;
    double target;
};

/// Q-function contract shared by every agent.
///
/// An instance has a single writer. Const members never mutate state, so frozen
/// copies can be read from several threads.
class QApproximator {
public:
    virtual ~QApproximator() = default;

    virtual std::size_t num_actions() const = 0;
    virtual std::vector<double> predict(std::span<const double> features) const = 0;
    /// One optimizer step on the mean of 0.5 * (target - Q)^2; returns that loss
    /// measured before the step.
    virtual double fit_minibatch(std::span<const FitSample> batch) = 0;
    virtual ParameterSet snapshot() const = 0;
    virtual void load(const ParameterSet& params) = 0;
    virtual std::unique_ptr<QApproximator> clone() const = 0;

    /// Number of fit_minibatch calls applied so far.
    std::uint64_t update_count() const { return updates_; }

protected:
    std::uint64_t updates_ = 0;
};

class TabularQ final : public QApproximator {
public:
    TabularQ(std::size_t num_states, std::size_t num_actions, double learning_rate);
    /// Entries drawn from U(-init_scale, init_scale).
    TabularQ(std::size_t num_states, std::size_t num_actions, double learning_rate, double init_scale, Rng& rng);

    std::size_t num_actions() const override { return table_.shape[1]; }
    std::vector<double> predict(std::span<const double> features) const override;
    double fit_minibatch(std::span<const FitSample> batch) override;
    ParameterSet snapshot() const override { return table_; }
    void load(const ParameterSet& params) override;
    std::unique_ptr<QApproximator> clone() const override { return std::make_unique<TabularQ>(*this); }

private:
    State state_of(std::span<const double> features) const;

    ParameterSet table_;
    double learning_rate_;
};

class MlpQ final : public QApproximator {
public:
    MlpQ(const MlpArchitecture& arch, const OptimizerConfig& optimizer, Rng& init_rng);

    std::size_t num_actions() const override { return arch_.output_dim; }
    std::vector<double> predict(std::span<const double> features) const override;
    double fit_minibatch(std::span<const FitSample> batch) override;
    ParameterSet snapshot() const override { return params_; }
    void load(const ParameterSet& params) override;
    std::unique_ptr<QApproximator> clone() const override { return std::make_unique<MlpQ>(*this); }

    const OptimizerConfig& optimizer() const { return optimizer_; }

private:
    MlpArchitecture arch_;
    OptimizerConfig optimizer_;
    ParameterSet params_;
    AdamState adam_;
    std::vector<double> gradient_;
    std::vector<double> hidden_;
};

/// Text checkpoint:
///
///     # avgdqn-params v1
///     kind <mlp|tabular>
///     shape <d0> <d1> ...
///     count <n>
///     <n values, one per line, 17 significant digits>
void write_parameters(std::ostream& out, const ParameterSet& params);
ParameterSet read_parameters(std::istream& in);

}  // namespace avgdqn
