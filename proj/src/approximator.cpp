#include "avgdqn/approximator.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "avgdqn/text.hpp"

namespace avgdqn {

namespace {

// Views into an mlp ParameterSet, following the layout documented in the header.
template <typename T>
struct MlpLayout {
    std::span<T> w1, b1, w2, b2;

    MlpLayout(std::span<T> v, const MlpArchitecture& arch) {
        const std::size_t n1 = arch.input_dim * arch.hidden_units;
        const std::size_t n2 = arch.output_dim * arch.hidden_units;
        w1 = v.subspan(0, n1);
        b1 = v.subspan(n1, arch.hidden_units);
        w2 = v.subspan(n1 + arch.hidden_units, n2);
        b2 = v.subspan(n1 + arch.hidden_units + n2, arch.output_dim);
    }
};

void check_features(const MlpArchitecture& arch, std::span<const double> features) {
    if (features.size() != arch.input_dim)
        throw std::invalid_argument("mlp: feature length " + std::to_string(features.size()) +
                                    " does not match input_dim " + std::to_string(arch.input_dim));
}

// Hidden activations (post-ReLU) into `hidden`, outputs into `out`. Zero inputs
// are skipped so one-hot features cost one column.
void forward_into(const MlpArchitecture& arch, std::span<const double> values, std::span<const double> x,
                  std::span<double> hidden, std::span<double> out) {
    MlpLayout<const double> p(values, arch);
    const std::size_t H = arch.hidden_units;
    std::copy(p.b1.begin(), p.b1.end(), hidden.begin());
    for (std::size_t j = 0; j < arch.input_dim; ++j) {
        const double xj = x[j];
        if (xj == 0.0) continue;
        const double* col = p.w1.data() + j * H;
        for (std::size_t h = 0; h < H; ++h) hidden[h] += xj * col[h];
    }
    for (std::size_t h = 0; h < H; ++h) hidden[h] = std::max(hidden[h], 0.0);
    for (std::size_t o = 0; o < arch.output_dim; ++o) {
        const double* row = p.w2.data() + o * H;
        double acc = p.b2[o];
        for (std::size_t h = 0; h < H; ++h) acc += row[h] * hidden[h];
        out[o] = acc;
    }
}

// Adds scale * d(0.5 (Q_a - target)^2)/d(theta) into `grad`, given the residual
// Q_a - target and the hidden activations of the same forward pass.
void accumulate_gradient(const MlpArchitecture& arch, std::span<const double> values, std::span<const double> x,
                         std::span<const double> hidden, Action action, double residual, std::span<double> grad) {
    MlpLayout<const double> p(values, arch);
    MlpLayout<double> g(grad, arch);
    const std::size_t H = arch.hidden_units;

    g.b2[action] += residual;
    double* gw2 = g.w2.data() + action * H;
    const double* w2 = p.w2.data() + action * H;
    for (std::size_t h = 0; h < H; ++h) {
        gw2[h] += residual * hidden[h];
        // ReLU derivative taken as 0 at the kink; hidden[h] > 0 iff pre-activation > 0.
        if (hidden[h] > 0.0) g.b1[h] += residual * w2[h];
    }
    for (std::size_t j = 0; j < arch.input_dim; ++j) {
        const double xj = x[j];
        if (xj == 0.0) continue;
        double* col = g.w1.data() + j * H;
        for (std::size_t h = 0; h < H; ++h)
            if (hidden[h] > 0.0) col[h] += xj * residual * w2[h];
    }
}

}  // namespace

std::string to_string(ModelKind kind) { return kind == ModelKind::mlp ? "mlp" : "tabular"; }

ModelKind model_kind_from_string(const std::string& name) {
    if (name == "mlp") return ModelKind::mlp;
    if (name == "tabular") return ModelKind::tabular;
    throw std::invalid_argument("unknown model kind '" + name + "'");
}

void ParameterSet::validate() const {
    std::size_t expected = 0;
    if (kind == ModelKind::mlp) {
        if (shape.size() != 3) throw std::invalid_argument("mlp parameters need a 3-entry shape");
        expected = MlpArchitecture{shape[0], shape[1], shape[2]}.parameter_count();
    } else {
        if (shape.size() != 2) throw std::invalid_argument("tabular parameters need a 2-entry shape");
        expected = shape[0] * shape[1];
    }
    if (values.size() != expected)
        throw std::invalid_argument("parameter count " + std::to_string(values.size()) + " does not match shape (" +
                                    std::to_string(expected) + ")");
    for (double v : values)
        if (!std::isfinite(v)) throw std::invalid_argument("parameters contain a non-finite entry");
}

MlpArchitecture MlpArchitecture::from(const ParameterSet& params) {
    if (params.kind != ModelKind::mlp || params.shape.size() != 3)
        throw std::invalid_argument("not an mlp parameter set");
    MlpArchitecture arch{params.shape[0], params.shape[1], params.shape[2]};
    if (params.values.size() != arch.parameter_count())
        throw std::invalid_argument("mlp parameter count does not match its shape");
    return arch;
}

void OptimizerConfig::validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
        throw std::invalid_argument("learning_rate must be positive");
    if (kind == OptimizerKind::adam) {
        if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0))
            throw std::invalid_argument("adam betas must lie in (0, 1)");
        if (!(epsilon > 0.0)) throw std::invalid_argument("adam epsilon must be positive");
    }
}

ParameterSet mlp_init(const MlpArchitecture& arch, Rng& rng) {
    if (arch.input_dim == 0 || arch.hidden_units == 0 || arch.output_dim == 0)
        throw std::invalid_argument("mlp dimensions must be positive");
    ParameterSet params{ModelKind::mlp, {arch.input_dim, arch.hidden_units, arch.output_dim},
                        std::vector<double>(arch.parameter_count())};
    MlpLayout<double> p(params.values, arch);
    auto fill = [&rng](std::span<double> dst, std::size_t fan_in) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (double& v : dst) v = dist(rng);
    };
    fill(p.w1, arch.input_dim);
    fill(p.b1, arch.input_dim);
    fill(p.w2, arch.hidden_units);
    fill(p.b2, arch.hidden_units);
    return params;
}

std::vector<double> mlp_forward(const ParameterSet& params, std::span<const double> features) {
    const auto arch = MlpArchitecture::from(params);
    check_features(arch, features);
    std::vector<double> hidden(arch.hidden_units), out(arch.output_dim);
    forward_into(arch, params.values, features, hidden, out);
    return out;
}

ParameterSet mlp_backward(const ParameterSet& params, std::span<const double> features, Action action,
                          double target) {
    const auto arch = MlpArchitecture::from(params);
    check_features(arch, features);
    if (!std::isfinite(target)) throw std::invalid_argument("mlp_backward: non-finite target");
    if (action >= arch.output_dim) throw std::invalid_argument("mlp_backward: action out of range");
    std::vector<double> hidden(arch.hidden_units), out(arch.output_dim);
    forward_into(arch, params.values, features, hidden, out);
    ParameterSet grad{ModelKind::mlp, params.shape, std::vector<double>(params.values.size(), 0.0)};
    accumulate_gradient(arch, params.values, features, hidden, action, out[action] - target, grad.values);
    return grad;
}

constexpr double kMomentFloor = 1e-300;

void adam_step(std::span<double> params, std::span<const double> gradient, AdamState& state,
               const OptimizerConfig& config) {
    if (gradient.size() != params.size() || state.first_moment.size() != params.size() ||
        state.second_moment.size() != params.size())
        throw std::invalid_argument("adam_step: state shape does not match parameters");
    ++state.step;
    const double b1 = config.beta1, b2 = config.beta2;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(b1, t);
    const double c2 = 1.0 - std::pow(b2, t);
    // Bias corrections folded into the step size and epsilon:
    // lr * (m / c1) / (sqrt(v / c2) + eps) == (lr sqrt(c2) / c1) * m / (sqrt(v) + eps sqrt(c2)).
    const double step = config.learning_rate * std::sqrt(c2) / c1;
    const double eps = config.epsilon * std::sqrt(c2);
    double* __restrict m = state.first_moment.data();
    double* __restrict v = state.second_moment.data();
    const double* __restrict g = gradient.data();
    double* __restrict w = params.data();
    const std::size_t n = params.size();
    for (std::size_t i = 0; i < n; ++i) {
        double mi = b1 * m[i] + (1.0 - b1) * g[i];
        double vi = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
        // Moments of parameters that stop receiving gradient decay into
        // subnormals, which are very slow on x86; their step is nil anyway.
        mi = std::abs(mi) < kMomentFloor ? 0.0 : mi;
        vi = vi < kMomentFloor ? 0.0 : vi;
        m[i] = mi;
        v[i] = vi;
        w[i] -= step * mi / (std::sqrt(vi) + eps);
    }
}

void sgd_step(std::span<double> params, std::span<const double> gradient, const OptimizerConfig& config) {
    if (gradient.size() != params.size()) throw std::invalid_argument("sgd_step: size mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= config.learning_rate * gradient[i];
}

void tabular_fit(ParameterSet& table, std::span<const TabularSample> batch, double learning_rate) {
    if (table.kind != ModelKind::tabular || table.shape.size() != 2)
        throw std::invalid_argument("tabular_fit: not a tabular parameter set");
    const std::size_t S = table.shape[0], A = table.shape[1];
    for (const auto& sample : batch) {
        if (sample.state >= S || sample.action >= A) throw std::invalid_argument("tabular_fit: index out of range");
        double& entry = table.values[sample.state * A + sample.action];
        if (learning_rate == 1.0)
            entry = sample.target;
        else
            entry += learning_rate * (sample.target - entry);
    }
}

// --- TabularQ ---------------------------------------------------------------

TabularQ::TabularQ(std::size_t num_states, std::size_t num_actions, double learning_rate)
    : table_{ModelKind::tabular, {num_states, num_actions}, std::vector<double>(num_states * num_actions, 0.0)},
      learning_rate_(learning_rate) {
    if (num_states == 0 || num_actions == 0) throw std::invalid_argument("TabularQ: empty table");
    if (!(learning_rate >= 0.0 && learning_rate <= 1.0))
        throw std::invalid_argument("TabularQ: learning rate must lie in [0, 1]");
}

TabularQ::TabularQ(std::size_t num_states, std::size_t num_actions, double learning_rate, double init_scale,
                   Rng& rng)
    : TabularQ(num_states, num_actions, learning_rate) {
    if (init_scale > 0.0) {
        std::uniform_real_distribution<double> dist(-init_scale, init_scale);
        for (double& v : table_.values) v = dist(rng);
    }
}

State TabularQ::state_of(std::span<const double> features) const {
    if (features.size() != table_.shape[0]) throw std::invalid_argument("TabularQ: feature length mismatch");
    auto it = std::find(features.begin(), features.end(), 1.0);
    if (it == features.end()) throw std::invalid_argument("TabularQ: features are not one-hot");
    return static_cast<State>(it - features.begin());
}

std::vector<double> TabularQ::predict(std::span<const double> features) const {
    const State s = state_of(features);
    const std::size_t A = num_actions();
    return {table_.values.begin() + s * A, table_.values.begin() + (s + 1) * A};
}

double TabularQ::fit_minibatch(std::span<const FitSample> batch) {
    std::vector<TabularSample> samples;
    samples.reserve(batch.size());
    double loss = 0.0;
    for (const auto& b : batch) {
        const State s = state_of(b.features);
        const double d = b.target - table_.values[s * num_actions() + b.action];
        loss += 0.5 * d * d;
        samples.push_back({s, b.action, b.target});
    }
    tabular_fit(table_, samples, learning_rate_);
    ++updates_;
    return batch.empty() ? 0.0 : loss / static_cast<double>(batch.size());
}

void TabularQ::load(const ParameterSet& params) {
    params.validate();
    if (params.kind != ModelKind::tabular || params.shape != table_.shape)
        throw std::invalid_argument("TabularQ::load: shape mismatch");
    table_ = params;
}

// --- MlpQ -------------------------------------------------------------------

MlpQ::MlpQ(const MlpArchitecture& arch, const OptimizerConfig& optimizer, Rng& init_rng)
    : arch_(arch),
      optimizer_(optimizer),
      params_(mlp_init(arch, init_rng)),
      adam_(arch.parameter_count()),
      gradient_(arch.parameter_count(), 0.0),
      hidden_(arch.hidden_units) {
    optimizer_.validate();
}

std::vector<double> MlpQ::predict(std::span<const double> features) const {
    check_features(arch_, features);
    std::vector<double> hidden(arch_.hidden_units), out(arch_.output_dim);
    forward_into(arch_, params_.values, features, hidden, out);
    return out;
}

double MlpQ::fit_minibatch(std::span<const FitSample> batch) {
    if (batch.empty()) return 0.0;
    std::fill(gradient_.begin(), gradient_.end(), 0.0);
    std::vector<double> out(arch_.output_dim);
    double loss = 0.0;
    for (const auto& sample : batch) {
        check_features(arch_, sample.features);
        if (sample.action >= arch_.output_dim) throw std::invalid_argument("MlpQ: action out of range");
        if (!std::isfinite(sample.target)) throw std::invalid_argument("MlpQ: non-finite target");
        forward_into(arch_, params_.values, sample.features, hidden_, out);
        const double residual = out[sample.action] - sample.target;
        loss += 0.5 * residual * residual;
        accumulate_gradient(arch_, params_.values, sample.features, hidden_, sample.action, residual, gradient_);
    }
    const double scale = 1.0 / static_cast<double>(batch.size());
    for (double& g : gradient_) g *= scale;
    if (optimizer_.kind == OptimizerKind::adam)
        adam_step(params_.values, gradient_, adam_, optimizer_);
    else
        sgd_step(params_.values, gradient_, optimizer_);
    ++updates_;
    return loss * scale;
}

void MlpQ::load(const ParameterSet& params) {
    params.validate();
    if (params.kind != ModelKind::mlp || params.shape != params_.shape)
        throw std::invalid_argument("MlpQ::load: shape mismatch");
    params_ = params;
}

// --- serialization ----------------------------------------------------------

void write_parameters(std::ostream& out, const ParameterSet& params) {
    out << "# avgdqn-params v1\n";
    out << "kind " << to_string(params.kind) << '\n';
    out << "shape";
    for (auto d : params.shape) out << ' ' << d;
    out << "\ncount " << params.values.size() << '\n';
    for (double v : params.values) out << format_double(v) << '\n';
}

ParameterSet read_parameters(std::istream& in) {
    auto fail = [](const std::string& what) { return std::invalid_argument("read_parameters: " + what); };
    std::string line, tag;
    if (!std::getline(in, line) || trim(line) != "# avgdqn-params v1") throw fail("missing header");

    ParameterSet params;
    std::string kind;
    if (!(in >> tag >> kind) || tag != "kind") throw fail("missing kind");
    params.kind = model_kind_from_string(kind);

    std::getline(in, line);  // rest of the kind line
    if (!std::getline(in, line)) throw fail("missing shape");
    std::istringstream shape(line);
    if (!(shape >> tag) || tag != "shape") throw fail("bad shape line");
    for (std::size_t d; shape >> d;) params.shape.push_back(d);

    std::size_t count = 0;
    if (!(in >> tag >> count) || tag != "count") throw fail("missing count");
    params.values.resize(count);
    for (auto& v : params.values)
        if (!(in >> v)) throw fail("truncated values");
    params.validate();
    return params;
}

}  // namespace avgdqn
