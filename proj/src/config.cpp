#include "avgdqn/config.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "avgdqn/text.hpp"

namespace avgdqn {

namespace {

const ConfigKey* find_key(const std::string& name) {
    const auto& keys = config_keys();
    auto it = std::find_if(keys.begin(), keys.end(), [&](const ConfigKey& k) { return k.name == name; });
    return it == keys.end() ? nullptr : &*it;
}

double parse_real(const std::string& key, const std::string& text) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != text.size() || !std::isfinite(v))
        throw std::invalid_argument("config key '" + key + "' expects a number, got '" + text + "'");
    return v;
}

long long parse_int(const std::string& key, const std::string& text) {
    long long v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
        throw std::invalid_argument("config key '" + key + "' expects an integer, got '" + text + "'");
    return v;
}

bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
    if (text == "false" || text == "0" || text == "no" || text == "off") return false;
    throw std::invalid_argument("config key '" + key + "' expects a boolean, got '" + text + "'");
}

// Normal form of a value, so that "0.90" and "0.9" hash the same.
std::string normalize(const ConfigKey& key, const std::string& raw) {
    const std::string text = trim(raw);
    switch (key.type) {
        case KeyType::integer: return std::to_string(parse_int(key.name, text));
        case KeyType::real: return format_double(parse_real(key.name, text));
        case KeyType::boolean: return parse_bool(key.name, text) ? "true" : "false";
        case KeyType::list: {
            std::string out;
            for (const auto& item : split(text, ',')) {
                const auto t = trim(item);
                if (t.empty()) continue;
                if (!out.empty()) out += ',';
                out += t;
            }
            return out;
        }
        case KeyType::text: return text;
    }
    return text;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = {
        {"preset", KeyType::text, "", "preset this configuration was derived from"},
        {"env", KeyType::text, "gridworld", "environment: gridworld | chain"},
        {"gamma", KeyType::real, "0.9", "discount factor"},
        {"grid.width", KeyType::integer, "20", "gridworld width (cells)"},
        {"grid.height", KeyType::integer, "20", "gridworld height (cells)"},
        {"grid.goal_x", KeyType::integer, "20", "goal column, 1-based"},
        {"grid.goal_y", KeyType::integer, "20", "goal row, 1-based"},
        {"grid.goal_reward", KeyType::real, "1", "reward on entering the goal"},
        {"grid.step_reward", KeyType::real, "0", "reward on every other transition"},
        {"chain.length", KeyType::integer, "5", "number of chain states M"},
        {"chain.actions", KeyType::integer, "2", "actions per chain state (all move right)"},
        {"runs", KeyType::list, "dqn:1,averaged:5,averaged:10,averaged:20", "algorithm:K pairs to train"},
        {"seeds", KeyType::integer, "10", "number of seeds; seeds are seed_offset .. seed_offset+seeds-1"},
        {"seed_offset", KeyType::integer, "0", "first seed"},
        {"agent.iterations", KeyType::integer, "1000", "target-network updates per run"},
        {"agent.minibatches", KeyType::integer, "100", "minibatches per target-network update"},
        {"agent.batch_size", KeyType::integer, "32", "transitions per minibatch"},
        {"agent.full_batch", KeyType::boolean, "false", "fit on the whole buffer in each minibatch step"},
        {"agent.model", KeyType::text, "mlp", "approximator: mlp | tabular"},
        {"agent.hidden", KeyType::integer, "80", "hidden units of the mlp"},
        {"agent.tabular_lr", KeyType::real, "1", "step size of the tabular approximator"},
        {"optimizer.kind", KeyType::text, "adam", "adam | sgd"},
        {"optimizer.learning_rate", KeyType::real, "0.001", "optimizer step size"},
        {"optimizer.beta1", KeyType::real, "0.9", "adam first-moment decay"},
        {"optimizer.beta2", KeyType::real, "0.999", "adam second-moment decay"},
        {"optimizer.epsilon", KeyType::real, "1e-08", "adam denominator offset"},
        {"replay.mode", KeyType::text, "full", "full (one transition per state-action pair) | fifo"},
        {"replay.capacity", KeyType::integer, "1000", "fifo capacity"},
        {"explore.epsilon_start", KeyType::real, "1", "initial exploration epsilon"},
        {"explore.epsilon_final", KeyType::real, "0.1", "final exploration epsilon"},
        {"explore.decay_steps", KeyType::integer, "1000", "environment steps of linear epsilon decay"},
        {"explore.steps_per_iteration", KeyType::integer, "0", "environment steps per iteration (fifo only)"},
        {"explore.warmup_steps", KeyType::integer, "0", "exploration steps before the first iteration (fifo only)"},
        {"log_every", KeyType::integer, "10", "iterations between learning-curve records"},
        {"eval_states", KeyType::text, "all", "states averaged in the predicted value: all | start"},
        {"workers", KeyType::integer, "1", "concurrent runs / simulation threads"},
        {"tae.M", KeyType::list, "2,4", "chain lengths for the variance grid"},
        {"tae.K", KeyType::list, "1,2,5", "ensemble sizes for the variance grid"},
        {"tae.gamma", KeyType::list, "0.9,0.99", "discounts for the variance grid"},
        {"tae.sigma", KeyType::real, "1", "TAE standard deviation in every state"},
        {"tae.trials", KeyType::integer, "100000", "Monte Carlo trials per grid point"},
        {"tae.seed", KeyType::integer, "0", "Monte Carlo seed"},
        {"ale.gamma", KeyType::real, "0.99", "Atari discount"},
        {"ale.learning_rate", KeyType::real, "0.00025", "Atari RMSProp step size"},
        {"ale.rmsprop_momentum", KeyType::real, "0.95", "Atari RMSProp momentum"},
        {"ale.target_update_steps", KeyType::integer, "10000", "Atari steps between target-network updates"},
        {"ale.total_frames", KeyType::integer, "120000000", "Atari training frames"},
        {"ale.replay_capacity", KeyType::integer, "1000000", "Atari replay memory size"},
        {"ale.update_every", KeyType::integer, "4", "Atari steps between minibatch updates"},
        {"ale.batch_size", KeyType::integer, "32", "Atari minibatch size"},
        {"ale.epsilon_start", KeyType::real, "1", "Atari initial exploration epsilon"},
        {"ale.epsilon_final", KeyType::real, "0.1", "Atari final exploration epsilon"},
        {"ale.epsilon_decay_steps", KeyType::integer, "1000000", "Atari epsilon decay steps"},
        {"ale.eval_epsilon", KeyType::real, "0.05", "Atari evaluation epsilon"},
        {"ale.eval_frames", KeyType::integer, "500000", "Atari frames per evaluation"},
        {"ale.frame_skip", KeyType::integer, "4", "Atari action repeat"},
        {"ale.noop_max", KeyType::integer, "30", "Atari maximum no-op actions at episode start"},
        {"ale.reward_clip", KeyType::real, "1", "Atari reward clipping bound"},
        {"ale.hidden", KeyType::integer, "512", "Atari fully connected hidden units"},
    };
    return keys;
}

Config::Config() {
    for (const auto& k : config_keys()) values_[k.name] = normalize(k, k.default_value);
}

Config Config::parse(std::istream& in) {
    Config c;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        const std::string body = trim(line.substr(0, hash));
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
        c.set(trim(body.substr(0, eq)), body.substr(eq + 1));
    }
    return c;
}

void Config::set(const std::string& key, const std::string& value) {
    const ConfigKey* k = find_key(key);
    if (!k) throw std::invalid_argument("unknown config key '" + key + "'");
    values_[key] = normalize(*k, value);
}

void Config::apply(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("override '" + assignment + "' is not key=value");
    set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

const std::string& Config::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw std::invalid_argument("unknown config key '" + key + "'");
    return it->second;
}

double Config::get_real(const std::string& key) const { return parse_real(key, get(key)); }
long long Config::get_int(const std::string& key) const { return parse_int(key, get(key)); }

std::size_t Config::get_size(const std::string& key) const {
    const long long v = get_int(key);
    if (v < 0) throw std::invalid_argument("config key '" + key + "' must be non-negative");
    return static_cast<std::size_t>(v);
}

bool Config::get_bool(const std::string& key) const { return parse_bool(key, get(key)); }

std::vector<std::string> Config::get_list(const std::string& key) const {
    const auto& v = get(key);
    if (v.empty()) return {};
    return split(v, ',');
}

std::vector<double> Config::get_real_list(const std::string& key) const {
    std::vector<double> out;
    for (const auto& s : get_list(key)) out.push_back(parse_real(key, s));
    return out;
}

std::vector<std::size_t> Config::get_size_list(const std::string& key) const {
    std::vector<std::size_t> out;
    for (const auto& s : get_list(key)) {
        const long long v = parse_int(key, s);
        if (v < 0) throw std::invalid_argument("config key '" + key + "' must be non-negative");
        out.push_back(static_cast<std::size_t>(v));
    }
    return out;
}

std::string Config::canonical() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + "=" + v + "\n";
    return out;
}

std::string Config::hash() const {
    const std::string text = canonical();
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(text.data(), text.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

void write_config_reference(std::ostream& out) {
    for (const auto& k : config_keys()) {
        out << "# " << k.doc << '\n';
        out << k.name << " = " << k.default_value << "\n\n";
    }
}

}  // namespace avgdqn
