#include "avgdqn/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "avgdqn/text.hpp"

namespace avgdqn {

namespace {

constexpr double kRowSumTolerance = 1e-12;

}  // namespace

MdpSpec::MdpSpec(std::size_t num_states, std::size_t num_actions, std::vector<double> transition,
                 std::vector<double> reward, double gamma, std::vector<State> terminal)
    : num_states_(num_states),
      num_actions_(num_actions),
      transition_(std::move(transition)),
      reward_(std::move(reward)),
      gamma_(gamma),
      terminal_(std::move(terminal)),
      terminal_mask_(num_states, false) {
    if (num_states_ == 0 || num_actions_ == 0)
        throw std::invalid_argument("MdpSpec: need at least one state and one action");
    const std::size_t n = num_states_ * num_actions_ * num_states_;
    if (transition_.size() != n || reward_.size() != n)
        throw std::invalid_argument("MdpSpec: table size does not match S*A*S");
    if (!(gamma_ >= 0.0 && gamma_ < 1.0))
        throw std::invalid_argument("MdpSpec: gamma must lie in [0, 1)");

    std::sort(terminal_.begin(), terminal_.end());
    terminal_.erase(std::unique(terminal_.begin(), terminal_.end()), terminal_.end());
    for (State t : terminal_) {
        if (t >= num_states_) throw std::invalid_argument("MdpSpec: terminal state out of range");
        terminal_mask_[t] = true;
    }

    for (State s = 0; s < num_states_; ++s) {
        for (Action a = 0; a < num_actions_; ++a) {
            double sum = 0.0;
            for (State next = 0; next < num_states_; ++next) {
                const double p = transition_[index(s, a, next)];
                const double r = reward_[index(s, a, next)];
                if (!std::isfinite(p) || p < 0.0)
                    throw std::invalid_argument("MdpSpec: probabilities must be finite and non-negative");
                if (!std::isfinite(r)) throw std::invalid_argument("MdpSpec: rewards must be finite");
                sum += p;
            }
            if (std::abs(sum - 1.0) > kRowSumTolerance)
                throw std::invalid_argument("MdpSpec: transition row of (" + std::to_string(s) + ", " +
                                            std::to_string(a) + ") does not sum to 1");
            if (terminal_mask_[s]) {
                if (transition_[index(s, a, s)] != 1.0)
                    throw std::invalid_argument("MdpSpec: terminal state must self-loop");
                for (State next = 0; next < num_states_; ++next)
                    if (reward_[index(s, a, next)] != 0.0)
                        throw std::invalid_argument("MdpSpec: terminal state must have zero reward");
            }
        }
    }
}

void MdpSpec::check(State s, Action a) const {
    if (s >= num_states_) throw std::invalid_argument("state index out of range");
    if (a >= num_actions_) throw std::invalid_argument("action index out of range");
}

std::span<const double> MdpSpec::transition_row(State s, Action a) const {
    check(s, a);
    return {transition_.data() + index(s, a, 0), num_states_};
}

std::span<const double> MdpSpec::reward_row(State s, Action a) const {
    check(s, a);
    return {reward_.data() + index(s, a, 0), num_states_};
}

double MdpSpec::probability(State s, Action a, State next) const {
    return transition_row(s, a)[next];
}

double MdpSpec::reward(State s, Action a, State next) const { return reward_row(s, a)[next]; }

std::optional<State> MdpSpec::deterministic_successor(State s, Action a) const {
    auto row = transition_row(s, a);
    auto it = std::find(row.begin(), row.end(), 1.0);
    if (it == row.end()) return std::nullopt;
    return static_cast<State>(it - row.begin());
}

bool MdpSpec::is_deterministic() const {
    for (State s = 0; s < num_states_; ++s)
        for (Action a = 0; a < num_actions_; ++a)
            if (!deterministic_successor(s, a)) return false;
    return true;
}

double MdpSpec::max_abs_reward() const {
    double m = 0.0;
    for (double r : reward_) m = std::max(m, std::abs(r));
    return m;
}

MdpSpec make_unidirectional_chain(std::size_t length, double gamma, std::size_t num_actions) {
    if (length < 2) throw std::invalid_argument("chain needs at least 2 states");
    if (num_actions == 0) throw std::invalid_argument("chain needs at least one action");
    const std::size_t n = length * num_actions * length;
    std::vector<double> p(n, 0.0);
    std::vector<double> r(n, 0.0);
    for (State s = 0; s < length; ++s) {
        const State next = s + 1 < length ? s + 1 : s;
        for (Action a = 0; a < num_actions; ++a) p[(s * num_actions + a) * length + next] = 1.0;
    }
    return MdpSpec(length, num_actions, std::move(p), std::move(r), gamma, {length - 1});
}

MdpSpec make_gridworld(const GridworldSpec& g) {
    if (g.width == 0 || g.height == 0) throw std::invalid_argument("gridworld must be non-empty");
    if (g.goal_x < 1 || g.goal_x > g.width || g.goal_y < 1 || g.goal_y > g.height)
        throw std::invalid_argument("gridworld goal lies outside the grid");

    const std::size_t S = g.width * g.height;
    constexpr std::size_t A = 4;
    std::vector<double> p(S * A * S, 0.0);
    std::vector<double> r(S * A * S, 0.0);
    const State goal = g.state_of(g.goal_x, g.goal_y);

    for (State s = 0; s < S; ++s) {
        const std::size_t x = g.x_of(s);
        const std::size_t y = g.y_of(s);
        for (Action a = 0; a < A; ++a) {
            const std::size_t i = (s * A + a) * S;
            if (s == goal) {
                p[i + s] = 1.0;
                continue;
            }
            std::size_t nx = x, ny = y;
            switch (a) {
                case kNorth: ny = std::min(y + 1, g.height); break;
                case kEast: nx = std::min(x + 1, g.width); break;
                case kSouth: ny = y > 1 ? y - 1 : y; break;
                case kWest: nx = x > 1 ? x - 1 : x; break;
            }
            const State next = g.state_of(nx, ny);
            p[i + next] = 1.0;
            r[i + next] = next == goal ? g.goal_reward : g.step_reward;
        }
    }
    return MdpSpec(S, A, std::move(p), std::move(r), g.gamma, {goal});
}

Step sample_transition(const MdpSpec& mdp, State s, Action a, Rng& rng) {
    auto row = mdp.transition_row(s, a);
    State next = row.size() - 1;
    if (auto det = mdp.deterministic_successor(s, a)) {
        next = *det;
    } else {
        const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        double acc = 0.0;
        for (State j = 0; j < row.size(); ++j) {
            acc += row[j];
            if (u < acc) {
                next = j;
                break;
            }
        }
    }
    return {next, mdp.reward(s, a, next), mdp.is_terminal(next)};
}

FeatureMap::FeatureMap(std::size_t num_states) : dim_(num_states), table_(num_states * num_states, 0.0) {
    for (State s = 0; s < num_states; ++s) table_[s * dim_ + s] = 1.0;
}

std::span<const double> FeatureMap::operator()(State s) const {
    if (s >= dim_) throw std::invalid_argument("FeatureMap: state out of range");
    return {table_.data() + s * dim_, dim_};
}

Environment gridworld_environment(const GridworldSpec& spec) {
    Environment env{make_gridworld(spec), spec.state_of(1, 1), 4 * (spec.width + spec.height), spec};
    return env;
}

Environment chain_environment(std::size_t length, double gamma, std::size_t num_actions) {
    return Environment{make_unidirectional_chain(length, gamma, num_actions), 0, 4 * length, std::nullopt};
}

void write_mdp_text(std::ostream& out, const MdpSpec& mdp) {
    out << "# avgdqn-mdp v1\n";
    out << "states " << mdp.num_states() << " actions " << mdp.num_actions() << " gamma "
        << format_double(mdp.gamma()) << '\n';
    out << "terminal";
    for (State t : mdp.terminal_states()) out << ' ' << t;
    out << '\n';
    for (State s = 0; s < mdp.num_states(); ++s) {
        for (Action a = 0; a < mdp.num_actions(); ++a) {
            out << s << ' ' << a << " p";
            for (double p : mdp.transition_row(s, a)) out << ' ' << format_double(p);
            out << " r";
            for (double r : mdp.reward_row(s, a)) out << ' ' << format_double(r);
            out << '\n';
        }
    }
}

MdpSpec read_mdp_text(std::istream& in) {
    auto fail = [](const std::string& what) { return std::invalid_argument("read_mdp_text: " + what); };
    std::string line;
    if (!std::getline(in, line) || trim(line) != "# avgdqn-mdp v1") throw fail("missing header");

    std::size_t S = 0, A = 0;
    double gamma = 0.0;
    std::string k1, k2, k3;
    if (!std::getline(in, line)) throw fail("missing dimensions");
    std::istringstream dims(line);
    if (!(dims >> k1 >> S >> k2 >> A >> k3 >> gamma) || k1 != "states" || k2 != "actions" || k3 != "gamma")
        throw fail("bad dimension line");

    if (!std::getline(in, line)) throw fail("missing terminal line");
    std::istringstream term(line);
    std::string tag;
    term >> tag;
    if (tag != "terminal") throw fail("bad terminal line");
    std::vector<State> terminal;
    for (State t; term >> t;) terminal.push_back(t);

    std::vector<double> p(S * A * S), r(S * A * S);
    for (std::size_t row = 0; row < S * A; ++row) {
        if (!std::getline(in, line)) throw fail("truncated transition block");
        std::istringstream ls(line);
        State s;
        Action a;
        std::string ptag, rtag;
        if (!(ls >> s >> a >> ptag) || ptag != "p" || s >= S || a >= A) throw fail("bad row header");
        const std::size_t base = (s * A + a) * S;
        for (std::size_t j = 0; j < S; ++j)
            if (!(ls >> p[base + j])) throw fail("short probability row");
        if (!(ls >> rtag) || rtag != "r") throw fail("missing reward block");
        for (std::size_t j = 0; j < S; ++j)
            if (!(ls >> r[base + j])) throw fail("short reward row");
    }
    return MdpSpec(S, A, std::move(p), std::move(r), gamma, std::move(terminal));
}

}  // namespace avgdqn
