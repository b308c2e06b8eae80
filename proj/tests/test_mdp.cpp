#include <doctest.h>

#include <cmath>
#include <queue>
#include <sstream>

#include "avgdqn/mdp.hpp"

using namespace avgdqn;

namespace {

// Two states, two actions; action 1 in state 0 is a coin flip.
MdpSpec coin_mdp() {
    std::vector<double> p(2 * 2 * 2, 0.0), r(2 * 2 * 2, 0.0);
    auto at = [](State s, Action a, State n) { return (s * 2 + a) * 2 + n; };
    p[at(0, 0, 0)] = 1.0;
    p[at(0, 1, 0)] = 0.3;
    p[at(0, 1, 1)] = 0.7;
    r[at(0, 1, 1)] = 2.0;
    p[at(1, 0, 1)] = 1.0;
    p[at(1, 1, 1)] = 1.0;
    return MdpSpec(2, 2, p, r, 0.5, {1});
}

}  // namespace

TEST_CASE("chain construction") {
    CHECK_THROWS_AS(make_unidirectional_chain(1, 0.9), std::invalid_argument);

    const auto m = make_unidirectional_chain(3, 0.9);
    CHECK(m.num_states() == 3);
    CHECK(m.num_actions() == 1);
    CHECK(m.deterministic_successor(0, 0) == State{1});
    CHECK(m.reward(0, 0, 1) == 0.0);
    CHECK_FALSE(m.is_terminal(1));
    CHECK(m.deterministic_successor(1, 0) == State{2});
    CHECK(m.is_terminal(2));

    Rng rng = make_rng(1);
    auto step = sample_transition(m, 0, 0, rng);
    CHECK(step.next == 1);
    CHECK(step.reward == 0.0);
    CHECK_FALSE(step.done);
    step = sample_transition(m, 1, 0, rng);
    CHECK(step.next == 2);
    CHECK(step.done);
}

TEST_CASE("chain reaches the terminal in M-1 steps, for every action count") {
    for (std::size_t M = 2; M <= 9; ++M)
        for (std::size_t A = 1; A <= 3; ++A) {
            const auto m = make_unidirectional_chain(M, 0.5, A);
            Rng rng = make_rng(M, A);
            State s = 0;
            std::size_t steps = 0;
            bool done = false;
            while (!done) {
                auto st = sample_transition(m, s, steps % A, rng);
                s = st.next;
                done = st.done;
                ++steps;
            }
            CHECK(steps == M - 1);
            CHECK(s == M - 1);
        }
}

TEST_CASE("gridworld geometry") {
    GridworldSpec g;
    g.width = 4;
    g.height = 3;
    g.goal_x = 4;
    g.goal_y = 3;
    const auto m = make_gridworld(g);
    CHECK(m.num_states() == 12);
    CHECK(m.num_actions() == 4);
    const State origin = g.state_of(1, 1);
    CHECK(origin == 0);
    CHECK(m.deterministic_successor(origin, kWest) == origin);
    CHECK(m.deterministic_successor(origin, kSouth) == origin);
    CHECK(m.deterministic_successor(origin, kNorth) == g.state_of(1, 2));
    CHECK(m.deterministic_successor(origin, kEast) == g.state_of(2, 1));
    CHECK(m.deterministic_successor(g.state_of(4, 2), kEast) == g.state_of(4, 2));
    CHECK(m.is_terminal(g.state_of(4, 3)));
    CHECK(m.terminal_states().size() == 1);
    // Entering the goal pays; nothing else does.
    CHECK(m.reward(g.state_of(3, 3), kEast, g.state_of(4, 3)) == 1.0);
    CHECK(m.reward(g.state_of(4, 2), kNorth, g.state_of(4, 3)) == 1.0);
    CHECK(m.reward(g.state_of(2, 2), kEast, g.state_of(3, 2)) == 0.0);
    CHECK(g.x_of(g.state_of(3, 2)) == 3);
    CHECK(g.y_of(g.state_of(3, 2)) == 2);
}

TEST_CASE("every gridworld state reaches every other (BFS)") {
    GridworldSpec g;
    g.width = 7;
    g.height = 5;
    g.goal_x = 7;
    g.goal_y = 5;
    const auto m = make_gridworld(g);
    for (State src = 0; src < m.num_states(); ++src) {
        if (m.is_terminal(src)) continue;
        std::vector<bool> seen(m.num_states(), false);
        std::queue<State> q;
        q.push(src);
        seen[src] = true;
        while (!q.empty()) {
            State s = q.front();
            q.pop();
            for (Action a = 0; a < 4; ++a) {
                State n = *m.deterministic_successor(s, a);
                if (!seen[n]) {
                    seen[n] = true;
                    q.push(n);
                }
            }
        }
        for (State t = 0; t < m.num_states(); ++t) CHECK(seen[t]);
    }
}

TEST_CASE("environments") {
    const auto e = gridworld_environment(GridworldSpec{});
    CHECK(e.start == 0);
    CHECK(e.grid.has_value());
    CHECK(e.rollout_cap >= 38);
    const auto c = chain_environment(4, 0.9, 2);
    CHECK(c.start == 0);
    CHECK(c.mdp.num_actions() == 2);
    CHECK_FALSE(c.grid.has_value());
}

TEST_CASE("MdpSpec validation") {
    std::vector<double> p{0.5, 0.4, 0.0, 1.0};
    std::vector<double> r(4, 0.0);
    CHECK_THROWS_AS(MdpSpec(2, 1, p, r, 0.9, {}), std::invalid_argument);  // row sums to 0.9
    p = {0.5, 0.5, 0.0, 1.0};
    CHECK_NOTHROW(MdpSpec(2, 1, p, r, 0.9, {}));
    CHECK_THROWS_AS(MdpSpec(2, 1, p, r, 1.0, {}), std::invalid_argument);
    CHECK_THROWS_AS(MdpSpec(2, 1, p, r, -0.1, {}), std::invalid_argument);
    CHECK_THROWS_AS(MdpSpec(2, 1, p, r, 0.9, {0}), std::invalid_argument);  // terminal must self-loop
    std::vector<double> bad_r{0.0, 0.0, 0.0, 1.0};
    CHECK_THROWS_AS(MdpSpec(2, 1, p, bad_r, 0.9, {1}), std::invalid_argument);  // terminal pays
    std::vector<double> nan_r{NAN, 0.0, 0.0, 0.0};
    CHECK_THROWS_AS(MdpSpec(2, 1, p, nan_r, 0.9, {}), std::invalid_argument);
    std::vector<double> neg{1.5, -0.5, 0.0, 1.0};
    CHECK_THROWS_AS(MdpSpec(2, 1, neg, r, 0.9, {}), std::invalid_argument);
    CHECK_THROWS_AS(MdpSpec(2, 1, {1.0}, r, 0.9, {}), std::invalid_argument);
}

TEST_CASE("stochastic sampling frequencies stay within 3 standard errors") {
    const auto m = coin_mdp();
    CHECK_FALSE(m.is_deterministic());
    CHECK_FALSE(m.deterministic_successor(0, 1).has_value());
    Rng rng = make_rng(7);
    const int n = 100000;
    int hits = 0;
    for (int i = 0; i < n; ++i) {
        auto st = sample_transition(m, 0, 1, rng);
        if (st.next == 1) {
            ++hits;
            CHECK(st.reward == 2.0);
            CHECK(st.done);
        } else {
            CHECK(st.reward == 0.0);
        }
    }
    const double p = 0.7;
    const double se = std::sqrt(p * (1 - p) / n);
    CHECK(std::abs(hits / double(n) - p) < 3 * se);
}

TEST_CASE("feature map is one-hot") {
    FeatureMap f(5);
    CHECK(f.dim() == 5);
    for (State s = 0; s < 5; ++s) {
        auto x = f(s);
        for (std::size_t j = 0; j < 5; ++j) CHECK(x[j] == (j == s ? 1.0 : 0.0));
    }
    CHECK_THROWS(f(5));
}

TEST_CASE("mdp text round trip") {
    for (const auto& m : {coin_mdp(), make_gridworld(GridworldSpec{3, 2, 3, 2, 1.0, -0.25, 0.95})}) {
        std::stringstream ss;
        write_mdp_text(ss, m);
        const auto back = read_mdp_text(ss);
        REQUIRE(back.num_states() == m.num_states());
        REQUIRE(back.num_actions() == m.num_actions());
        CHECK(back.gamma() == m.gamma());
        CHECK(back.terminal_states() == m.terminal_states());
        for (State s = 0; s < m.num_states(); ++s)
            for (Action a = 0; a < m.num_actions(); ++a)
                for (State n = 0; n < m.num_states(); ++n) {
                    CHECK(back.probability(s, a, n) == m.probability(s, a, n));
                    CHECK(back.reward(s, a, n) == m.reward(s, a, n));
                }
    }
    std::stringstream garbage("not an mdp\n");
    CHECK_THROWS(read_mdp_text(garbage));
}
