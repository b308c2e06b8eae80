#include <doctest.h>

#include <cmath>
#include <set>

#include "avgdqn/errors.hpp"
#include "avgdqn/replay.hpp"

using namespace avgdqn;

namespace {

Transition tr(State s) { return Transition{s, 0, double(s), s + 1, false}; }

// Upper 1% point of chi-square with `dof` degrees of freedom (Wilson-Hilferty).
double chi2_critical_01(double dof) {
    const double z = 2.3263478740408408;
    const double c = 2.0 / (9.0 * dof);
    return dof * std::pow(1.0 - c + z * std::sqrt(c), 3);
}

}  // namespace

TEST_CASE("fifo keeps the newest transitions, oldest first") {
    auto b = ReplayBuffer::fifo(2);
    b.push(tr(1));
    b.push(tr(2));
    b.push(tr(3));
    REQUIRE(b.size() == 2);
    CHECK(b.at(0) == tr(2));
    CHECK(b.at(1) == tr(3));
    b.push(tr(4));
    CHECK(b.contents() == std::vector<Transition>{tr(3), tr(4)});
    CHECK_THROWS_AS(b.at(2), std::out_of_range);
    CHECK_THROWS(ReplayBuffer::fifo(0));
}

TEST_CASE("full-coverage buffers are read-only and fifo buffers cannot be filled") {
    auto full = ReplayBuffer::full_coverage();
    CHECK_THROWS_AS(full.push(tr(0)), InvalidOperation);
    auto fifo = ReplayBuffer::fifo(10);
    CHECK_THROWS_AS(fifo.fill_exhaustive(make_unidirectional_chain(3, 0.9)), InvalidOperation);

    std::vector<double> p{0.5, 0.5, 0.0, 1.0}, r(4, 0.0);
    const MdpSpec coin(2, 1, p, r, 0.9, {1});
    CHECK_THROWS_AS(full.fill_exhaustive(coin), Unsupported);
}

TEST_CASE("exhaustive fill covers every state-action pair exactly once") {
    for (std::size_t n : {2u, 20u}) {
        const auto mdp = make_gridworld(GridworldSpec{n, n, n, n, 1.0, 0.0, 0.9});
        auto b = ReplayBuffer::full_coverage();
        b.fill_exhaustive(mdp);
        CHECK(b.size() == n * n * 4);
        std::set<std::pair<State, Action>> seen;
        for (const auto& t : b.contents()) {
            CHECK(seen.insert({t.state, t.action}).second);
            CHECK(t.next_state == *mdp.deterministic_successor(t.state, t.action));
            CHECK(t.reward == mdp.reward(t.state, t.action, t.next_state));
            CHECK(t.done == mdp.is_terminal(t.next_state));
            if (mdp.is_terminal(t.state)) {
                CHECK(t.next_state == t.state);
                CHECK(t.reward == 0.0);
            }
        }
    }
}

TEST_CASE("uniform sampling passes a chi-square test") {
    auto b = ReplayBuffer::fifo(50);
    for (State s = 0; s < 50; ++s) b.push(tr(s));
    Rng rng = make_rng(123);
    const std::size_t draws = 100000;
    std::vector<double> count(50, 0.0);
    for (std::size_t i : b.sample_indices(draws, rng)) count.at(i) += 1;
    const double expected = double(draws) / 50;
    double chi2 = 0.0;
    for (double c : count) chi2 += (c - expected) * (c - expected) / expected;
    CHECK(chi2 < chi2_critical_01(49));

    const auto mb = b.sample_minibatch(32, rng);
    CHECK(mb.size() == 32);
    for (const auto& t : mb) CHECK(t.reward == double(t.state));
}

TEST_CASE("sampling edge cases") {
    auto b = ReplayBuffer::fifo(4);
    Rng rng = make_rng(1);
    CHECK_THROWS_AS(b.sample_minibatch(1, rng), InvalidOperation);
    CHECK(b.sample_minibatch(0, rng).empty());
    b.push(tr(7));
    CHECK(b.sample_minibatch(0, rng).empty());
    for (const auto& t : b.sample_minibatch(5, rng)) CHECK(t == tr(7));
}
