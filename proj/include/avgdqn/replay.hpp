#pragma once

#include <cstddef>
#include <vector>

#include "avgdqn/mdp.hpp"
#include "avgdqn/random.hpp"

namespace avgdqn {

struct Transition {
    State state = 0;
    Action action = 0;
    double reward = 0.0;
    State next_state = 0;
    bool done = false;

    bool operator==(const Transition&) const = default;
};

enum class ReplayMode { fifo, full_coverage };

/// Experience replay in one of two modes:
///  - fifo: ring of at most `capacity` transitions, oldest overwritten first;
///  - full_coverage: exactly one transition per (state, action), filled once
///    from the model by fill_exhaustive and read-only afterwards.
class ReplayBuffer {
public:
    static ReplayBuffer fifo(std::size_t capacity);
    static ReplayBuffer full_coverage();

    ReplayMode mode() const { return mode_; }
    std::size_t capacity() const { return capacity_; }
    std::size_t size() const { return storage_.size(); }
    bool empty() const { return storage_.empty(); }

    /// Throws InvalidOperation in full-coverage mode.
    void push(const Transition& t);

    /// Enumerates every (s, a) of a deterministic MDP with its true successor and
    /// reward. Terminal states appear as zero-reward self-loops with done = true.
    /// Throws InvalidOperation in fifo mode and Unsupported for stochastic MDPs.
    void fill_exhaustive(const MdpSpec& mdp);

    /// i-th stored transition, oldest first.
    const Transition& at(std::size_t i) const;
    std::vector<Transition> contents() const;

    /// Uniform indices with replacement; throws InvalidOperation when empty and batch_size > 0.
    std::vector<std::size_t> sample_indices(std::size_t batch_size, Rng& rng) const;
    std::vector<Transition> sample_minibatch(std::size_t batch_size, Rng& rng) const;

private:
    ReplayBuffer(ReplayMode mode, std::size_t capacity) : mode_(mode), capacity_(capacity) {}

    ReplayMode mode_;
    std::size_t capacity_;
    std::vector<Transition> storage_;
    std::size_t head_ = 0;  // oldest slot once the ring is full
};

}  // namespace avgdqn
