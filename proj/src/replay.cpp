#include "avgdqn/replay.hpp"

#include <stdexcept>

#include "avgdqn/errors.hpp"

namespace avgdqn {

ReplayBuffer ReplayBuffer::fifo(std::size_t capacity) {
    if (capacity == 0) throw std::invalid_argument("replay capacity must be positive");
    return ReplayBuffer(ReplayMode::fifo, capacity);
}

ReplayBuffer ReplayBuffer::full_coverage() { return ReplayBuffer(ReplayMode::full_coverage, 0); }

void ReplayBuffer::push(const Transition& t) {
    if (mode_ != ReplayMode::fifo) throw InvalidOperation("push into a full-coverage replay buffer");
    if (storage_.size() < capacity_) {
        storage_.push_back(t);
        return;
    }
    storage_[head_] = t;
    head_ = (head_ + 1) % capacity_;
}

void ReplayBuffer::fill_exhaustive(const MdpSpec& mdp) {
    if (mode_ != ReplayMode::full_coverage) throw InvalidOperation("fill_exhaustive on a fifo replay buffer");
    if (!mdp.is_deterministic()) throw Unsupported("fill_exhaustive needs a deterministic MDP");
    storage_.clear();
    head_ = 0;
    storage_.reserve(mdp.num_states() * mdp.num_actions());
    for (State s = 0; s < mdp.num_states(); ++s) {
        for (Action a = 0; a < mdp.num_actions(); ++a) {
            if (mdp.is_terminal(s)) {
                storage_.push_back({s, a, 0.0, s, true});
                continue;
            }
            const State next = *mdp.deterministic_successor(s, a);
            storage_.push_back({s, a, mdp.reward(s, a, next), next, mdp.is_terminal(next)});
        }
    }
    capacity_ = storage_.size();
}

const Transition& ReplayBuffer::at(std::size_t i) const {
    if (i >= storage_.size()) throw std::out_of_range("replay index out of range");
    return storage_[(head_ + i) % storage_.size()];
}

std::vector<Transition> ReplayBuffer::contents() const {
    std::vector<Transition> out;
    out.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) out.push_back(at(i));
    return out;
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t batch_size, Rng& rng) const {
    if (batch_size == 0) return {};
    if (storage_.empty()) throw InvalidOperation("sampling from an empty replay buffer");
    std::uniform_int_distribution<std::size_t> pick(0, storage_.size() - 1);
    std::vector<std::size_t> idx(batch_size);
    for (auto& i : idx) i = pick(rng);
    return idx;
}

std::vector<Transition> ReplayBuffer::sample_minibatch(std::size_t batch_size, Rng& rng) const {
    std::vector<Transition> batch;
    batch.reserve(batch_size);
    for (std::size_t i : sample_indices(batch_size, rng)) batch.push_back(at(i));
    return batch;
}

}  // namespace avgdqn
