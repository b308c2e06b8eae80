#pragma once

#include <cstddef>
#include <cstdint>

namespace avgdqn {

/// Streaming central moments up to the fourth (Welford / Pebay updates), with
/// an exact pairwise merge so independently accumulated chunks can be pooled.
class RunningMoments {
public:
    void add(double x);
    void merge(const RunningMoments& other);

    std::uint64_t count() const { return n_; }
    double mean() const { return mean_; }
    /// Sample variance (n - 1 denominator); 0 for fewer than two samples.
    double variance() const;
    /// Standard error of the mean.
    double mean_standard_error() const;
    /// Standard error of variance(), from the sample fourth moment.
    double variance_standard_error() const;

private:
    std::uint64_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
    double m3_ = 0.0;
    double m4_ = 0.0;
};

}  // namespace avgdqn
