#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "avgdqn/agents.hpp"

namespace avgdqn {

/// Statistical model of the target approximation error on the M-state chain:
/// zero-mean errors with per-state standard deviation sigma[m], uncorrelated
/// across iterations, states and ensemble members.
struct TaeModel {
    std::size_t M = 2;
    std::vector<double> sigma;
    double gamma = 0.9;
    std::size_t K = 1;

    static TaeModel uniform(std::size_t M, double sigma, double gamma, std::size_t K);
    /// Throws std::invalid_argument unless M >= 2, K >= 1, sigma.size() == M, sigma >= 0, gamma in [0, 1].
    void validate() const;
};

struct VarianceReport {
    double dqn_var = 0.0;
    double ensemble_var = 0.0;
    double averaged_var = 0.0;
    /// D_{K,m} for m = 0..M-1.
    std::vector<double> d_coeffs;
};

/// sum_m gamma^{2m} sigma_m^2.
double dqn_variance(const TaeModel& model);
/// dqn_variance / K.
double ensemble_variance(const TaeModel& model);
/// sum_m D_{K,m} gamma^{2m} sigma_m^2.
double averaged_variance(const TaeModel& model);
VarianceReport analyze_variance(const TaeModel& model);

/// n_{j,L}: tuples (i_1..i_L) in {1..K}^L summing to j, for j = 0..K*L, built by
/// repeated convolution with the width-K pulse. Throws std::overflow_error if a
/// count exceeds 64 bits.
std::vector<std::uint64_t> solution_counts(std::size_t L, std::size_t K);
/// Single entry of solution_counts; 0 outside [L, K*L].
std::uint64_t count_solutions(long long j, std::size_t L, std::size_t K);

/// Length-N DFT of the indicator of {1..K}.
struct RectPulseDft {
    std::size_t K = 0;
    std::size_t N = 0;
    std::vector<std::complex<double>> U;
};

RectPulseDft rect_pulse_dft(std::size_t K, std::size_t N);

/// Smallest power of two >= 2 K (m + 1) + 1.
std::size_t default_dft_length(std::size_t K, std::size_t m);

/// (1/N) sum_n |U_n / K|^{2(m+1)}. Throws std::invalid_argument if N < K (m + 1) + 1.
double d_coefficient_dft(std::size_t K, std::size_t m, std::size_t N);
double d_coefficient_dft(std::size_t K, std::size_t m);

/// sum_j n_{j,m+1}^2 / K^{2(m+1)}. Throws std::invalid_argument if K (m + 1) > 64.
double d_coefficient_bruteforce(std::size_t K, std::size_t m);

/// Worst-case expected overestimation gamma * eps * (n - 1) / (n + 1).
double thrun_schwartz_bound(std::size_t n_actions, double epsilon, double gamma);

struct MonteCarloEstimate {
    double value = 0.0;
    double standard_error = 0.0;
    std::uint64_t samples = 0;
};

/// gamma * E[max of n iid Uniform(-eps, eps)] by sampling.
MonteCarloEstimate sample_expected_max_uniform(std::size_t n_actions, double epsilon, double gamma,
                                               std::uint64_t samples, std::uint64_t seed);

struct TaeSimulation {
    double variance = 0.0;
    double standard_error = 0.0;
    double mean = 0.0;
    std::uint64_t trials = 0;
    std::size_t iterations = 0;
};

/// 5 K M + 1: the final iteration follows a 5 K M burn-in.
std::size_t default_tae_iterations(const TaeModel& model);

/// Runs the error recursion Q_i = Z_i + gamma P mean_k Q_{i-k} on the chain from
/// an all-zero history with Gaussian Z, and returns the sample variance of the
/// algorithm's start-state estimate at the final iteration across trials.
///
/// dqn uses K = 1; ensemble averages K independent learners fed the same
/// target; averaged reports the mean of the last K iterates. Trials are split
/// into fixed chunks with derived streams, so results do not depend on `workers`.
/// Throws std::invalid_argument unless iterations > K M.
TaeSimulation simulate_tae_recursion(const TaeModel& model, Algorithm algorithm, std::uint64_t trials,
                                     std::size_t iterations, std::uint64_t seed, std::size_t workers = 1);

}  // namespace avgdqn
