#include "avgdqn/tae.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <thread>

#include "avgdqn/random.hpp"
#include "avgdqn/stats.hpp"

namespace avgdqn {

namespace {

constexpr std::size_t kBruteforceSupportLimit = 64;
constexpr std::uint64_t kChunks = 64;

// One trial of the recursion; returns the algorithm's start-state estimate.
class ChainRecursion {
public:
    ChainRecursion(const TaeModel& model, Algorithm algo)
        : model_(model),
          algo_(algo),
          K_(algo == Algorithm::dqn ? 1 : model.K),
          history_(K_ * model.M, 0.0),
          members_(algo == Algorithm::ensemble ? K_ * model.M : 0, 0.0),
          bootstrap_(model.M, 0.0) {}

    double run(std::size_t iterations, Rng& rng) {
        std::fill(history_.begin(), history_.end(), 0.0);
        std::fill(members_.begin(), members_.end(), 0.0);
        head_ = 0;
        for (std::size_t i = 0; i < iterations; ++i) step(rng);
        return estimate();
    }

private:
    const double* iterate(std::size_t age) const {  // age 0 = newest
        return history_.data() + ((head_ + K_ - age) % K_) * model_.M;
    }

    void step(Rng& rng) {
        const std::size_t M = model_.M;
        // gamma * P * (mean of the K previous iterates): state m bootstraps from m + 1,
        // the terminal state from nothing.
        for (std::size_t m = 0; m + 1 < M; ++m) {
            double acc = 0.0;
            if (algo_ == Algorithm::averaged) {
                for (std::size_t k = 0; k < K_; ++k) acc += iterate(k)[m + 1];
                acc /= static_cast<double>(K_);
            } else {
                acc = iterate(0)[m + 1];
            }
            bootstrap_[m] = model_.gamma * acc;
        }
        bootstrap_[M - 1] = 0.0;

        head_ = (head_ + 1) % K_;
        double* next = history_.data() + head_ * M;
        if (algo_ == Algorithm::ensemble) {
            std::fill(next, next + M, 0.0);
            for (std::size_t k = 0; k < K_; ++k) {
                double* member = members_.data() + k * M;
                for (std::size_t m = 0; m < M; ++m) {
                    member[m] = model_.sigma[m] * normal_(rng) + bootstrap_[m];
                    next[m] += member[m];
                }
            }
            for (std::size_t m = 0; m < M; ++m) next[m] /= static_cast<double>(K_);
        } else {
            for (std::size_t m = 0; m < M; ++m) next[m] = model_.sigma[m] * normal_(rng) + bootstrap_[m];
        }
    }

    double estimate() const {
        if (algo_ != Algorithm::averaged) return iterate(0)[0];
        double acc = 0.0;
        for (std::size_t k = 0; k < K_; ++k) acc += iterate(k)[0];
        return acc / static_cast<double>(K_);
    }

    const TaeModel& model_;
    Algorithm algo_;
    std::size_t K_;
    // Ring of the last K iterates (the ensemble mean for ensemble), newest at head_.
    std::vector<double> history_;
    std::vector<double> members_;
    std::vector<double> bootstrap_;
    std::size_t head_ = 0;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

template <typename Fn>
void run_chunks(std::uint64_t chunks, std::size_t workers, Fn&& fn) {
    workers = std::max<std::size_t>(1, std::min<std::uint64_t>(workers, chunks));
    if (workers == 1) {
        for (std::uint64_t c = 0; c < chunks; ++c) fn(c);
        return;
    }
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            for (std::uint64_t c = w; c < chunks; c += workers) fn(c);
        });
    for (auto& t : pool) t.join();
}

}  // namespace

TaeModel TaeModel::uniform(std::size_t M, double sigma, double gamma, std::size_t K) {
    TaeModel m{M, std::vector<double>(M, sigma), gamma, K};
    m.validate();
    return m;
}

void TaeModel::validate() const {
    if (M < 2) throw std::invalid_argument("TaeModel: M must be at least 2");
    if (K < 1) throw std::invalid_argument("TaeModel: K must be at least 1");
    if (sigma.size() != M) throw std::invalid_argument("TaeModel: need one sigma per state");
    for (double s : sigma)
        if (!(s >= 0.0) || !std::isfinite(s)) throw std::invalid_argument("TaeModel: sigma must be finite and >= 0");
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("TaeModel: gamma must lie in [0, 1]");
}

double dqn_variance(const TaeModel& model) {
    model.validate();
    double acc = 0.0, g2m = 1.0;
    for (std::size_t m = 0; m < model.M; ++m) {
        acc += g2m * model.sigma[m] * model.sigma[m];
        g2m *= model.gamma * model.gamma;
    }
    return acc;
}

double ensemble_variance(const TaeModel& model) { return dqn_variance(model) / static_cast<double>(model.K); }

double averaged_variance(const TaeModel& model) {
    model.validate();
    double acc = 0.0, g2m = 1.0;
    for (std::size_t m = 0; m < model.M; ++m) {
        acc += d_coefficient_dft(model.K, m) * g2m * model.sigma[m] * model.sigma[m];
        g2m *= model.gamma * model.gamma;
    }
    return acc;
}

VarianceReport analyze_variance(const TaeModel& model) {
    VarianceReport r;
    r.dqn_var = dqn_variance(model);
    r.ensemble_var = ensemble_variance(model);
    r.averaged_var = averaged_variance(model);
    for (std::size_t m = 0; m < model.M; ++m) r.d_coeffs.push_back(d_coefficient_dft(model.K, m));
    return r;
}

std::vector<std::uint64_t> solution_counts(std::size_t L, std::size_t K) {
    if (K == 0) throw std::invalid_argument("solution_counts: K must be positive");
    // L = 0: only the empty tuple, summing to 0.
    std::vector<std::uint64_t> counts{1};
    for (std::size_t level = 1; level <= L; ++level) {
        std::vector<std::uint64_t> next(level * K + 1, 0);
        for (std::size_t j = 0; j < next.size(); ++j) {
            std::uint64_t acc = 0;
            for (std::size_t i = 1; i <= K && i <= j; ++i) {
                if (j - i >= counts.size()) continue;
                const std::uint64_t c = counts[j - i];
                if (acc > std::numeric_limits<std::uint64_t>::max() - c)
                    throw std::overflow_error("solution_counts: count exceeds 64 bits");
                acc += c;
            }
            next[j] = acc;
        }
        counts.swap(next);
    }
    return counts;
}

std::uint64_t count_solutions(long long j, std::size_t L, std::size_t K) {
    if (j < 0 || L == 0 || K == 0) return 0;
    if (static_cast<unsigned long long>(j) > L * K) return 0;
    return solution_counts(L, K)[static_cast<std::size_t>(j)];
}

RectPulseDft rect_pulse_dft(std::size_t K, std::size_t N) {
    if (K == 0) throw std::invalid_argument("rect_pulse_dft: K must be positive");
    if (N <= K) throw std::invalid_argument("rect_pulse_dft: N must exceed K");
    std::vector<double> u(N, 0.0);
    for (std::size_t j = 1; j <= K; ++j) u[j] = 1.0;

    RectPulseDft out{K, N, std::vector<std::complex<double>>(N)};
    for (std::size_t n = 0; n < N; ++n) {
        std::complex<double> acc = 0.0;
        for (std::size_t j = 0; j < N; ++j) {
            if (u[j] == 0.0) continue;
            // Reduce j*n mod N first so the twiddle angle stays in [0, 2 pi).
            const double angle = -2.0 * std::numbers::pi * static_cast<double>((j * n) % N) / static_cast<double>(N);
            acc += u[j] * std::polar(1.0, angle);
        }
        out.U[n] = acc;
    }
    return out;
}

std::size_t default_dft_length(std::size_t K, std::size_t m) {
    const std::size_t need = 2 * K * (m + 1) + 1;
    std::size_t n = 1;
    while (n < need) n <<= 1;
    return n;
}

double d_coefficient_dft(std::size_t K, std::size_t m, std::size_t N) {
    if (K == 0) throw std::invalid_argument("d_coefficient_dft: K must be positive");
    if (N < K * (m + 1) + 1)
        throw std::invalid_argument("d_coefficient_dft: N must be at least K (m + 1) + 1 to hold the convolution");
    const auto dft = rect_pulse_dft(K, N);
    const double power = 2.0 * static_cast<double>(m + 1);
    double acc = 0.0;
    for (const auto& U : dft.U) acc += std::pow(std::abs(U) / static_cast<double>(K), power);
    return acc / static_cast<double>(N);
}

double d_coefficient_dft(std::size_t K, std::size_t m) { return d_coefficient_dft(K, m, default_dft_length(K, m)); }

double d_coefficient_bruteforce(std::size_t K, std::size_t m) {
    if (K == 0) throw std::invalid_argument("d_coefficient_bruteforce: K must be positive");
    const std::size_t L = m + 1;
    if (K * L > kBruteforceSupportLimit)
        throw std::invalid_argument("d_coefficient_bruteforce: K (m + 1) exceeds 64");
    long double sum_sq = 0.0L;
    for (std::uint64_t n : solution_counts(L, K)) sum_sq += static_cast<long double>(n) * static_cast<long double>(n);
    const long double denom = std::pow(static_cast<long double>(K), static_cast<long double>(2 * L));
    return static_cast<double>(sum_sq / denom);
}

double thrun_schwartz_bound(std::size_t n_actions, double epsilon, double gamma) {
    if (n_actions < 1) throw std::invalid_argument("thrun_schwartz_bound: need at least one action");
    if (!(epsilon >= 0.0)) throw std::invalid_argument("thrun_schwartz_bound: epsilon must be >= 0");
    const double n = static_cast<double>(n_actions);
    return gamma * epsilon * (n - 1.0) / (n + 1.0);
}

MonteCarloEstimate sample_expected_max_uniform(std::size_t n_actions, double epsilon, double gamma,
                                               std::uint64_t samples, std::uint64_t seed) {
    if (n_actions < 1) throw std::invalid_argument("sample_expected_max_uniform: need at least one action");
    Rng rng = make_rng(seed, 0);
    std::uniform_real_distribution<double> z(-epsilon, epsilon);
    RunningMoments acc;
    for (std::uint64_t i = 0; i < samples; ++i) {
        double best = z(rng);
        for (std::size_t a = 1; a < n_actions; ++a) best = std::max(best, z(rng));
        acc.add(gamma * best);
    }
    return {acc.mean(), acc.mean_standard_error(), acc.count()};
}

std::size_t default_tae_iterations(const TaeModel& model) { return 5 * model.K * model.M + 1; }

TaeSimulation simulate_tae_recursion(const TaeModel& model, Algorithm algorithm, std::uint64_t trials,
                                     std::size_t iterations, std::uint64_t seed, std::size_t workers) {
    model.validate();
    const std::size_t K = algorithm == Algorithm::dqn ? 1 : model.K;
    if (iterations <= K * model.M)
        throw std::invalid_argument("simulate_tae_recursion: iterations must exceed K * M for stationarity");

    const std::uint64_t chunks = std::min<std::uint64_t>(kChunks, std::max<std::uint64_t>(trials, 1));
    std::vector<RunningMoments> partial(chunks);
    run_chunks(chunks, workers, [&](std::uint64_t c) {
        const std::uint64_t begin = trials * c / chunks, end = trials * (c + 1) / chunks;
        Rng rng = make_rng(seed, c);
        ChainRecursion chain(model, algorithm);
        for (std::uint64_t t = begin; t < end; ++t) partial[c].add(chain.run(iterations, rng));
    });

    RunningMoments pooled;
    for (const auto& p : partial) pooled.merge(p);
    return {pooled.variance(), pooled.variance_standard_error(), pooled.mean(), pooled.count(), iterations};
}

}  // namespace avgdqn
