#include <doctest.h>

#include <cmath>
#include <random>

#include "avgdqn/random.hpp"
#include "avgdqn/stats.hpp"

using namespace avgdqn;

TEST_CASE("running moments match a two-pass computation") {
    Rng rng = make_rng(5);
    std::exponential_distribution<double> e(0.5);
    std::vector<double> xs(5000);
    for (auto& x : xs) x = e(rng) + 1e6;  // large offset on purpose
    RunningMoments rm;
    for (double x : xs) rm.add(x);
    double mean = 0.0;
    for (double x : xs) mean += x / double(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    CHECK(rm.count() == xs.size());
    CHECK(rm.mean() == doctest::Approx(mean).epsilon(1e-14));
    CHECK(rm.variance() == doctest::Approx(ss / double(xs.size() - 1)).epsilon(1e-9));
    CHECK(rm.mean_standard_error() == doctest::Approx(std::sqrt(rm.variance() / double(xs.size()))));
}

TEST_CASE("merging chunks equals one pass") {
    Rng rng = make_rng(6);
    std::normal_distribution<double> n(3.0, 2.0);
    RunningMoments all, a, b, c;
    for (int i = 0; i < 3000; ++i) {
        const double x = n(rng);
        all.add(x);
        (i < 1000 ? a : i < 1100 ? b : c).add(x);
    }
    RunningMoments merged;
    merged.merge(a);
    merged.merge(b);
    merged.merge(c);
    merged.merge(RunningMoments{});
    CHECK(merged.count() == all.count());
    CHECK(merged.mean() == doctest::Approx(all.mean()).epsilon(1e-12));
    CHECK(merged.variance() == doctest::Approx(all.variance()).epsilon(1e-12));
    CHECK(merged.variance_standard_error() == doctest::Approx(all.variance_standard_error()).epsilon(1e-9));
}

TEST_CASE("variance standard error of gaussian data") {
    Rng rng = make_rng(7);
    std::normal_distribution<double> n(0.0, 1.5);
    RunningMoments rm;
    const int N = 200000;
    for (int i = 0; i < N; ++i) rm.add(n(rng));
    // For a normal sample, se(s^2) = sigma^2 sqrt(2 / (n - 1)).
    CHECK(rm.variance_standard_error() == doctest::Approx(2.25 * std::sqrt(2.0 / (N - 1))).epsilon(0.03));
}

TEST_CASE("degenerate counts") {
    RunningMoments rm;
    CHECK(rm.variance() == 0.0);
    rm.add(4.0);
    CHECK(rm.mean() == 4.0);
    CHECK(rm.variance() == 0.0);
}
