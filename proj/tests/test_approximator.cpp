#include <doctest.h>

#include <cmath>
#include <sstream>

#include "avgdqn/approximator.hpp"

using namespace avgdqn;

namespace {

// Straightforward dense evaluation written against the documented layout.
std::vector<double> naive_forward(const ParameterSet& p, const std::vector<double>& x) {
    const std::size_t I = p.shape[0], H = p.shape[1], O = p.shape[2];
    const double* w1 = p.values.data();
    const double* b1 = w1 + I * H;
    const double* w2 = b1 + H;
    const double* b2 = w2 + O * H;
    std::vector<double> h(H), out(O);
    for (std::size_t k = 0; k < H; ++k) {
        double z = b1[k];
        for (std::size_t j = 0; j < I; ++j) z += w1[j * H + k] * x[j];
        h[k] = z > 0 ? z : 0.0;
    }
    for (std::size_t o = 0; o < O; ++o) {
        double z = b2[o];
        for (std::size_t k = 0; k < H; ++k) z += w2[o * H + k] * h[k];
        out[o] = z;
    }
    return out;
}

double half_sq_loss(const ParameterSet& p, const std::vector<double>& x, Action a, double t) {
    const double d = naive_forward(p, x)[a] - t;
    return 0.5 * d * d;
}

std::vector<double> random_vector(std::size_t n, Rng& rng, double lo = -1, double hi = 1) {
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

}  // namespace

TEST_CASE("zero parameters give zero output") {
    ParameterSet p{ModelKind::mlp, {3, 4, 2}, std::vector<double>(MlpArchitecture{3, 4, 2}.parameter_count(), 0.0)};
    const std::vector<double> x{0.3, -2.0, 5.0};
    for (double v : mlp_forward(p, x)) CHECK(v == 0.0);
}

TEST_CASE("single hidden unit acts as a relu") {
    // w1 = 1, b1 = 0, w2 = 1, b2 = 0.
    ParameterSet p{ModelKind::mlp, {1, 1, 1}, {1.0, 0.0, 1.0, 0.0}};
    CHECK(mlp_forward(p, std::vector<double>{2.0})[0] == 2.0);
    CHECK(mlp_forward(p, std::vector<double>{-2.0})[0] == 0.0);
}

TEST_CASE("forward matches a dense multiply on one-hot and dense inputs") {
    Rng rng = make_rng(3);
    const MlpArchitecture arch{12, 9, 4};
    const auto p = mlp_init(arch, rng);
    for (std::size_t s = 0; s < 12; ++s) {
        std::vector<double> x(12, 0.0);
        x[s] = 1.0;
        const auto got = mlp_forward(p, x);
        const auto want = naive_forward(p, x);
        for (std::size_t o = 0; o < 4; ++o) CHECK(got[o] == doctest::Approx(want[o]).epsilon(1e-14));
    }
    const auto x = random_vector(12, rng);
    const auto got = mlp_forward(p, x);
    const auto want = naive_forward(p, x);
    for (std::size_t o = 0; o < 4; ++o) CHECK(got[o] == doctest::Approx(want[o]).epsilon(1e-12));
    CHECK_THROWS_AS(mlp_forward(p, std::vector<double>(11, 0.0)), std::invalid_argument);
}

TEST_CASE("init stays inside 1/sqrt(fan_in)") {
    Rng rng = make_rng(9);
    const MlpArchitecture arch{16, 10, 3};
    const auto p = mlp_init(arch, rng);
    CHECK(p.values.size() == arch.parameter_count());
    const double b1 = 1.0 / 4.0, b2 = 1.0 / std::sqrt(10.0);
    const std::size_t n1 = 16 * 10 + 10;
    for (std::size_t i = 0; i < p.values.size(); ++i) CHECK(std::abs(p.values[i]) <= (i < n1 ? b1 : b2));
}

TEST_CASE("backward: zero residual gives zero gradient, doubling residual doubles it") {
    Rng rng = make_rng(5);
    const auto p = mlp_init({6, 5, 3}, rng);
    const auto x = random_vector(6, rng);
    const double pred = mlp_forward(p, x)[1];
    for (double g : mlp_backward(p, x, 1, pred).values) CHECK(g == 0.0);
    const auto g1 = mlp_backward(p, x, 1, pred - 0.5);
    const auto g2 = mlp_backward(p, x, 1, pred - 1.0);
    for (std::size_t i = 0; i < g1.values.size(); ++i) CHECK(g2.values[i] == doctest::Approx(2 * g1.values[i]));
    CHECK_THROWS_AS(mlp_backward(p, x, 1, NAN), std::invalid_argument);
    CHECK_THROWS_AS(mlp_backward(p, x, 1, INFINITY), std::invalid_argument);
    CHECK_THROWS_AS(mlp_backward(p, x, 3, 0.0), std::invalid_argument);
}

TEST_CASE("backward matches central differences") {
    Rng rng = make_rng(11);
    const double h = 1e-5;
    for (int c = 0; c < 20; ++c) {
        std::uniform_int_distribution<std::size_t> dim(1, 7);
        const MlpArchitecture arch{dim(rng), dim(rng), dim(rng)};
        auto p = mlp_init(arch, rng);
        const auto x = random_vector(arch.input_dim, rng, -2, 2);
        const Action a = std::uniform_int_distribution<std::size_t>(0, arch.output_dim - 1)(rng);
        const double t = std::uniform_real_distribution<double>(-3, 3)(rng);
        const auto g = mlp_backward(p, x, a, t);
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < p.values.size(); ++i) {
            const double keep = p.values[i];
            p.values[i] = keep + h;
            const double up = half_sq_loss(p, x, a, t);
            p.values[i] = keep - h;
            const double dn = half_sq_loss(p, x, a, t);
            p.values[i] = keep;
            const double fd = (up - dn) / (2 * h);
            num += (fd - g.values[i]) * (fd - g.values[i]);
            den = std::max(den, std::max(fd * fd, g.values[i] * g.values[i]));
        }
        if (den > 0) CHECK(std::sqrt(num / den) < 1e-4);
    }
}

TEST_CASE("adam: zero gradient is a no-op, first step moves by the learning rate") {
    OptimizerConfig cfg;
    cfg.learning_rate = 0.01;
    std::vector<double> w{1.0, -2.0, 0.5};
    const auto w0 = w;
    AdamState st(3);
    adam_step(w, std::vector<double>(3, 0.0), st, cfg);
    CHECK(w == w0);

    AdamState st2(3);
    adam_step(w, std::vector<double>{0.3, -4.0, 100.0}, st2, cfg);
    CHECK(w[0] == doctest::Approx(w0[0] - 0.01).epsilon(1e-6));
    CHECK(w[1] == doctest::Approx(w0[1] + 0.01).epsilon(1e-6));
    CHECK(w[2] == doctest::Approx(w0[2] - 0.01).epsilon(1e-6));

    AdamState bad(2);
    CHECK_THROWS_AS(adam_step(w, std::vector<double>(3, 0.0), bad, cfg), std::invalid_argument);
}

TEST_CASE("adam matches the textbook update over many steps") {
    OptimizerConfig cfg;
    cfg.learning_rate = 0.003;
    Rng rng = make_rng(17);
    std::vector<double> w = random_vector(8, rng), ref = w, m(8, 0.0), v(8, 0.0);
    AdamState st(8);
    for (int t = 1; t <= 200; ++t) {
        const auto g = random_vector(8, rng);
        adam_step(w, g, st, cfg);
        for (std::size_t i = 0; i < 8; ++i) {
            m[i] = cfg.beta1 * m[i] + (1 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1 - cfg.beta2) * g[i] * g[i];
            const double mh = m[i] / (1 - std::pow(cfg.beta1, t));
            const double vh = v[i] / (1 - std::pow(cfg.beta2, t));
            ref[i] -= cfg.learning_rate * mh / (std::sqrt(vh) + cfg.epsilon);
        }
    }
    for (std::size_t i = 0; i < 8; ++i) CHECK(w[i] == doctest::Approx(ref[i]).epsilon(1e-10));
}

TEST_CASE("adam minimizes w^2") {
    OptimizerConfig cfg;
    cfg.learning_rate = 0.01;
    std::vector<double> w{1.0};
    AdamState st(1);
    for (int i = 0; i < 500; ++i) adam_step(w, std::vector<double>{2 * w[0]}, st, cfg);
    CHECK(std::abs(w[0]) < 0.05);
}

TEST_CASE("sgd step") {
    OptimizerConfig cfg;
    cfg.kind = OptimizerKind::sgd;
    cfg.learning_rate = 0.5;
    std::vector<double> w{1.0, 2.0};
    sgd_step(w, std::vector<double>{2.0, -2.0}, cfg);
    CHECK(w == std::vector<double>{0.0, 3.0});
}

TEST_CASE("tabular fit") {
    ParameterSet t{ModelKind::tabular, {2, 2}, {0.0, 0.0, 0.0, 0.0}};
    const std::vector<TabularSample> one{{1, 0, 5.0}};
    tabular_fit(t, one, 1.0);
    CHECK(t.values[2] == 5.0);
    tabular_fit(t, std::vector<TabularSample>{{1, 0, -7.0}}, 0.0);
    CHECK(t.values[2] == 5.0);
    tabular_fit(t, std::vector<TabularSample>{{0, 1, 1.0}}, 0.5);
    tabular_fit(t, std::vector<TabularSample>{{0, 1, 1.0}}, 0.5);
    CHECK(t.values[1] == 0.75);
    CHECK_THROWS_AS(tabular_fit(t, std::vector<TabularSample>{{2, 0, 1.0}}, 1.0), std::invalid_argument);
}

TEST_CASE("TabularQ predicts its table and rejects non one-hot features") {
    TabularQ q(3, 2, 1.0);
    std::vector<double> x{0.0, 1.0, 0.0};
    const std::vector<FitSample> batch{{x, 1, 4.0}};
    CHECK(q.fit_minibatch(batch) == doctest::Approx(8.0));
    CHECK(q.predict(x) == std::vector<double>{0.0, 4.0});
    CHECK(q.update_count() == 1);
    CHECK_THROWS(q.predict(std::vector<double>{0.0, 0.0, 0.0}));
    CHECK_THROWS(TabularQ(3, 2, 1.5));
}

TEST_CASE("MlpQ overfits ten pairs") {
    Rng rng = make_rng(21);
    OptimizerConfig cfg;
    cfg.learning_rate = 0.01;
    MlpQ net({10, 32, 2}, cfg, rng);
    std::vector<std::vector<double>> xs(10, std::vector<double>(10, 0.0));
    std::vector<FitSample> batch;
    for (std::size_t i = 0; i < 10; ++i) {
        xs[i][i] = 1.0;
        batch.push_back({xs[i], i % 2, std::sin(double(i))});
    }
    double loss = 0.0;
    for (int step = 0; step < 2000; ++step) loss = net.fit_minibatch(batch);
    double mse = 0.0;
    for (const auto& b : batch) {
        const double d = net.predict(b.features)[b.action] - b.target;
        mse += d * d / 10;
    }
    CHECK(mse < 1e-3);
    CHECK(loss < 1e-3);
    CHECK(net.update_count() == 2000);
}

TEST_CASE("MlpQ fit equals one optimizer step on the batch-mean gradient") {
    Rng rng = make_rng(4);
    OptimizerConfig cfg;
    cfg.learning_rate = 0.02;
    MlpQ net({5, 6, 3}, cfg, rng);
    const auto p0 = net.snapshot();
    std::vector<double> x0 = random_vector(5, rng), x1 = random_vector(5, rng);
    const std::vector<FitSample> batch{{x0, 0, 1.0}, {x1, 2, -1.0}};
    net.fit_minibatch(batch);

    auto ga = mlp_backward(p0, x0, 0, 1.0), gb = mlp_backward(p0, x1, 2, -1.0);
    std::vector<double> g(ga.values.size());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = (ga.values[i] + gb.values[i]) / 2;
    auto w = p0.values;
    AdamState st(w.size());
    adam_step(w, g, st, cfg);
    const auto p1 = net.snapshot();
    for (std::size_t i = 0; i < w.size(); ++i) CHECK(p1.values[i] == doctest::Approx(w[i]).epsilon(1e-12));
}

TEST_CASE("same seed, same trajectory; snapshot and load round-trip") {
    auto run = [](std::uint64_t seed) {
        Rng rng = make_rng(seed);
        MlpQ net({4, 8, 2}, OptimizerConfig{}, rng);
        Rng data = make_rng(seed, 1);
        for (int i = 0; i < 50; ++i) {
            auto x = random_vector(4, data);
            const std::vector<FitSample> b{{x, std::size_t(i % 2), double(i % 3)}};
            net.fit_minibatch(b);
        }
        return net.snapshot();
    };
    CHECK(run(1) == run(1));
    CHECK_FALSE(run(1) == run(2));

    Rng rng = make_rng(8);
    MlpQ a({4, 8, 2}, OptimizerConfig{}, rng);
    MlpQ b({4, 8, 2}, OptimizerConfig{}, rng);
    CHECK_FALSE(a.snapshot() == b.snapshot());
    b.load(a.snapshot());
    CHECK(a.snapshot() == b.snapshot());
    CHECK_THROWS(b.load(ParameterSet{ModelKind::mlp, {4, 7, 2}, std::vector<double>(MlpArchitecture{4, 7, 2}.parameter_count())}));

    std::stringstream ss;
    write_parameters(ss, a.snapshot());
    CHECK(read_parameters(ss) == a.snapshot());

    TabularQ t(2, 3, 1.0, 0.5, rng);
    std::stringstream ts;
    write_parameters(ts, t.snapshot());
    CHECK(read_parameters(ts) == t.snapshot());
}

TEST_CASE("parameter validation") {
    ParameterSet p{ModelKind::mlp, {2, 2, 1}, std::vector<double>(9, 0.0)};
    CHECK_NOTHROW(p.validate());
    p.values.pop_back();
    CHECK_THROWS(p.validate());
    ParameterSet t{ModelKind::tabular, {2, 2}, {0.0, 1.0, NAN, 0.0}};
    CHECK_THROWS(t.validate());
    std::stringstream bad("# avgdqn-params v1\nkind mlp\nshape 2 2 1\ncount 9\n1\n2\n");
    CHECK_THROWS(read_parameters(bad));
}
