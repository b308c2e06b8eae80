// avgdqn: command-line front end for the experiment harness and the
// variance tools.
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "avgdqn/config.hpp"
#include "avgdqn/harness.hpp"
#include "avgdqn/tae.hpp"
#include "avgdqn/text.hpp"
#include "avgdqn/value_oracle.hpp"

using namespace avgdqn;

namespace {

struct RunArgs {
    std::string preset;
    std::vector<std::string> sets;
    std::string config_file;
    int seeds = -1;
    int workers = -1;
    std::string out = "out";
};

struct VarianceArgs {
    std::size_t K = 2;
    std::size_t M = 2;
    double gamma = 0.9;
    std::vector<double> sigma{1.0};
};

struct SimulateArgs {
    VarianceArgs model;
    std::string algo = "all";
    std::uint64_t trials = 100000;
    std::size_t iterations = 0;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
};

struct ValueIterationArgs {
    std::string env = "gridworld";
    std::size_t width = 20, height = 20;
    std::size_t length = 5;
    double gamma = 0.9;
    double tol = 1e-10;
    std::string q_csv;
};

TaeModel make_model(const VarianceArgs& a) {
    TaeModel m;
    m.M = a.M;
    m.gamma = a.gamma;
    m.K = a.K;
    if (a.sigma.size() == 1)
        m.sigma.assign(a.M, a.sigma[0]);
    else
        m.sigma = a.sigma;
    m.validate();
    return m;
}

void add_model_options(CLI::App* cmd, VarianceArgs& a) {
    cmd->add_option("--K", a.K, "networks averaged / in the ensemble")->check(CLI::PositiveNumber);
    cmd->add_option("--M", a.M, "chain length")->check(CLI::Range(2, 1 << 20));
    cmd->add_option("--gamma", a.gamma, "discount")->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--sigma", a.sigma, "TAE std: one value for every state or M comma-separated values")
        ->delimiter(',');
}

int cmd_run(const RunArgs& a) {
    Config config = preset_config(a.preset);
    if (!a.config_file.empty()) {
        std::ifstream in(a.config_file);
        if (!in) throw std::runtime_error("cannot read " + a.config_file);
        const Config file = Config::parse(in);
        const Config defaults;
        // Only keys the file actually changes from the defaults override the preset.
        for (const auto& [k, v] : file.entries())
            if (v != defaults.get(k)) config.set(k, v);
    }
    for (const auto& s : a.sets) config.apply(s);
    if (a.seeds >= 0) config.set("seeds", std::to_string(a.seeds));
    if (a.workers >= 0) config.set("workers", std::to_string(a.workers));

    std::cerr << "preset " << a.preset << "  config " << config.hash().substr(0, 12) << "  -> " << a.out << "\n";
    const auto result = run_config(config, a.out);

    if (!result.runs.empty()) {
        std::printf("%-10s %3s %5s %14s %14s\n", "algo", "K", "seed", "time-avg over", "final over");
        for (const auto& r : result.runs)
            std::printf("%-10s %3zu %5llu %14.6g %14.6g\n", to_string(r.spec.algorithm).c_str(), r.spec.K,
                        static_cast<unsigned long long>(r.seed), time_averaged_overestimation(r.curve),
                        r.curve.empty() ? 0.0 : r.curve.back().overestimation);
    }
    if (!result.tae_rows.empty()) {
        std::printf("%-10s %2s %2s %6s %12s %12s %10s %7s\n", "algo", "M", "K", "gamma", "analytic", "empirical",
                    "se", "z");
        for (const auto& r : result.tae_rows)
            std::printf("%-10s %2zu %2zu %6g %12.6g %12.6g %10.3g %7.2f\n", to_string(r.algorithm).c_str(), r.M, r.K,
                        r.gamma, r.analytic, r.simulated.variance, r.simulated.standard_error, r.z());
    }
    std::printf("%zu files, %.1f s, manifest %s\n", result.manifest.files.size(), result.manifest.wall_clock,
                (result.directory / "manifest.json").string().c_str());
    return 0;
}

int cmd_analyze(const VarianceArgs& a, const std::string& csv) {
    const TaeModel model = make_model(a);
    const auto rep = analyze_variance(model);
    std::printf("M=%zu K=%zu gamma=%g\n", model.M, model.K, model.gamma);
    std::printf("  %-9s %s\n", "dqn", format_double(rep.dqn_var).c_str());
    std::printf("  %-9s %s\n", "ensemble", format_double(rep.ensemble_var).c_str());
    std::printf("  %-9s %s\n", "averaged", format_double(rep.averaged_var).c_str());
    std::printf("  %-9s %.6f\n", "avg/dqn", rep.dqn_var > 0 ? rep.averaged_var / rep.dqn_var : 0.0);
    std::printf("  %4s %22s %10s\n", "m", "D_{K,m}", "1/K");
    for (std::size_t m = 0; m < rep.d_coeffs.size(); ++m)
        std::printf("  %4zu %22s %10.6f\n", m, format_double(rep.d_coeffs[m]).c_str(), 1.0 / static_cast<double>(model.K));
    std::ostringstream table;
    table << "M,K,gamma,dqn_var,ensemble_var,averaged_var\n";
    table << model.M << ',' << model.K << ',' << format_double(model.gamma) << ',' << format_double(rep.dqn_var) << ','
          << format_double(rep.ensemble_var) << ',' << format_double(rep.averaged_var) << '\n';
    std::printf("\n%s", table.str().c_str());
    if (!csv.empty()) {
        std::ofstream out(csv);
        if (!out) throw std::runtime_error("cannot write " + csv);
        out << table.str();
    }
    return 0;
}

int cmd_simulate(const SimulateArgs& a) {
    const TaeModel model = make_model(a.model);
    std::vector<Algorithm> algos;
    if (a.algo == "all")
        algos = {Algorithm::dqn, Algorithm::ensemble, Algorithm::averaged};
    else
        algos = {algorithm_from_string(a.algo)};
    std::printf("%-10s %14s %14s %10s %7s\n", "algo", "analytic", "empirical", "se", "z");
    for (auto algo : algos) {
        const double analytic = algo == Algorithm::dqn        ? dqn_variance(model)
                                : algo == Algorithm::ensemble ? ensemble_variance(model)
                                                              : averaged_variance(model);
        TaeModel m = model;
        if (algo == Algorithm::dqn) m.K = 1;
        const std::size_t iters = a.iterations ? a.iterations : default_tae_iterations(m);
        const auto sim = simulate_tae_recursion(m, algo, a.trials, iters, a.seed, a.workers);
        const double z = sim.standard_error > 0 ? (sim.variance - analytic) / sim.standard_error : 0.0;
        std::printf("%-10s %14.8g %14.8g %10.3g %7.2f\n", to_string(algo).c_str(), analytic, sim.variance,
                    sim.standard_error, z);
    }
    return 0;
}

int cmd_value_iteration(const ValueIterationArgs& a) {
    if (a.env != "chain" && a.env != "gridworld") throw std::invalid_argument("unknown env '" + a.env + "'");
    const Environment env = a.env == "chain"
                                ? chain_environment(a.length, a.gamma)
                                : gridworld_environment(GridworldSpec{a.width, a.height, a.width, a.height, 1.0, 0.0,
                                                                      a.gamma});
    const ExactQ q = value_iteration(env.mdp, a.tol);
    std::printf("sweeps %zu  residual %.3g\n", q.sweeps, q.residual);
    if (env.grid) {
        // Top row printed first, so the goal sits in the upper right.
        for (std::size_t y = env.grid->height; y >= 1; --y) {
            for (std::size_t x = 1; x <= env.grid->width; ++x)
                std::printf("%8.4f", q.state_value(env.grid->state_of(x, y)));
            std::printf("\n");
        }
    } else {
        for (State s = 0; s < q.num_states; ++s) std::printf("s%zu %s\n", s, format_double(q.state_value(s)).c_str());
    }
    const auto policy = greedy_policy(q);
    std::printf("greedy return from start %s\n",
                format_double(rollout_return(env.mdp, policy, env.start, env.rollout_cap)).c_str());
    std::ofstream file;
    if (!a.q_csv.empty()) {
        file.open(a.q_csv);
        if (!file) throw std::runtime_error("cannot write " + a.q_csv);
    } else {
        std::printf("\n");
        std::fflush(stdout);
    }
    std::ostream& out = a.q_csv.empty() ? std::cout : file;
    out << "state,action,q\n";
    for (State s = 0; s < q.num_states; ++s)
        for (Action act = 0; act < q.num_actions; ++act) out << s << ',' << act << ',' << format_double(q(s, act)) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Averaged-DQN / Ensemble-DQN experiments and target-error variance tools"};
    app.require_subcommand(1);

    RunArgs run;
    auto* run_cmd = app.add_subcommand("run", "run an experiment preset");
    std::string presets;
    for (const auto& p : preset_names()) presets += (presets.empty() ? "" : ", ") + p;
    run_cmd->add_option("preset", run.preset, "one of: " + presets)->required();
    run_cmd->add_option("--set", run.sets, "override, key=value (repeatable)");
    run_cmd->add_option("--config", run.config_file, "key = value file applied before --set");
    run_cmd->add_option("--seeds", run.seeds, "number of seeds");
    run_cmd->add_option("--workers", run.workers, "concurrent runs");
    run_cmd->add_option("--out", run.out, "output directory");

    auto* keys_cmd = app.add_subcommand("config-keys", "print every configuration key with its default");

    VarianceArgs var;
    std::string var_csv;
    auto* var_cmd = app.add_subcommand("analyze-variance", "closed-form TAE variance of dqn, ensemble, averaged");
    add_model_options(var_cmd, var);
    var_cmd->add_option("--csv", var_csv, "also write the CSV row to this file");

    SimulateArgs sim;
    auto* sim_cmd = app.add_subcommand("simulate-tae", "Monte Carlo TAE variance against the closed form");
    add_model_options(sim_cmd, sim.model);
    sim_cmd->add_option("--algo", sim.algo, "dqn | ensemble | averaged | all");
    sim_cmd->add_option("--trials", sim.trials, "independent trials");
    sim_cmd->add_option("--iterations", sim.iterations, "recursion length (default 5KM+1)");
    sim_cmd->add_option("--seed", sim.seed, "seed");
    sim_cmd->add_option("--workers", sim.workers, "threads")->check(CLI::PositiveNumber);

    ValueIterationArgs vi;
    auto* vi_cmd = app.add_subcommand("value-iteration", "exact Q* of the gridworld or chain");
    vi_cmd->add_option("--env", vi.env, "gridworld | chain");
    vi_cmd->add_option("--width", vi.width, "grid width (goal in the far corner)")->check(CLI::PositiveNumber);
    vi_cmd->add_option("--height", vi.height, "grid height")->check(CLI::PositiveNumber);
    vi_cmd->add_option("--length", vi.length, "chain length");
    vi_cmd->add_option("--gamma", vi.gamma, "discount");
    vi_cmd->add_option("--tol", vi.tol, "Bellman residual tolerance");
    vi_cmd->add_option("--q-csv", vi.q_csv, "write Q* to this file instead of stdout");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run_cmd) return cmd_run(run);
        if (*keys_cmd) {
            write_config_reference(std::cout);
            return 0;
        }
        if (*var_cmd) return cmd_analyze(var, var_csv);
        if (*sim_cmd) return cmd_simulate(sim);
        if (*vi_cmd) return cmd_value_iteration(vi);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
