#include "avgdqn/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "avgdqn/text.hpp"
#include "avgdqn/value_oracle.hpp"

namespace avgdqn {

namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "avgdqn 1.0.0";
constexpr double kOracleTolerance = 1e-10;

const std::map<std::string, std::vector<std::pair<std::string, std::string>>>& preset_table() {
    static const std::map<std::string, std::vector<std::pair<std::string, std::string>>> table = {
        {"gridworld-overestimation",
         {{"env", "gridworld"},
          {"runs", "dqn:1,averaged:5,averaged:10,averaged:20"},
          {"agent.minibatches", "100"},
          {"seeds", "10"}}},
        {"averaged-vs-ensemble",
         {{"env", "gridworld"}, {"runs", "averaged:5,ensemble:5"}, {"agent.minibatches", "300"}, {"seeds", "10"}}},
        {"tae-variance", {{"runs", ""}}},
        {"chain-demo",
         {{"env", "chain"},
          {"chain.length", "5"},
          {"chain.actions", "2"},
          {"replay.mode", "fifo"},
          {"replay.capacity", "500"},
          {"explore.steps_per_iteration", "10"},
          {"explore.warmup_steps", "64"},
          {"explore.decay_steps", "1000"},
          {"runs", "dqn:1,averaged:5,ensemble:5"},
          {"agent.iterations", "200"},
          {"agent.minibatches", "10"},
          {"agent.hidden", "32"},
          {"log_every", "5"},
          {"seeds", "3"}}},
    };
    return table;
}

template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

std::ofstream open_for_write(const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

std::string run_label(const RunSpec& r) { return to_string(r.algorithm) + "_K" + std::to_string(r.K); }

void mean_std(const std::vector<double>& xs, double& mean, double& std) {
    mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    std = 0.0;
    if (xs.size() < 2) return;
    for (double x : xs) std += (x - mean) * (x - mean);
    std = std::sqrt(std / static_cast<double>(xs.size() - 1));
}

}  // namespace

const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> n;
        for (const auto& [k, v] : preset_table()) n.push_back(k);
        return n;
    }();
    return names;
}

Config preset_config(const std::string& name) {
    auto it = preset_table().find(name);
    if (it == preset_table().end()) throw std::invalid_argument("unknown preset '" + name + "'");
    Config c;
    c.set("preset", name);
    for (const auto& [k, v] : it->second) c.set(k, v);
    return c;
}

std::vector<RunSpec> parse_runs(const std::vector<std::string>& items) {
    std::vector<RunSpec> out;
    for (const auto& item : items) {
        const auto parts = split(item, ':');
        if (parts.size() != 2) throw std::invalid_argument("run '" + item + "' is not algorithm:K");
        const Algorithm algo = algorithm_from_string(trim(parts[0]));
        const long long K = std::stoll(parts[1]);
        if (K < 1) throw std::invalid_argument("run '" + item + "': K must be at least 1");
        if (algo == Algorithm::dqn && K != 1) throw std::invalid_argument("run '" + item + "': dqn uses K = 1");
        out.push_back({algo, static_cast<std::size_t>(K)});
    }
    return out;
}

Environment make_environment(const Config& config) {
    const std::string env = config.get("env");
    const double gamma = config.get_real("gamma");
    if (env == "gridworld") {
        GridworldSpec g;
        g.width = config.get_size("grid.width");
        g.height = config.get_size("grid.height");
        g.goal_x = config.get_size("grid.goal_x");
        g.goal_y = config.get_size("grid.goal_y");
        g.goal_reward = config.get_real("grid.goal_reward");
        g.step_reward = config.get_real("grid.step_reward");
        g.gamma = gamma;
        return gridworld_environment(g);
    }
    if (env == "chain") return chain_environment(config.get_size("chain.length"), gamma, config.get_size("chain.actions"));
    throw std::invalid_argument("unknown environment '" + env + "'");
}

AgentConfig make_agent_config(const Config& config, const RunSpec& run, std::uint64_t seed) {
    AgentConfig a;
    a.algorithm = run.algorithm;
    a.K = run.K;
    a.num_iterations = config.get_size("agent.iterations");
    a.minibatches_per_iteration = config.get_size("agent.minibatches");
    a.batch_size = config.get_size("agent.batch_size");
    a.full_batch = config.get_bool("agent.full_batch");
    a.model = model_kind_from_string(config.get("agent.model"));
    a.hidden_units = config.get_size("agent.hidden");
    a.tabular_learning_rate = config.get_real("agent.tabular_lr");

    const std::string kind = config.get("optimizer.kind");
    if (kind == "adam")
        a.optimizer.kind = OptimizerKind::adam;
    else if (kind == "sgd")
        a.optimizer.kind = OptimizerKind::sgd;
    else
        throw std::invalid_argument("unknown optimizer '" + kind + "'");
    a.optimizer.learning_rate = config.get_real("optimizer.learning_rate");
    a.optimizer.beta1 = config.get_real("optimizer.beta1");
    a.optimizer.beta2 = config.get_real("optimizer.beta2");
    a.optimizer.epsilon = config.get_real("optimizer.epsilon");

    a.exploration.initial = config.get_real("explore.epsilon_start");
    a.exploration.final = config.get_real("explore.epsilon_final");
    a.exploration.decay_steps = config.get_size("explore.decay_steps");
    a.exploration.steps_per_iteration = config.get_size("explore.steps_per_iteration");

    a.seed = seed;
    a.log_every = config.get_size("log_every");
    const std::string eval = config.get("eval_states");
    if (eval == "all")
        a.eval_states = EvalStates::all;
    else if (eval == "start")
        a.eval_states = EvalStates::start;
    else
        throw std::invalid_argument("eval_states must be all or start");
    return a.normalized();
}

LearningCurve train_run(const Config& config, const RunSpec& run, std::uint64_t seed,
                        std::shared_ptr<const Environment> env, std::shared_ptr<const ExactQ> oracle) {
    const std::string mode = config.get("replay.mode");
    ReplayBuffer buffer = mode == "full"   ? ReplayBuffer::full_coverage()
                          : mode == "fifo" ? ReplayBuffer::fifo(config.get_size("replay.capacity"))
                                           : throw std::invalid_argument("replay.mode must be full or fifo");
    Agent agent(make_agent_config(config, run, seed), std::move(env), std::move(buffer), std::move(oracle));
    if (agent.buffer().mode() == ReplayMode::fifo) agent.explore(config.get_size("explore.warmup_steps"));
    return agent.train();
}

std::vector<AggregateRow> aggregate_curves(const std::vector<LearningCurve>& runs) {
    if (runs.empty()) throw std::invalid_argument("aggregate_curves: no runs");
    const auto& grid = runs.front();
    for (const auto& r : runs) {
        bool same = r.size() == grid.size();
        for (std::size_t i = 0; same && i < r.size(); ++i) same = r[i].iteration == grid[i].iteration;
        if (!same) throw std::invalid_argument("aggregate_curves: runs do not share an iteration grid");
    }
    std::vector<AggregateRow> out;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        AggregateRow row;
        row.iteration = grid[i].iteration;
        row.n_runs = runs.size();
        row.std_defined = runs.size() > 1;
        std::vector<double> pred, truth, over, ret;
        for (const auto& r : runs) {
            pred.push_back(r[i].pred_value);
            truth.push_back(r[i].true_value);
            over.push_back(r[i].overestimation);
            ret.push_back(r[i].eval_return);
        }
        mean_std(pred, row.pred_mean, row.pred_std);
        mean_std(truth, row.true_mean, row.true_std);
        mean_std(over, row.over_mean, row.over_std);
        mean_std(ret, row.return_mean, row.return_std);
        out.push_back(row);
    }
    return out;
}

LearningCurve read_curve_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || trim(line) != "iteration,pred_value,true_value,overestimation,eval_return,seed,algo,K")
        throw std::invalid_argument("read_curve_csv: unexpected header");
    LearningCurve curve;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const auto f = split(trim(line), ',');
        if (f.size() != 8) throw std::invalid_argument("read_curve_csv: expected 8 fields");
        CurveRecord r;
        r.iteration = std::stoull(f[0]);
        r.pred_value = std::stod(f[1]);
        r.true_value = std::stod(f[2]);
        r.overestimation = std::stod(f[3]);
        r.eval_return = std::stod(f[4]);
        curve.push_back(r);
    }
    return curve;
}

std::vector<AggregateRow> aggregate_curve_files(const std::vector<fs::path>& files) {
    std::vector<LearningCurve> runs;
    for (const auto& f : files) {
        std::ifstream in(f);
        if (!in) throw std::runtime_error("cannot read " + f.string());
        runs.push_back(read_curve_csv(in));
    }
    return aggregate_curves(runs);
}

void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows, Algorithm algo, std::size_t K) {
    out << "iteration,n_runs,pred_value_mean,pred_value_std,true_value_mean,true_value_std,"
           "overestimation_mean,overestimation_std,eval_return_mean,eval_return_std,std_defined,algo,K\n";
    for (const auto& r : rows) {
        out << r.iteration << ',' << r.n_runs << ',' << format_double(r.pred_mean) << ',' << format_double(r.pred_std)
            << ',' << format_double(r.true_mean) << ',' << format_double(r.true_std) << ','
            << format_double(r.over_mean) << ',' << format_double(r.over_std) << ',' << format_double(r.return_mean)
            << ',' << format_double(r.return_std) << ',' << (r.std_defined ? 1 : 0) << ',' << to_string(algo) << ','
            << K << '\n';
    }
}

double TaeGridRow::z() const {
    if (simulated.standard_error == 0.0) return simulated.variance == analytic ? 0.0 : INFINITY;
    return (simulated.variance - analytic) / simulated.standard_error;
}

std::vector<TaeGridRow> run_tae_grid(const Config& config) {
    const auto Ms = config.get_size_list("tae.M");
    const auto Ks = config.get_size_list("tae.K");
    const auto gammas = config.get_real_list("tae.gamma");
    const double sigma = config.get_real("tae.sigma");
    const std::uint64_t trials = config.get_size("tae.trials");
    const std::uint64_t seed = config.get_size("tae.seed");
    const std::size_t workers = std::max<std::size_t>(1, config.get_size("workers"));

    std::vector<TaeGridRow> rows;
    for (std::size_t M : Ms)
        for (double gamma : gammas) {
            rows.push_back({Algorithm::dqn, M, 1, gamma, sigma, 0.0, {}});
            for (std::size_t K : Ks) {
                rows.push_back({Algorithm::ensemble, M, K, gamma, sigma, 0.0, {}});
                rows.push_back({Algorithm::averaged, M, K, gamma, sigma, 0.0, {}});
            }
        }
    for (std::size_t i = 0; i < rows.size(); ++i) {
        auto& r = rows[i];
        const auto model = TaeModel::uniform(r.M, r.sigma, r.gamma, r.K);
        switch (r.algorithm) {
            case Algorithm::dqn: r.analytic = dqn_variance(model); break;
            case Algorithm::ensemble: r.analytic = ensemble_variance(model); break;
            case Algorithm::averaged: r.analytic = averaged_variance(model); break;
        }
        r.simulated = simulate_tae_recursion(model, r.algorithm, trials, default_tae_iterations(model),
                                             seed * 1000003ULL + i, workers);
    }
    return rows;
}

void write_tae_grid_csv(std::ostream& out, const std::vector<TaeGridRow>& rows) {
    out << "algo,M,K,gamma,sigma,analytic,empirical,standard_error,z,trials,iterations\n";
    for (const auto& r : rows)
        out << to_string(r.algorithm) << ',' << r.M << ',' << r.K << ',' << format_double(r.gamma) << ','
            << format_double(r.sigma) << ',' << format_double(r.analytic) << ',' << format_double(r.simulated.variance)
            << ',' << format_double(r.simulated.standard_error) << ',' << format_double(r.z()) << ','
            << r.simulated.trials << ',' << r.simulated.iterations << '\n';
}

void RunManifest::write_json(std::ostream& out) const {
    nlohmann::ordered_json j;
    j["preset"] = preset;
    j["config_hash"] = config_hash;
    j["version"] = version;
    j["wall_clock_seconds"] = wall_clock;
    j["files"] = nlohmann::ordered_json::array();
    for (const auto& e : files) {
        nlohmann::ordered_json f;
        f["kind"] = e.kind;
        f["path"] = e.path.generic_string();
        if (!e.algo.empty()) {
            f["algo"] = e.algo;
            f["K"] = e.K;
        }
        if (e.seed >= 0) f["seed"] = e.seed;
        j["files"].push_back(f);
    }
    out << j.dump(2) << '\n';
}

PresetResult run_preset(const std::string& name, const std::vector<std::string>& overrides, const fs::path& out_dir) {
    Config config = preset_config(name);
    for (const auto& o : overrides) config.apply(o);
    return run_config(config, out_dir);
}

PresetResult run_config(const Config& config, const fs::path& out_dir) {
    const auto started = std::chrono::steady_clock::now();
    const std::string preset = config.get("preset");
    if (std::find(preset_names().begin(), preset_names().end(), preset) == preset_names().end())
        throw std::invalid_argument("unknown preset '" + preset + "'");

    PresetResult result{out_dir, config, {}, {}, {}};
    result.manifest.preset = preset;
    result.manifest.config_hash = config.hash();
    result.manifest.version = kVersion;

    std::error_code ec;
    fs::create_directories(out_dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory " + out_dir.string() + ": " + ec.message());
    {
        auto out = open_for_write(out_dir / "config.txt");
        out << config.canonical();
        result.manifest.files.push_back({"config", "config.txt", "", 0, -1});
    }

    if (preset == "tae-variance") {
        result.tae_rows = run_tae_grid(config);
        auto out = open_for_write(out_dir / "tae_variance.csv");
        write_tae_grid_csv(out, result.tae_rows);
        result.manifest.files.push_back({"table", "tae_variance.csv", "", 0, -1});

        auto dout = open_for_write(out_dir / "d_coefficients.csv");
        dout << "K,m,d_dft,d_bruteforce,inverse_K\n";
        for (std::size_t K : config.get_size_list("tae.K"))
            for (std::size_t m = 0; m < 8; ++m)
                dout << K << ',' << m << ',' << format_double(d_coefficient_dft(K, m)) << ','
                     << format_double(d_coefficient_bruteforce(K, m)) << ','
                     << format_double(1.0 / static_cast<double>(K)) << '\n';
        result.manifest.files.push_back({"table", "d_coefficients.csv", "", 0, -1});
    } else {
        const auto runs = parse_runs(config.get_list("runs"));
        const std::size_t n_seeds = config.get_size("seeds");
        if (runs.empty()) throw std::invalid_argument("no runs configured");
        if (n_seeds == 0) throw std::invalid_argument("seed list must be nonempty");
        const std::uint64_t offset = config.get_size("seed_offset");

        auto env = std::make_shared<const Environment>(make_environment(config));
        auto oracle = std::make_shared<const ExactQ>(value_iteration(env->mdp, kOracleTolerance));

        for (const auto& r : runs)
            for (std::size_t s = 0; s < n_seeds; ++s) result.runs.push_back({r, offset + s, {}, {}});

        parallel_for(result.runs.size(), config.get_size("workers"), [&](std::size_t i) {
            auto& run = result.runs[i];
            run.curve = train_run(config, run.spec, run.seed, env, oracle);
        });

        fs::create_directories(out_dir / "runs", ec);
        fs::create_directories(out_dir / "aggregate", ec);
        if (ec) throw std::runtime_error("cannot create output directory: " + ec.message());
        for (auto& run : result.runs) {
            run.csv = fs::path("runs") / (run_label(run.spec) + "_seed" + std::to_string(run.seed) + ".csv");
            auto out = open_for_write(out_dir / run.csv);
            write_curve_csv(out, run.curve, run.seed, run.spec.algorithm, run.spec.K);
            result.manifest.files.push_back(
                {"run", run.csv, to_string(run.spec.algorithm), run.spec.K, static_cast<std::int64_t>(run.seed)});
        }
        for (const auto& spec : runs) {
            std::vector<LearningCurve> curves;
            for (const auto& run : result.runs)
                if (run.spec.algorithm == spec.algorithm && run.spec.K == spec.K) curves.push_back(run.curve);
            const fs::path rel = fs::path("aggregate") / (run_label(spec) + ".csv");
            auto out = open_for_write(out_dir / rel);
            write_aggregate_csv(out, aggregate_curves(curves), spec.algorithm, spec.K);
            result.manifest.files.push_back({"aggregate", rel, to_string(spec.algorithm), spec.K, -1});
        }
    }

    result.manifest.wall_clock = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    auto out = open_for_write(out_dir / "manifest.json");
    result.manifest.write_json(out);
    return result;
}

double time_averaged_overestimation(const LearningCurve& curve) {
    if (curve.empty()) return 0.0;
    double acc = 0.0;
    for (const auto& r : curve) acc += r.overestimation;
    return acc / static_cast<double>(curve.size());
}

}  // namespace avgdqn
