#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "avgdqn/agents.hpp"
#include "avgdqn/config.hpp"
#include "avgdqn/tae.hpp"

namespace avgdqn {

/// Names accepted by run_preset.
const std::vector<std::string>& preset_names();

/// Defaults of `name` layered over the global defaults. Throws
/// std::invalid_argument for an unknown preset.
Config preset_config(const std::string& name);

struct RunSpec {
    Algorithm algorithm;
    std::size_t K;
};

/// Parses `runs` entries such as "averaged:5".
std::vector<RunSpec> parse_runs(const std::vector<std::string>& items);

Environment make_environment(const Config& config);
AgentConfig make_agent_config(const Config& config, const RunSpec& run, std::uint64_t seed);

struct RunResult {
    RunSpec spec;
    std::uint64_t seed = 0;
    LearningCurve curve;
    std::filesystem::path csv;
};

/// Trains one agent end to end (buffer construction, warm-up, training).
LearningCurve train_run(const Config& config, const RunSpec& run, std::uint64_t seed,
                        std::shared_ptr<const Environment> env, std::shared_ptr<const ExactQ> oracle);

struct AggregateRow {
    std::size_t iteration = 0;
    std::size_t n_runs = 0;
    double pred_mean = 0, pred_std = 0;
    double true_mean = 0, true_std = 0;
    double over_mean = 0, over_std = 0;
    double return_mean = 0, return_std = 0;
    /// False when a single run makes the sample standard deviation undefined (reported as 0).
    bool std_defined = false;
};

/// Per-iteration mean and sample standard deviation (n - 1) across runs.
/// Throws std::invalid_argument when runs are empty or log different iterations.
std::vector<AggregateRow> aggregate_curves(const std::vector<LearningCurve>& runs);

/// Reads a curve written by write_curve_csv.
LearningCurve read_curve_csv(std::istream& in);
std::vector<AggregateRow> aggregate_curve_files(const std::vector<std::filesystem::path>& files);

/// Columns: iteration,n_runs,{pred_value,true_value,overestimation,eval_return}_{mean,std},std_defined,algo,K
void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows, Algorithm algo, std::size_t K);

struct TaeGridRow {
    Algorithm algorithm;
    std::size_t M, K;
    double gamma, sigma;
    double analytic;
    TaeSimulation simulated;
    double z() const;
};

/// Every (algorithm, M, K, gamma) of the tae.* grid, analytic against simulated.
std::vector<TaeGridRow> run_tae_grid(const Config& config);

/// Columns: algo,M,K,gamma,sigma,analytic,empirical,standard_error,z,trials,iterations
void write_tae_grid_csv(std::ostream& out, const std::vector<TaeGridRow>& rows);

struct RunManifest {
    std::string preset;
    std::string config_hash;
    std::string version;
    double wall_clock = 0.0;
    struct Entry {
        std::string kind;  // run | aggregate | table | config
        std::filesystem::path path;
        std::string algo;
        std::size_t K = 0;
        std::int64_t seed = -1;
    };
    std::vector<Entry> files;

    void write_json(std::ostream& out) const;
};

struct PresetResult {
    std::filesystem::path directory;
    Config config;
    RunManifest manifest;
    std::vector<RunResult> runs;
    std::vector<TaeGridRow> tae_rows;
};

/// Runs a preset with `overrides` (key=value strings) applied, writing one CSV
/// per run, one aggregate CSV per (algorithm, K), the resolved config and
/// manifest.json into `out_dir`. Throws std::invalid_argument for unknown
/// presets or bad overrides and std::runtime_error when `out_dir` is not writable.
PresetResult run_preset(const std::string& name, const std::vector<std::string>& overrides,
                        const std::filesystem::path& out_dir);

/// Same, starting from an already resolved configuration.
PresetResult run_config(const Config& config, const std::filesystem::path& out_dir);

/// Mean over curve records of the overestimation.
double time_averaged_overestimation(const LearningCurve& curve);

}  // namespace avgdqn
