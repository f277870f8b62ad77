#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "resure/config.hpp"
#include "resure/data.hpp"
#include "resure/report.hpp"
#include "resure/trainer.hpp"

namespace resure {

// Clean/noisy partitions of one experiment, before mixing. Sample ids are
// re-based per partition so they stay unique across any mixture.
struct Partitions {
    std::vector<Sample> high;
    std::vector<Sample> normal;
    std::vector<Sample> low;
    std::vector<Sample> drift;
    std::vector<Sample> eval;
};

Partitions build_partitions(const DataConfig& data);

struct Dataset {
    std::vector<Sample> train;
    std::vector<Sample> eval;
};

// Assembles the train set for a mixture label ("H", "H+N", "H+N+L",
// "H+N+L+D", ...) with a deterministic shuffle derived from the data seed.
Dataset build_dataset(const DataConfig& data, const std::string& mixture);

// Proxy scorer for static prefiltering: negative loss under a probe model
// briefly trained on a clean High-tier seed set. Deterministic given the
// data seed.
std::function<double(const Sample&)> make_probe_scorer(const std::vector<Sample>& train_set,
                                                       const DataConfig& data,
                                                       const TrainConfig& train);

// One (mixture, strategy, seed) run; prefilter_keep overrides the config
// when set (nullopt = take the config's value).
struct RunSpec {
    std::string mixture;
    Strategy strategy = Strategy::Resure;
    std::uint64_t seed = 1;
    std::optional<std::optional<double>> prefilter_keep;
};

RunReport run_experiment(const ExperimentConfig& cfg, const RunSpec& spec);

// Subcommand implementations (also exercised directly by tests).
void cmd_gen_data(const ExperimentConfig& cfg, const std::filesystem::path& out_root);
void cmd_train(const ExperimentConfig& cfg, const std::filesystem::path& data_dir,
               const std::filesystem::path& out_root);
// Returns the number of failed runs; per-run statuses land in
// sweep_runs.json next to sweep.csv.
int cmd_sweep(const ExperimentConfig& cfg, const std::filesystem::path& out_root, int jobs);
void cmd_report(const ExperimentConfig& cfg, const std::filesystem::path& out_root);

}  // namespace resure
