#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "resure/data.hpp"
#include "resure/trainer.hpp"

namespace resure {

struct TierConfig {
    std::int64_t count = 0;
    double noise_rate = 0.0;  // tier base rate; per-group rates scale with b
};

struct DriftConfig {
    std::int64_t count = 0;
    double offset = 3.0;  // input-cloud shift of the drift task
};

struct DataConfig {
    GeneratorSpec task;
    std::optional<DriftConfig> drift;
    std::map<Tier, TierConfig> tiers;
    Corruption corruption = Corruption::LabelFlip;
    double jitter_sigma = 1.0;
    std::int64_t eval_count = 2000;
    // Margin of the held-out eval set; 0 keeps points arbitrarily close to
    // the boundary so accuracy stays sensitive to the fitted direction.
    double eval_margin = 0.0;
    std::uint64_t seed = 1;
    bool emit_dialogues = false;
};

struct SweepConfig {
    std::vector<std::string> mixtures;  // order defines complexity rank 1..n
    std::vector<Strategy> strategies;
    std::vector<std::uint64_t> seeds;
};

struct OutputConfig {
    std::string dir = "out";
    std::vector<std::string> formats = {"csv", "json"};
};

// One JSON document drives every command; flags only pick the subcommand,
// config path and output directory. Unknown keys anywhere are rejected
// with their full path.
struct ExperimentConfig {
    DataConfig data;
    TrainConfig train;
    std::string train_mixture = "H+N+L";  // tier tokens joined by '+': H,N,L,D
    std::optional<SweepConfig> sweep;
    OutputConfig output;

    nlohmann::json echo;  // normalized parsed document
    std::string hash;     // fnv1a-64 of the normalized document, hex
};

ExperimentConfig parse_config(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

// Splits "H+N+L" style mixture labels into tier tokens; validates tokens.
std::vector<std::string> parse_mixture(const std::string& mixture);

}  // namespace resure
