#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "resure/rng.hpp"

namespace resure {

enum class Tier { High, Normal, Low };
enum class TaskTag { Primary, Drift };
enum class TaskKind { Classification, Regression };
enum class Corruption { LabelFlip, LabelShuffle, TargetJitter };

std::string to_string(Tier t);
std::string to_string(TaskTag t);
Tier tier_from_string(const std::string& s);
TaskTag task_tag_from_string(const std::string& s);

// One training example. `group` is the turn-group index; `is_noisy` is
// injection ground truth, hidden from training and used only by audits.
struct Sample {
    std::int64_t id = 0;
    std::vector<double> features;
    double label = 0.0;
    int group = 1;
    bool is_noisy = false;
    Tier tier = Tier::High;
    TaskTag task = TaskTag::Primary;
};

struct DialogueTurn {
    std::string user;
    std::string assistant;
};

// Dialogue-shaped record; the supervision mask is the source of the
// turn-group index.
struct DialogueRecord {
    std::vector<DialogueTurn> turns;
    std::vector<bool> supervised;
};

// 1-based index of the last supervised turn. Throws DataError when the
// mask length mismatches or no turn is supervised.
int turn_group(const DialogueRecord& rec);

// Synthesizes a dialogue whose turn_group equals `group`, with up to two
// trailing unsupervised turns.
DialogueRecord make_dialogue(int group, Rng& rng);

struct NoiseSpec {
    std::map<int, double> per_group_rates;  // group b -> rate in [0,1]
    Corruption corruption = Corruption::LabelFlip;
    double jitter_sigma = 1.0;  // TargetJitter scale
};

// Parameters of a ground-truth task. The rule (weight vector) is a pure
// function of rule_seed, so different partitions generated with different
// sample seeds share one rule.
struct GeneratorSpec {
    TaskKind kind = TaskKind::Classification;
    int feature_dim = 16;
    int num_groups = 4;
    std::vector<double> group_weights;  // empty = uniform over 1..num_groups
    double margin = 0.1;                // classification: min |score| of clean points
    double residual_sigma = 0.1;        // regression: observation noise
    double offset = 0.0;                // shift of the input cloud along (1,..,1)/sqrt(d)
    double clean_accuracy = 1.0;        // documented bound for the rule on clean data
    std::uint64_t rule_seed = 0;
};

// The generator's own ground-truth linear rule, exposed for oracle checks.
struct TrueRule {
    std::vector<double> weights;
    double bias = 0.0;
};

TrueRule make_rule(const GeneratorSpec& spec);

// Fraction of samples the ground-truth rule reproduces (class match, or
// |prediction - label| <= tolerance for regression).
double rule_accuracy(const GeneratorSpec& spec, std::span<const Sample> data, double tolerance);

// Deterministic synthesis of `count` clean samples. Ids run 0..count-1;
// callers re-base them when combining partitions.
std::vector<Sample> generate(const GeneratorSpec& spec, std::int64_t count, std::uint64_t seed);

// Corrupts exactly floor(rate_b * count_b) labels per group, selected by a
// deterministic shuffle. Only labels and is_noisy change.
std::vector<Sample> inject_noise(std::vector<Sample> data, const NoiseSpec& spec,
                                 std::uint64_t seed);

// Concatenates tiers, stamps the tier on each sample, and shuffles
// deterministically.
std::vector<Sample> mix(const std::vector<std::pair<std::vector<Sample>, Tier>>& tiers,
                        std::uint64_t shuffle_seed);

// Keeps the ceil(keep_fraction * n) highest-scoring samples, ties broken by
// ascending id; output preserves the input order of kept samples.
std::vector<Sample> prefilter(const std::vector<Sample>& data,
                              const std::function<double(const Sample&)>& proxy_score,
                              double keep_fraction);

// Per-group noise rates for a tier: base_rate scaled linearly in the group
// index (later turn groups get proportionally more noise), mean preserved
// under a uniform group distribution, clamped to [0,1].
std::map<int, double> group_noise_rates(double base_rate, int num_groups);

// JSON-lines dataset files.
void write_samples_jsonl(const std::filesystem::path& path, std::span<const Sample> samples);
std::vector<Sample> read_samples_jsonl(const std::filesystem::path& path);
void write_dialogues_jsonl(const std::filesystem::path& path,
                           std::span<const DialogueRecord> records);
std::vector<DialogueRecord> read_dialogues_jsonl(const std::filesystem::path& path);

}  // namespace resure
