#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "resure/data.hpp"
#include "resure/metrics.hpp"
#include "resure/model.hpp"
#include "resure/reweighter.hpp"

namespace resure {

enum class Strategy { Resure, Uniform, HardFilter, NoWelfordAblation };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);

struct TrainConfig {
    ModelKind model = ModelKind::Linear;
    int hidden_width = 32;
    TaskKind objective = TaskKind::Classification;
    Strategy strategy = Strategy::Resure;
    std::optional<double> prefilter_keep;  // applied by the pipeline before train()
    int epochs = 3;
    int batch_size = 64;        // effective batch
    int accumulation_steps = 1; // micro-batches per optimizer step
    double lr = 0.01;           // desk-scale default; 5e-3 suits the MLP
    double beta1 = 0.9;
    double beta2 = 0.95;
    double warmup_ratio = 0.01; // LR schedule warm-up fraction
    double eval_tolerance = 0.2;  // regression accuracy band
    bool reuse_warmup_samples = true;  // keep warm-up samples in later epochs
    std::uint64_t seed = 1;
    ReweightConfig reweight;
};

struct EpochMetrics {
    int epoch = 1;
    double train_loss = 0.0;           // mean raw per-sample loss
    double weighted_train_loss = 0.0;  // mean over steps of the weighted batch loss
    double eval_loss = 0.0;
    double eval_accuracy = 0.0;
};

struct GroupSnapshot {
    int epoch = 1;
    int group = 1;
    std::uint64_t count = 0;
    double mean = 0.0;
    double variance = 0.0;
};

// Full training trace of one run.
struct RunReport {
    std::vector<StepRecord> steps;
    std::vector<EpochMetrics> epochs;
    std::vector<GroupSnapshot> group_stats;  // one row per group per epoch
    DetectionMetrics detection;              // final-epoch flags vs is_noisy
    std::vector<EpochWeightSummary> weights;
    double final_eval_loss = 0.0;
    double final_eval_accuracy = 0.0;
    // Mean final-epoch weights per class; noise_gap = clean - noisy.
    std::optional<double> mean_weight_clean;
    std::optional<double> mean_weight_noisy;
    std::optional<double> noise_gap;
    std::int64_t total_steps = 0;
};

// Runs the supervised loop: per-sample losses, batch reweighting per the
// configured strategy, weighted Adam updates on a cosine schedule.
// Deterministic given (config, data): fixed init, fixed shuffles.
//
// Epoch 1 leads with the warm-up partition (High-tier samples, clamped to
// what is available); every sample id in eval_data must be absent from
// train_data. Throws DivergenceError when parameters go non-finite.
RunReport train(const TrainConfig& config, const std::vector<Sample>& train_data,
                const std::vector<Sample>& eval_data);

}  // namespace resure
