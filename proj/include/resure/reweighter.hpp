#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "resure/stats.hpp"

namespace resure {

struct ReweightConfig {
    double alpha = 1.0;             // anomaly factor on the group stddev
    double floor_percentile = 5.0;  // percentile of the batch weight distribution
    int min_group_count = 16;       // reliable samples required before flagging
    std::int64_t warmup_samples = 640;  // samples that absorb unconditionally
    std::int64_t ramp_steps = 100;  // post-warm-up steps to reach full suppression
};

// Per-sample decision record. flagged implies not absorbed; an unflagged
// sample always carries weight 1.
struct ReweightOutcome {
    double weight = 1.0;
    bool flagged = false;
    bool absorbed = true;
    double threshold = 0.0;  // tau of the sample's group at decision time
    double adjusted_loss = 0.0;
};

// How final weights are derived from the detector's verdicts.
//   Soft       exp-decayed weight with a batch-percentile floor
//   HardFilter flagged samples get weight 0 (no floor)
//   UnitWeight detector runs and statistics update conditionally, but every
//              weight is forced to 1 (the no-Welford ablation)
//   Off        no detection at all: weight 1, everything absorbs
enum class ReweightMode { Soft, HardFilter, UnitWeight, Off };

// Mutable phase state owned by the training loop. `samples_seen` decides
// warm-up membership per sample; `post_warmup_steps` drives the ramp.
struct PhaseState {
    std::int64_t samples_seen = 0;
    std::int64_t post_warmup_steps = 0;
};

// Decayed weight exp(-(loss - tau)/tau) for a flagged sample, before the
// floor. Clamped into (0, 1] so extreme losses cannot underflow to zero.
// Throws ThresholdError when tau <= 0.
double raw_weight(double loss, double tau);

// floor_percentile-th percentile of the batch's candidate weights by
// linear rank interpolation. Throws EmptyInputError on an empty batch.
double batch_floor(std::span<const double> candidate_weights, double floor_percentile);

// Run detection and reweighting for one batch.
//
// Every decision uses the registry state at entry; absorption of reliable
// samples is applied afterwards, so results do not depend on within-batch
// order. Warm-up membership is evaluated per sample against
// phase.samples_seen. The ramp factor comes from phase.post_warmup_steps at
// entry; the counter advances once per call that touches any post-warm-up
// sample.
std::vector<ReweightOutcome> process_batch(StatsRegistry& registry,
                                           std::span<const double> losses,
                                           std::span<const int> groups,
                                           const ReweightConfig& config,
                                           PhaseState& phase,
                                           ReweightMode mode = ReweightMode::Soft);

// Mean over the batch of weight * loss. Weights are constants here: no
// gradient flows through them downstream.
double weighted_batch_loss(std::span<const double> losses,
                           std::span<const ReweightOutcome> outcomes);

}  // namespace resure
