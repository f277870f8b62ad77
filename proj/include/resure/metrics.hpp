#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <vector>

namespace resure {

// One per-sample reweighting decision as recorded in the step log.
struct StepRecord {
    int epoch = 1;
    std::int64_t step = 0;  // global optimizer step
    std::int64_t sample_id = 0;
    int group = 1;
    double loss = 0.0;
    double threshold = 0.0;
    bool flagged = false;
    bool absorbed = true;
    double weight = 1.0;
    double adjusted_loss = 0.0;
};

// Spearman rank correlation with average ranks for ties. Returns nullopt
// when either rank vector has zero variance (correlation undefined);
// throws on length < 2 or mismatched lengths.
std::optional<double> spearman(std::span<const double> xs, std::span<const double> ys);

struct DetectionMetrics {
    std::int64_t tp = 0;
    std::int64_t fp = 0;
    std::int64_t fn = 0;
    std::int64_t tn = 0;
    // Undefined (no predicted / no actual positives) is an explicit empty
    // marker, never reported as 0 or 1.
    std::optional<double> precision;
    std::optional<double> recall;
    std::optional<double> f1;
};

DetectionMetrics detection_metrics(const std::vector<bool>& flags,
                                   const std::vector<bool>& truth);

struct ClassWeightStats {
    std::size_t n = 0;
    double mean = 0.0;
    double median = 0.0;
    double p5 = 0.0;
    double p95 = 0.0;
};

struct EpochWeightSummary {
    int epoch = 1;
    std::optional<ClassWeightStats> clean;  // empty when the class has no samples
    std::optional<ClassWeightStats> noisy;
};

// Joins step-log weights against noise ground truth by sample id and
// aggregates per epoch and class. Throws JoinError for ids missing from
// the truth map, EmptyInputError for an empty log.
std::vector<EpochWeightSummary> weight_summary(std::span<const StepRecord> step_log,
                                               const std::map<std::int64_t, bool>& truth);

}  // namespace resure
