#include "resure/reweighter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "resure/errors.hpp"
#include "resure/util.hpp"

namespace resure {

double raw_weight(double loss, double tau) {
    if (!(tau > 0.0)) {
        throw ThresholdError("raw_weight: tau must be > 0, got " + fmt_double(tau));
    }
    const double w = std::exp(-(loss - tau) / tau);
    return std::clamp(w, std::numeric_limits<double>::min(), 1.0);
}

double batch_floor(std::span<const double> candidate_weights, double floor_percentile) {
    if (candidate_weights.empty()) {
        throw EmptyInputError("batch_floor: empty batch");
    }
    return percentile(std::vector<double>(candidate_weights.begin(), candidate_weights.end()),
                      floor_percentile);
}

std::vector<ReweightOutcome> process_batch(StatsRegistry& registry,
                                           std::span<const double> losses,
                                           std::span<const int> groups,
                                           const ReweightConfig& config,
                                           PhaseState& phase,
                                           ReweightMode mode) {
    if (losses.empty()) {
        throw EmptyInputError("process_batch: empty batch");
    }
    if (losses.size() != groups.size()) {
        throw ShapeError("process_batch: " + std::to_string(losses.size()) + " losses vs " +
                         std::to_string(groups.size()) + " groups");
    }
    for (double l : losses) {
        if (!std::isfinite(l) || l < 0.0) {
            throw ValueError("process_batch: losses must be finite and >= 0");
        }
    }
    for (int g : groups) {
        registry.cell(g);  // throws GroupIndexError before any state changes
    }

    const std::size_t n = losses.size();
    std::vector<ReweightOutcome> out(n);
    std::vector<double> candidates(n, 1.0);
    bool any_post_warmup = false;
    bool any_flagged = false;

    // Ramp factor for this batch, from completed post-warm-up steps.
    double gamma = 1.0;
    if (mode != ReweightMode::Off && config.ramp_steps > 0) {
        gamma = std::min(1.0, static_cast<double>(phase.post_warmup_steps) /
                                  static_cast<double>(config.ramp_steps));
    }

    // Decision pass against the registry state at batch entry.
    for (std::size_t i = 0; i < n; ++i) {
        const GroupStats& cell = registry.cell(groups[i]);  // validates the index
        ReweightOutcome& o = out[i];
        o.threshold = cell.threshold(config.alpha);

        const bool in_warmup = phase.samples_seen < config.warmup_samples;
        phase.samples_seen += 1;

        if (mode == ReweightMode::Off || in_warmup) {
            continue;  // weight 1, absorbed
        }
        any_post_warmup = true;

        const bool gated = cell.count >= static_cast<std::uint64_t>(config.min_group_count) &&
                           o.threshold > 0.0;
        if (!gated || losses[i] <= o.threshold) {
            continue;  // reliable or ungated: weight 1, absorbed
        }

        o.flagged = true;
        o.absorbed = false;
        any_flagged = true;
        switch (mode) {
            case ReweightMode::Soft:
                candidates[i] = raw_weight(losses[i], o.threshold);
                break;
            case ReweightMode::HardFilter:
                candidates[i] = 0.0;
                break;
            default:
                break;  // UnitWeight keeps candidate 1 -> weight stays 1
        }
    }

    // Floor over the whole batch's candidate weights (1.0 for unflagged),
    // then the ramp blend toward full suppression. UnitWeight keeps every
    // weight at exactly 1.
    if (any_flagged && mode != ReweightMode::UnitWeight) {
        const double floor = (mode == ReweightMode::Soft)
                                 ? batch_floor(candidates, config.floor_percentile)
                                 : 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (!out[i].flagged) continue;
            const double w = std::max(floor, candidates[i]);
            out[i].weight = (1.0 - gamma) * 1.0 + gamma * w;
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        out[i].adjusted_loss = out[i].weight * losses[i];
        if (out[i].absorbed) {
            registry.absorb(groups[i], losses[i]);
        }
    }
    if (any_post_warmup) {
        phase.post_warmup_steps += 1;
    }
    return out;
}

double weighted_batch_loss(std::span<const double> losses,
                           std::span<const ReweightOutcome> outcomes) {
    if (losses.empty()) {
        throw EmptyInputError("weighted_batch_loss: empty batch");
    }
    if (losses.size() != outcomes.size()) {
        throw ShapeError("weighted_batch_loss: " + std::to_string(losses.size()) +
                         " losses vs " + std::to_string(outcomes.size()) + " outcomes");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < losses.size(); ++i) {
        sum += outcomes[i].weight * losses[i];
    }
    return sum / static_cast<double>(losses.size());
}

}  // namespace resure
