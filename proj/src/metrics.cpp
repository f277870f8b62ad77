#include "resure/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "resure/errors.hpp"
#include "resure/util.hpp"

namespace resure {

namespace {

// Ranks 1..n with ties replaced by the average rank of the tied run.
std::vector<double> average_ranks(std::span<const double> xs) {
    const std::size_t n = xs.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });

    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && xs[order[j + 1]] == xs[order[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

ClassWeightStats summarize_weights(std::vector<double> ws) {
    ClassWeightStats s;
    s.n = ws.size();
    s.mean = mean_of(ws);
    s.median = percentile(ws, 50.0);
    s.p5 = percentile(ws, 5.0);
    s.p95 = percentile(std::move(ws), 95.0);
    return s;
}

}  // namespace

std::optional<double> spearman(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) {
        throw ShapeError("spearman: " + std::to_string(xs.size()) + " xs vs " +
                         std::to_string(ys.size()) + " ys");
    }
    if (xs.size() < 2) {
        throw ValueError("spearman: need at least 2 points");
    }
    const std::vector<double> rx = average_ranks(xs);
    const std::vector<double> ry = average_ranks(ys);

    const double n = static_cast<double>(xs.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = rx[i] - mx;
        const double dy = ry[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

DetectionMetrics detection_metrics(const std::vector<bool>& flags,
                                   const std::vector<bool>& truth) {
    if (flags.size() != truth.size()) {
        throw ShapeError("detection_metrics: " + std::to_string(flags.size()) + " flags vs " +
                         std::to_string(truth.size()) + " truth");
    }
    DetectionMetrics m;
    for (std::size_t i = 0; i < flags.size(); ++i) {
        if (flags[i] && truth[i]) ++m.tp;
        else if (flags[i] && !truth[i]) ++m.fp;
        else if (!flags[i] && truth[i]) ++m.fn;
        else ++m.tn;
    }
    if (m.tp + m.fp > 0) {
        m.precision = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
    }
    if (m.tp + m.fn > 0) {
        m.recall = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
    }
    if (m.precision && m.recall && (*m.precision + *m.recall) > 0.0) {
        m.f1 = 2.0 * *m.precision * *m.recall / (*m.precision + *m.recall);
    }
    return m;
}

std::vector<EpochWeightSummary> weight_summary(std::span<const StepRecord> step_log,
                                               const std::map<std::int64_t, bool>& truth) {
    if (step_log.empty()) throw EmptyInputError("weight_summary: empty step log");

    std::map<int, std::pair<std::vector<double>, std::vector<double>>> by_epoch;
    for (const StepRecord& rec : step_log) {
        const auto it = truth.find(rec.sample_id);
        if (it == truth.end()) {
            throw JoinError("weight_summary: sample id " + std::to_string(rec.sample_id) +
                            " missing from truth");
        }
        auto& [clean, noisy] = by_epoch[rec.epoch];
        (it->second ? noisy : clean).push_back(rec.weight);
    }

    std::vector<EpochWeightSummary> out;
    for (auto& [epoch, classes] : by_epoch) {
        EpochWeightSummary s;
        s.epoch = epoch;
        if (!classes.first.empty()) s.clean = summarize_weights(std::move(classes.first));
        if (!classes.second.empty()) s.noisy = summarize_weights(std::move(classes.second));
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace resure
