#include "resure/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <unordered_map>

#include "resure/errors.hpp"
#include "resure/util.hpp"

namespace resure {

std::string to_string(Strategy s) {
    switch (s) {
        case Strategy::Resure: return "resure";
        case Strategy::Uniform: return "uniform";
        case Strategy::HardFilter: return "hard_filter";
        case Strategy::NoWelfordAblation: return "no_welford";
    }
    return "resure";
}

Strategy strategy_from_string(const std::string& s) {
    if (s == "resure") return Strategy::Resure;
    if (s == "uniform") return Strategy::Uniform;
    if (s == "hard_filter") return Strategy::HardFilter;
    if (s == "no_welford") return Strategy::NoWelfordAblation;
    throw ConfigError("unknown strategy '" + s + "'");
}

namespace {

ReweightMode mode_for(Strategy s) {
    switch (s) {
        case Strategy::Resure: return ReweightMode::Soft;
        case Strategy::Uniform: return ReweightMode::Off;
        case Strategy::HardFilter: return ReweightMode::HardFilter;
        case Strategy::NoWelfordAblation: return ReweightMode::UnitWeight;
    }
    return ReweightMode::Soft;
}

void validate_inputs(const TrainConfig& cfg, const std::vector<Sample>& train_data,
                     const std::vector<Sample>& eval_data) {
    if (train_data.empty()) throw DataError("train: empty training set");
    if (eval_data.empty()) throw DataError("train: empty eval set");
    if (cfg.epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (cfg.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (cfg.accumulation_steps < 1 || cfg.batch_size % cfg.accumulation_steps != 0) {
        throw ConfigError("train: accumulation_steps must divide batch_size");
    }

    std::set<std::int64_t> train_ids;
    for (const Sample& s : train_data) train_ids.insert(s.id);
    if (train_ids.size() != train_data.size()) {
        throw DataError("train: duplicate sample ids in training set");
    }
    for (const Sample& s : eval_data) {
        if (train_ids.count(s.id)) {
            throw DataError("train: eval sample id " + std::to_string(s.id) +
                            " also present in training set");
        }
    }
}

// Epoch orderings over indices into train_data. Epoch 1 leads with the
// warm-up partition drawn from the High tier; later epochs are full
// shuffles (minus the warm-up partition when reuse is disabled).
struct Ordering {
    std::vector<std::size_t> warmup;   // epoch-1 prefix
    std::vector<std::size_t> rest;     // remaining pool
};

Ordering plan_warmup(const std::vector<Sample>& data, std::int64_t warmup_samples,
                     Rng& rng) {
    std::vector<std::size_t> high;
    std::vector<std::size_t> others;
    for (std::size_t i = 0; i < data.size(); ++i) {
        (data[i].tier == Tier::High ? high : others).push_back(i);
    }
    rng.shuffle(high);

    Ordering ord;
    const auto take = std::min<std::size_t>(high.size(),
                                            static_cast<std::size_t>(
                                                std::max<std::int64_t>(warmup_samples, 0)));
    ord.warmup.assign(high.begin(), high.begin() + static_cast<std::ptrdiff_t>(take));
    ord.rest.assign(high.begin() + static_cast<std::ptrdiff_t>(take), high.end());
    ord.rest.insert(ord.rest.end(), others.begin(), others.end());
    std::sort(ord.rest.begin(), ord.rest.end());  // independent of tier split order
    return ord;
}

}  // namespace

RunReport train(const TrainConfig& cfg, const std::vector<Sample>& train_data,
                const std::vector<Sample>& eval_data) {
    validate_inputs(cfg, train_data, eval_data);

    const auto feature_dim = static_cast<int>(train_data.front().features.size());
    int max_group = 1;
    for (const Sample& s : train_data) max_group = std::max(max_group, s.group);

    Rng init_rng(derive_seed(cfg.seed, "model-init"));
    Model model = Model::init(cfg.model, cfg.objective, feature_dim, cfg.hidden_width,
                              init_rng);
    AdamOptimizer adam(model.params().size(), cfg.beta1, cfg.beta2);
    StatsRegistry registry(max_group);
    PhaseState phase;
    const ReweightMode mode = mode_for(cfg.strategy);

    // Clamp the warm-up target to the available High-tier partition so that
    // warm-up never absorbs samples that were not designated high quality.
    ReweightConfig rw = cfg.reweight;
    Rng warmup_rng(derive_seed(cfg.seed, "warmup-order"));
    const Ordering ord = plan_warmup(train_data, rw.warmup_samples, warmup_rng);
    rw.warmup_samples = static_cast<std::int64_t>(ord.warmup.size());

    const auto ceil_div = [&](std::size_t count) {
        return static_cast<std::int64_t>((count + static_cast<std::size_t>(cfg.batch_size) - 1) /
                                         static_cast<std::size_t>(cfg.batch_size));
    };
    const std::size_t later_count =
        ord.rest.size() + (cfg.reuse_warmup_samples ? ord.warmup.size() : 0);
    const std::int64_t total_steps =
        ceil_div(train_data.size()) + ceil_div(later_count) * (cfg.epochs - 1);

    RunReport report;
    report.total_steps = total_steps;
    std::unordered_map<std::int64_t, bool> final_flag;     // sample id -> last-epoch flag
    std::unordered_map<std::int64_t, double> final_weight; // sample id -> last-epoch weight

    const int micro_size = cfg.batch_size / cfg.accumulation_steps;
    std::int64_t step = 0;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        // Epoch ordering: warm-up prefix first, then the shuffled pool.
        std::vector<std::size_t> order;
        Rng shuffle_rng(derive_seed(cfg.seed, "epoch-order-" + std::to_string(epoch)));
        if (epoch == 1) {
            order = ord.warmup;
            std::vector<std::size_t> pool = ord.rest;
            shuffle_rng.shuffle(pool);
            order.insert(order.end(), pool.begin(), pool.end());
        } else {
            order = ord.rest;
            if (cfg.reuse_warmup_samples) {
                order.insert(order.end(), ord.warmup.begin(), ord.warmup.end());
            }
            shuffle_rng.shuffle(order);
        }

        double epoch_loss_sum = 0.0;
        std::int64_t epoch_sample_count = 0;
        double epoch_weighted_sum = 0.0;
        std::int64_t epoch_batch_count = 0;

        for (std::size_t pos = 0; pos < order.size();) {
            const std::size_t batch_end =
                std::min(order.size(), pos + static_cast<std::size_t>(cfg.batch_size));
            std::vector<double> grad(model.params().size(), 0.0);
            const auto batch_total = static_cast<double>(batch_end - pos);

            for (std::size_t micro_start = pos; micro_start < batch_end;
                 micro_start += static_cast<std::size_t>(micro_size)) {
                const std::size_t micro_end =
                    std::min(batch_end, micro_start + static_cast<std::size_t>(micro_size));
                const std::size_t m = micro_end - micro_start;

                std::vector<double> losses(m);
                std::vector<int> groups(m);
                for (std::size_t i = 0; i < m; ++i) {
                    const Sample& s = train_data[order[micro_start + i]];
                    const double l = model.per_sample_loss(s);
                    if (!std::isfinite(l)) {
                        throw DivergenceError("train: non-finite loss", step);
                    }
                    losses[i] = l;
                    groups[i] = s.group;
                }

                const std::vector<ReweightOutcome> outcomes =
                    process_batch(registry, losses, groups, rw, phase, mode);

                for (std::size_t i = 0; i < m; ++i) {
                    const Sample& s = train_data[order[micro_start + i]];
                    model.accumulate_gradient(s, outcomes[i].weight / batch_total, grad);

                    StepRecord rec;
                    rec.epoch = epoch;
                    rec.step = step;
                    rec.sample_id = s.id;
                    rec.group = s.group;
                    rec.loss = losses[i];
                    rec.threshold = outcomes[i].threshold;
                    rec.flagged = outcomes[i].flagged;
                    rec.absorbed = outcomes[i].absorbed;
                    rec.weight = outcomes[i].weight;
                    rec.adjusted_loss = outcomes[i].adjusted_loss;
                    report.steps.push_back(rec);

                    final_flag[s.id] = outcomes[i].flagged;
                    final_weight[s.id] = outcomes[i].weight;
                    epoch_loss_sum += losses[i];
                    ++epoch_sample_count;
                }
                epoch_weighted_sum += weighted_batch_loss(losses, outcomes);
                ++epoch_batch_count;
            }

            const double lr = cosine_lr(cfg.lr, step, total_steps, cfg.warmup_ratio);
            adam.step(model.params(), grad, lr);
            for (double p : model.params()) {
                if (!std::isfinite(p)) {
                    throw DivergenceError("train: non-finite parameter", step);
                }
            }
            ++step;
            pos = batch_end;
        }

        for (int g = 1; g <= max_group; ++g) {
            const GroupStats& cell = registry.cell(g);
            report.group_stats.push_back(
                {epoch, g, cell.count, cell.mean, cell.variance()});
        }

        const auto [eval_loss, eval_acc] = model.evaluate(eval_data, cfg.eval_tolerance);
        EpochMetrics em;
        em.epoch = epoch;
        em.train_loss = epoch_loss_sum / static_cast<double>(epoch_sample_count);
        em.weighted_train_loss = epoch_weighted_sum / static_cast<double>(epoch_batch_count);
        em.eval_loss = eval_loss;
        em.eval_accuracy = eval_acc;
        report.epochs.push_back(em);
    }

    report.final_eval_loss = report.epochs.back().eval_loss;
    report.final_eval_accuracy = report.epochs.back().eval_accuracy;

    // Detection audit against injected ground truth, on final-epoch flags.
    std::vector<bool> flags;
    std::vector<bool> truth;
    double clean_sum = 0.0, noisy_sum = 0.0;
    std::int64_t clean_n = 0, noisy_n = 0;
    for (const Sample& s : train_data) {
        const auto it = final_flag.find(s.id);
        if (it == final_flag.end()) continue;  // excluded by reuse_warmup_samples=false
        flags.push_back(it->second);
        truth.push_back(s.is_noisy);
        const double w = final_weight.at(s.id);
        if (s.is_noisy) {
            noisy_sum += w;
            ++noisy_n;
        } else {
            clean_sum += w;
            ++clean_n;
        }
    }
    report.detection = detection_metrics(flags, truth);
    if (clean_n > 0) report.mean_weight_clean = clean_sum / static_cast<double>(clean_n);
    if (noisy_n > 0) report.mean_weight_noisy = noisy_sum / static_cast<double>(noisy_n);
    if (report.mean_weight_clean && report.mean_weight_noisy) {
        report.noise_gap = *report.mean_weight_clean - *report.mean_weight_noisy;
    }

    std::map<std::int64_t, bool> truth_by_id;
    for (const Sample& s : train_data) truth_by_id[s.id] = s.is_noisy;
    report.weights = weight_summary(report.steps, truth_by_id);

    return report;
}

}  // namespace resure
