#include "resure/experiment.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>

#include "resure/errors.hpp"
#include "resure/rng.hpp"
#include "resure/util.hpp"

namespace resure {

using nlohmann::json;

namespace {

constexpr std::int64_t kIdBlock = 10000000;
constexpr std::int64_t kHighBase = 0 * kIdBlock;
constexpr std::int64_t kNormalBase = 1 * kIdBlock;
constexpr std::int64_t kLowBase = 2 * kIdBlock;
constexpr std::int64_t kDriftBase = 3 * kIdBlock;
constexpr std::int64_t kEvalBase = 9 * kIdBlock;

void rebase_ids(std::vector<Sample>& samples, std::int64_t base) {
    for (Sample& s : samples) s.id += base;
}

std::vector<Sample> build_tier(const DataConfig& data, Tier tier, const TierConfig& tc,
                               std::int64_t id_base, const std::string& name) {
    std::vector<Sample> samples =
        generate(data.task, tc.count, derive_seed(data.seed, "tier-" + name));
    rebase_ids(samples, id_base);
    if (tc.noise_rate > 0.0) {
        NoiseSpec noise;
        noise.per_group_rates = group_noise_rates(tc.noise_rate, data.task.num_groups);
        noise.corruption = data.corruption;
        noise.jitter_sigma = data.jitter_sigma;
        samples = inject_noise(std::move(samples), noise,
                               derive_seed(data.seed, "noise-" + name));
    }
    for (Sample& s : samples) s.tier = tier;
    return samples;
}

const std::vector<Sample>& partition_for_token(const Partitions& parts,
                                               const std::string& token) {
    if (token == "H") return parts.high;
    if (token == "N") return parts.normal;
    if (token == "L") return parts.low;
    return parts.drift;
}

Tier tier_for_token(const std::string& token) {
    if (token == "H") return Tier::High;
    if (token == "L") return Tier::Low;
    return Tier::Normal;  // N and D
}

}  // namespace

Partitions build_partitions(const DataConfig& data) {
    Partitions parts;
    parts.high = build_tier(data, Tier::High, data.tiers.at(Tier::High), kHighBase, "high");
    if (auto it = data.tiers.find(Tier::Normal); it != data.tiers.end()) {
        parts.normal = build_tier(data, Tier::Normal, it->second, kNormalBase, "normal");
    }
    if (auto it = data.tiers.find(Tier::Low); it != data.tiers.end()) {
        parts.low = build_tier(data, Tier::Low, it->second, kLowBase, "low");
    }
    if (data.drift && data.drift->count > 0) {
        GeneratorSpec drift_spec = data.task;
        drift_spec.offset = data.drift->offset;
        drift_spec.rule_seed = derive_seed(data.seed, "drift-rule");
        parts.drift = generate(drift_spec, data.drift->count, derive_seed(data.seed, "drift"));
        rebase_ids(parts.drift, kDriftBase);
        for (Sample& s : parts.drift) {
            s.task = TaskTag::Drift;
            s.tier = Tier::Normal;
        }
    }
    GeneratorSpec eval_spec = data.task;
    eval_spec.margin = data.eval_margin;
    parts.eval = generate(eval_spec, data.eval_count, derive_seed(data.seed, "eval"));
    rebase_ids(parts.eval, kEvalBase);
    return parts;
}

Dataset build_dataset(const DataConfig& data, const std::string& mixture) {
    const std::vector<std::string> tokens = parse_mixture(mixture);
    const Partitions parts = build_partitions(data);

    std::vector<std::pair<std::vector<Sample>, Tier>> tiers;
    for (const std::string& token : tokens) {
        const std::vector<Sample>& part = partition_for_token(parts, token);
        if (part.empty()) {
            throw DataError("mixture '" + mixture + "': partition '" + token +
                            "' is empty; check the data section");
        }
        tiers.emplace_back(part, tier_for_token(token));
    }
    Dataset ds;
    ds.train = mix(tiers, derive_seed(data.seed, "mix-" + mixture));
    ds.eval = parts.eval;
    return ds;
}

std::function<double(const Sample&)> make_probe_scorer(const std::vector<Sample>& train_set,
                                                       const DataConfig& data,
                                                       const TrainConfig& train) {
    // Clean seed set: a deterministic draw from the High tier, same budget
    // as the statistics warm-up.
    std::vector<std::size_t> high;
    for (std::size_t i = 0; i < train_set.size(); ++i) {
        if (train_set[i].tier == Tier::High) high.push_back(i);
    }
    if (high.empty()) throw DataError("probe scorer: no High-tier samples available");
    Rng rng(derive_seed(data.seed, "probe-seed-set"));
    rng.shuffle(high);
    const auto take = std::min<std::size_t>(
        high.size(),
        static_cast<std::size_t>(std::max<std::int64_t>(train.reweight.warmup_samples, 1)));
    high.resize(take);

    Rng init_rng(derive_seed(data.seed, "probe-init"));
    const auto dim = static_cast<int>(train_set.front().features.size());
    auto probe = std::make_shared<Model>(
        Model::init(ModelKind::Linear, train.objective, dim, 0, init_rng));
    AdamOptimizer adam(probe->params().size(), train.beta1, train.beta2);

    // Fixed brief schedule, independent of the main run's settings.
    const int probe_epochs = 8;
    const double probe_lr = 0.05;
    const std::size_t batch = 64;
    const auto total_steps = static_cast<std::int64_t>(
        probe_epochs * ((high.size() + batch - 1) / batch));
    std::int64_t step = 0;
    std::vector<double> weights(batch, 1.0);
    for (int epoch = 0; epoch < probe_epochs; ++epoch) {
        for (std::size_t pos = 0; pos < high.size(); pos += batch) {
            const std::size_t end = std::min(high.size(), pos + batch);
            std::vector<Sample> micro;
            micro.reserve(end - pos);
            for (std::size_t i = pos; i < end; ++i) micro.push_back(train_set[high[i]]);
            const auto grad = batch_gradient(
                *probe, micro, std::span<const double>(weights.data(), micro.size()));
            adam.step(probe->params(), grad, cosine_lr(probe_lr, step, total_steps, 0.0));
            ++step;
        }
    }
    return [probe](const Sample& s) { return -probe->per_sample_loss(s); };
}

RunReport run_experiment(const ExperimentConfig& cfg, const RunSpec& spec) {
    Dataset ds = build_dataset(cfg.data, spec.mixture);

    TrainConfig train_cfg = cfg.train;
    train_cfg.strategy = spec.strategy;
    train_cfg.seed = spec.seed;
    if (spec.prefilter_keep) train_cfg.prefilter_keep = *spec.prefilter_keep;

    if (train_cfg.prefilter_keep) {
        const auto scorer = make_probe_scorer(ds.train, cfg.data, train_cfg);
        ds.train = prefilter(ds.train, scorer, *train_cfg.prefilter_keep);
    }
    return train(train_cfg, ds.train, ds.eval);
}

void cmd_gen_data(const ExperimentConfig& cfg, const std::filesystem::path& out_root) {
    const std::filesystem::path dir = out_root / "data";
    std::filesystem::create_directories(dir);
    const Partitions parts = build_partitions(cfg.data);

    json files = json::object();
    auto emit = [&](const std::string& name, const std::vector<Sample>& samples) {
        if (samples.empty()) return;
        write_samples_jsonl(dir / name, samples);
        std::int64_t noisy = 0;
        for (const Sample& s : samples) noisy += s.is_noisy ? 1 : 0;
        files[name] = {{"count", samples.size()}, {"noisy", noisy}};
    };
    emit("high.jsonl", parts.high);
    emit("normal.jsonl", parts.normal);
    emit("low.jsonl", parts.low);
    emit("drift.jsonl", parts.drift);
    emit("eval.jsonl", parts.eval);

    json manifest;
    manifest["config_hash"] = cfg.hash;
    manifest["seed"] = cfg.data.seed;
    manifest["files"] = files;
    json rates = json::object();
    for (const auto& [tier, tc] : cfg.data.tiers) {
        json per_group = json::object();
        for (const auto& [g, r] : group_noise_rates(tc.noise_rate, cfg.data.task.num_groups)) {
            per_group[std::to_string(g)] = r;
        }
        rates[to_string(tier)] = per_group;
    }
    manifest["noise_rates"] = rates;

    if (cfg.data.emit_dialogues) {
        // One dialogue per train sample, in partition file order; the
        // record's turn_group equals the sample's group.
        Rng rng(derive_seed(cfg.data.seed, "dialogues"));
        std::vector<DialogueRecord> dialogues;
        for (const auto* part : {&parts.high, &parts.normal, &parts.low, &parts.drift}) {
            for (const Sample& s : *part) dialogues.push_back(make_dialogue(s.group, rng));
        }
        write_dialogues_jsonl(dir / "dialogues.jsonl", dialogues);
        manifest["dialogues"] = {{"file", "dialogues.jsonl"},
                                 {"count", dialogues.size()},
                                 {"aligned_with", json::array({"high.jsonl", "normal.jsonl",
                                                               "low.jsonl", "drift.jsonl"})}};
    }

    std::ofstream out(dir / "manifest.json");
    if (!out) throw DataError("cannot write " + (dir / "manifest.json").string());
    out << manifest.dump(2) << '\n';
}

namespace {

std::vector<Sample> load_mixture(const ExperimentConfig& cfg,
                                 const std::filesystem::path& data_dir,
                                 const std::string& mixture) {
    std::vector<std::pair<std::vector<Sample>, Tier>> tiers;
    for (const std::string& token : parse_mixture(mixture)) {
        const std::string file = token == "H"   ? "high.jsonl"
                                 : token == "N" ? "normal.jsonl"
                                 : token == "L" ? "low.jsonl"
                                                : "drift.jsonl";
        if (!std::filesystem::exists(data_dir / file)) {
            throw DataError("mixture '" + mixture + "': missing " +
                            (data_dir / file).string() + " (run gen-data first)");
        }
        tiers.emplace_back(read_samples_jsonl(data_dir / file), tier_for_token(token));
    }
    return mix(tiers, derive_seed(cfg.data.seed, "mix-" + mixture));
}

json run_meta_json(const RunSpec& spec, const std::optional<double>& prefilter_keep) {
    json j;
    j["mixture"] = spec.mixture;
    j["strategy"] = to_string(spec.strategy);
    j["seed"] = spec.seed;
    j["prefilter_keep"] = prefilter_keep ? json(*prefilter_keep) : json(nullptr);
    return j;
}

}  // namespace

void cmd_train(const ExperimentConfig& cfg, const std::filesystem::path& data_dir,
               const std::filesystem::path& out_root) {
    std::vector<Sample> train_set = load_mixture(cfg, data_dir, cfg.train_mixture);
    if (!std::filesystem::exists(data_dir / "eval.jsonl")) {
        throw DataError("missing " + (data_dir / "eval.jsonl").string() +
                        " (run gen-data first)");
    }
    const std::vector<Sample> eval_set = read_samples_jsonl(data_dir / "eval.jsonl");

    const std::filesystem::path run_dir = out_root / "run";
    std::filesystem::create_directories(run_dir);
    write_truth_csv(run_dir / "truth.csv", train_set, cfg.hash);

    TrainConfig train_cfg = cfg.train;
    if (train_cfg.prefilter_keep) {
        const auto scorer = make_probe_scorer(train_set, cfg.data, train_cfg);
        train_set = prefilter(train_set, scorer, *train_cfg.prefilter_keep);
    }

    const RunReport report = train(train_cfg, train_set, eval_set);
    RunSpec spec{cfg.train_mixture, train_cfg.strategy, train_cfg.seed, std::nullopt};
    write_run_report(report, run_dir, cfg.echo, cfg.hash,
                     run_meta_json(spec, train_cfg.prefilter_keep));
}

namespace {

struct PendingRun {
    RunSpec spec;
    int complexity_rank = 1;
    std::filesystem::path dir;
};

std::string run_name(const RunSpec& spec) {
    return spec.mixture + "_" + to_string(spec.strategy) + "_seed" +
           std::to_string(spec.seed);
}

int run_worker(const ExperimentConfig& cfg, const PendingRun& run) {
    try {
        const RunReport report = run_experiment(cfg, run.spec);
        write_run_report(report, run.dir, cfg.echo, cfg.hash,
                         run_meta_json(run.spec, cfg.train.prefilter_keep));
        return 0;
    } catch (const ConfigError&) {
        return 2;
    } catch (const DataError&) {
        return 3;
    } catch (const DivergenceError&) {
        return 4;
    } catch (...) {
        return 1;
    }
}

// Executes runs in forked worker processes, at most `jobs` at a time.
std::vector<int> run_pool(const ExperimentConfig& cfg, const std::vector<PendingRun>& runs,
                          int jobs) {
    std::vector<int> statuses(runs.size(), -1);
    std::map<pid_t, std::size_t> active;
    std::size_t next = 0;

    while (next < runs.size() || !active.empty()) {
        while (next < runs.size() && active.size() < static_cast<std::size_t>(jobs)) {
            std::fflush(nullptr);
            const pid_t pid = fork();
            if (pid < 0) throw Error("fork failed");
            if (pid == 0) {
                _exit(run_worker(cfg, runs[next]));
            }
            active[pid] = next;
            ++next;
        }
        int status = 0;
        const pid_t pid = wait(&status);
        if (pid < 0) throw Error("wait failed");
        const auto it = active.find(pid);
        if (it == active.end()) continue;
        statuses[it->second] = WIFEXITED(status) ? WEXITSTATUS(status) : 1;
        active.erase(it);
    }
    return statuses;
}

struct SweepRow {
    std::string mixture;
    int rank = 1;
    Strategy strategy = Strategy::Resure;
    std::uint64_t seed = 1;
    double eval_accuracy = 0.0;
    std::optional<double> mean_weight_clean;
    std::optional<double> mean_weight_noisy;
};

void write_sweep_csv(const std::filesystem::path& path, const std::vector<SweepRow>& rows,
                     const std::map<Strategy, std::optional<double>>& spearman_by_strategy,
                     const std::string& config_hash) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "# config_hash=" << config_hash << "\n"
        << "setting,complexity_rank,strategy,seed,eval_accuracy,mean_weight_clean,"
           "mean_weight_noisy,spearman\n";
    auto opt = [](const std::optional<double>& v) {
        return v ? fmt_double(*v) : std::string("nan");
    };
    for (const SweepRow& r : rows) {
        out << r.mixture << ',' << r.rank << ',' << to_string(r.strategy) << ',' << r.seed
            << ',' << fmt_double(r.eval_accuracy) << ',' << opt(r.mean_weight_clean) << ','
            << opt(r.mean_weight_noisy) << ',' << opt(spearman_by_strategy.at(r.strategy))
            << '\n';
    }
}

// Spearman of (complexity rank, seed-mean accuracy) per strategy; nullopt
// when fewer than two settings or when ranks/means are degenerate.
std::map<Strategy, std::optional<double>> sweep_spearman(const SweepConfig& sweep,
                                                         const std::vector<SweepRow>& rows) {
    std::map<Strategy, std::optional<double>> out;
    for (Strategy strategy : sweep.strategies) {
        std::vector<double> ranks;
        std::vector<double> means;
        for (std::size_t m = 0; m < sweep.mixtures.size(); ++m) {
            double sum = 0.0;
            std::int64_t n = 0;
            for (const SweepRow& r : rows) {
                if (r.strategy == strategy && r.mixture == sweep.mixtures[m]) {
                    sum += r.eval_accuracy;
                    ++n;
                }
            }
            if (n > 0) {
                ranks.push_back(static_cast<double>(m + 1));
                means.push_back(sum / static_cast<double>(n));
            }
        }
        out[strategy] = ranks.size() < 2 ? std::nullopt : spearman(ranks, means);
    }
    return out;
}

}  // namespace

int cmd_sweep(const ExperimentConfig& cfg, const std::filesystem::path& out_root, int jobs) {
    if (!cfg.sweep) throw ConfigError("config: sweep section required for the sweep command");
    if (jobs < 1) throw ConfigError("sweep: --jobs must be >= 1");
    const SweepConfig& sweep = *cfg.sweep;

    const std::filesystem::path sweep_dir = out_root / "sweep";
    std::filesystem::create_directories(sweep_dir / "truth");

    // Ground truth per mixture, for post-hoc joins by the report command.
    for (const std::string& mixture : sweep.mixtures) {
        const Dataset ds = build_dataset(cfg.data, mixture);
        write_truth_csv(sweep_dir / "truth" / (mixture + ".csv"), ds.train, cfg.hash);
    }

    std::vector<PendingRun> runs;
    for (std::size_t m = 0; m < sweep.mixtures.size(); ++m) {
        for (Strategy strategy : sweep.strategies) {
            for (std::uint64_t seed : sweep.seeds) {
                PendingRun run;
                run.spec = RunSpec{sweep.mixtures[m], strategy, seed, std::nullopt};
                run.complexity_rank = static_cast<int>(m + 1);
                run.dir = sweep_dir / "runs" / run_name(run.spec);
                runs.push_back(std::move(run));
            }
        }
    }

    const std::vector<int> statuses = run_pool(cfg, runs, jobs);

    json run_index = json::array();
    int failures = 0;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        if (statuses[i] != 0) ++failures;
        json entry = run_meta_json(runs[i].spec, cfg.train.prefilter_keep);
        entry["complexity_rank"] = runs[i].complexity_rank;
        entry["dir"] = std::filesystem::relative(runs[i].dir, sweep_dir).string();
        entry["status"] = statuses[i];
        run_index.push_back(std::move(entry));
    }
    {
        json doc;
        doc["config_hash"] = cfg.hash;
        doc["runs"] = run_index;
        std::ofstream out(sweep_dir / "sweep_runs.json");
        if (!out) throw DataError("cannot write sweep_runs.json");
        out << doc.dump(2) << '\n';
    }
    if (failures > 0) return failures;

    std::vector<SweepRow> rows;
    for (const PendingRun& run : runs) {
        const json summary = read_summary_json(run.dir / "summary.json");
        SweepRow row;
        row.mixture = run.spec.mixture;
        row.rank = run.complexity_rank;
        row.strategy = run.spec.strategy;
        row.seed = run.spec.seed;
        row.eval_accuracy = summary.at("final").at("eval_accuracy").get<double>();
        const json& clean = summary.at("final").at("mean_weight_clean");
        const json& noisy = summary.at("final").at("mean_weight_noisy");
        if (!clean.is_null()) row.mean_weight_clean = clean.get<double>();
        if (!noisy.is_null()) row.mean_weight_noisy = noisy.get<double>();
        rows.push_back(std::move(row));
    }
    write_sweep_csv(sweep_dir / "sweep.csv", rows, sweep_spearman(sweep, rows), cfg.hash);
    return 0;
}

void cmd_report(const ExperimentConfig& cfg, const std::filesystem::path& out_root) {
    if (!cfg.sweep) throw ConfigError("config: sweep section required for the report command");
    const std::filesystem::path sweep_dir = out_root / "sweep";
    const std::filesystem::path index_path = sweep_dir / "sweep_runs.json";
    if (!std::filesystem::exists(index_path)) {
        throw DataError("missing " + index_path.string() + " (run sweep first)");
    }
    json index;
    {
        std::ifstream in(index_path);
        try {
            index = json::parse(in);
        } catch (const json::exception& e) {
            throw DataError(index_path.string() + ": " + e.what());
        }
    }
    if (index.at("config_hash").get<std::string>() != cfg.hash) {
        throw DataError("report: sweep outputs were produced by a different config (hash " +
                        index.at("config_hash").get<std::string>() + " != " + cfg.hash + ")");
    }

    // Rebuild the sweep table by re-joining each run's step log against the
    // stored ground truth, instead of trusting run summaries.
    std::map<std::string, std::map<std::int64_t, bool>> truth_by_mixture;
    std::vector<SweepRow> rows;
    for (const json& entry : index.at("runs")) {
        if (entry.at("status").get<int>() != 0) {
            throw DataError("report: run " + entry.at("dir").get<std::string>() +
                            " failed with status " +
                            std::to_string(entry.at("status").get<int>()));
        }
        const std::filesystem::path dir = sweep_dir / entry.at("dir").get<std::string>();
        for (const char* file : {"steps.csv", "metrics.csv", "group_stats.csv"}) {
            if (csv_config_hash(dir / file) != cfg.hash) {
                throw DataError("report: " + (dir / file).string() +
                                " comes from a different config");
            }
        }
        const std::string mixture = entry.at("mixture").get<std::string>();
        if (!truth_by_mixture.count(mixture)) {
            truth_by_mixture[mixture] = read_truth_csv(sweep_dir / "truth" / (mixture + ".csv"));
        }

        const std::vector<StepRecord> steps = read_steps_csv(dir / "steps.csv");
        const auto summaries = weight_summary(steps, truth_by_mixture.at(mixture));
        const json summary = read_summary_json(dir / "summary.json");

        SweepRow row;
        row.mixture = mixture;
        row.rank = entry.at("complexity_rank").get<int>();
        row.strategy = strategy_from_string(entry.at("strategy").get<std::string>());
        row.seed = entry.at("seed").get<std::uint64_t>();
        row.eval_accuracy = summary.at("final").at("eval_accuracy").get<double>();
        if (!summaries.empty()) {
            const EpochWeightSummary& last = summaries.back();
            if (last.clean) row.mean_weight_clean = last.clean->mean;
            if (last.noisy) row.mean_weight_noisy = last.noisy->mean;
        }
        rows.push_back(std::move(row));
    }
    write_sweep_csv(sweep_dir / "report.csv", rows, sweep_spearman(*cfg.sweep, rows),
                    cfg.hash);
}

}  // namespace resure
