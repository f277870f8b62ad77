#include "resure/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "resure/errors.hpp"
#include "resure/rng.hpp"
#include "resure/util.hpp"

namespace resure {

using nlohmann::json;

namespace {

void expect_object(const json& node, const std::string& path) {
    if (!node.is_object()) {
        throw ConfigError("config: " + path + ": expected an object");
    }
}

void reject_unknown_keys(const json& node, const std::string& path,
                         const std::set<std::string>& allowed) {
    for (const auto& [key, _] : node.items()) {
        if (!allowed.count(key)) {
            throw ConfigError("config: " + path + "." + key + ": unknown key");
        }
    }
}

template <typename T>
T get_field(const json& node, const std::string& path, const char* key, T fallback) {
    if (!node.contains(key)) return fallback;
    try {
        return node.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("config: " + path + "." + key + ": wrong type");
    }
}

void require(bool cond, const std::string& path, const std::string& msg) {
    if (!cond) throw ConfigError("config: " + path + ": " + msg);
}

TaskKind parse_task_kind(const std::string& s, const std::string& path) {
    if (s == "classification") return TaskKind::Classification;
    if (s == "regression") return TaskKind::Regression;
    throw ConfigError("config: " + path + ": unknown task kind '" + s + "'");
}

Corruption parse_corruption(const std::string& s, const std::string& path) {
    if (s == "label_flip") return Corruption::LabelFlip;
    if (s == "label_shuffle") return Corruption::LabelShuffle;
    if (s == "target_jitter") return Corruption::TargetJitter;
    throw ConfigError("config: " + path + ": unknown corruption '" + s + "'");
}

ModelKind parse_model_kind(const std::string& s, const std::string& path) {
    if (s == "linear") return ModelKind::Linear;
    if (s == "mlp") return ModelKind::Mlp;
    throw ConfigError("config: " + path + ": unknown model '" + s + "'");
}

GeneratorSpec parse_task(const json& node, const std::string& path, std::uint64_t data_seed) {
    expect_object(node, path);
    reject_unknown_keys(node, path,
                        {"kind", "feature_dim", "num_groups", "group_weights", "margin",
                         "residual_sigma", "clean_accuracy"});
    GeneratorSpec spec;
    spec.kind = parse_task_kind(get_field<std::string>(node, path, "kind", "classification"),
                                path + ".kind");
    spec.feature_dim = get_field<int>(node, path, "feature_dim", 16);
    spec.num_groups = get_field<int>(node, path, "num_groups", 4);
    spec.group_weights = get_field<std::vector<double>>(node, path, "group_weights", {});
    spec.margin = get_field<double>(node, path, "margin", 0.1);
    spec.residual_sigma = get_field<double>(node, path, "residual_sigma", 0.1);
    spec.clean_accuracy = get_field<double>(node, path, "clean_accuracy", 1.0);
    spec.rule_seed = derive_seed(data_seed, "primary-rule");

    require(spec.feature_dim >= 1, path + ".feature_dim", "must be >= 1");
    require(spec.num_groups >= 1, path + ".num_groups", "must be >= 1");
    require(spec.margin >= 0.0, path + ".margin", "must be >= 0");
    require(spec.residual_sigma >= 0.0, path + ".residual_sigma", "must be >= 0");
    for (double w : spec.group_weights) {
        require(w >= 0.0, path + ".group_weights", "weights must be >= 0");
    }
    return spec;
}

TierConfig parse_tier(const json& node, const std::string& path) {
    expect_object(node, path);
    reject_unknown_keys(node, path, {"count", "noise_rate"});
    TierConfig t;
    t.count = get_field<std::int64_t>(node, path, "count", 0);
    t.noise_rate = get_field<double>(node, path, "noise_rate", 0.0);
    require(t.count > 0, path + ".count", "must be > 0");
    require(t.count < 10000000, path + ".count", "must be < 10^7");
    require(t.noise_rate >= 0.0 && t.noise_rate <= 1.0, path + ".noise_rate",
            "must lie in [0,1]");
    return t;
}

DataConfig parse_data(const json& node) {
    const std::string path = "data";
    expect_object(node, path);
    reject_unknown_keys(node, path,
                        {"task", "drift", "tiers", "corruption", "jitter_sigma", "eval_count",
                         "eval_margin", "seed", "emit_dialogues"});
    DataConfig d;
    d.seed = get_field<std::uint64_t>(node, path, "seed", 1);
    require(node.contains("task"), path, "missing required section 'task'");
    d.task = parse_task(node.at("task"), path + ".task", d.seed);

    require(node.contains("tiers"), path, "missing required section 'tiers'");
    const json& tiers = node.at("tiers");
    expect_object(tiers, path + ".tiers");
    reject_unknown_keys(tiers, path + ".tiers", {"high", "normal", "low"});
    require(tiers.contains("high"), path + ".tiers", "missing required tier 'high'");
    d.tiers[Tier::High] = parse_tier(tiers.at("high"), path + ".tiers.high");
    if (tiers.contains("normal")) {
        d.tiers[Tier::Normal] = parse_tier(tiers.at("normal"), path + ".tiers.normal");
    }
    if (tiers.contains("low")) {
        d.tiers[Tier::Low] = parse_tier(tiers.at("low"), path + ".tiers.low");
    }

    if (node.contains("drift")) {
        const json& drift = node.at("drift");
        expect_object(drift, path + ".drift");
        reject_unknown_keys(drift, path + ".drift", {"count", "offset"});
        DriftConfig dc;
        dc.count = get_field<std::int64_t>(drift, path + ".drift", "count", 0);
        dc.offset = get_field<double>(drift, path + ".drift", "offset", 3.0);
        require(dc.count >= 0, path + ".drift.count", "must be >= 0");
        d.drift = dc;
    }

    d.corruption = parse_corruption(
        get_field<std::string>(node, path, "corruption", "label_flip"), path + ".corruption");
    d.jitter_sigma = get_field<double>(node, path, "jitter_sigma", 1.0);
    require(d.jitter_sigma > 0.0, path + ".jitter_sigma", "must be > 0");
    d.eval_count = get_field<std::int64_t>(node, path, "eval_count", 2000);
    require(d.eval_count > 0, path + ".eval_count", "must be > 0");
    d.eval_margin = get_field<double>(node, path, "eval_margin", 0.0);
    require(d.eval_margin >= 0.0, path + ".eval_margin", "must be >= 0");
    d.emit_dialogues = get_field<bool>(node, path, "emit_dialogues", false);
    return d;
}

ReweightConfig parse_reweight(const json& node, const std::string& path) {
    expect_object(node, path);
    reject_unknown_keys(node, path,
                        {"alpha", "floor_percentile", "min_group_count", "warmup_samples",
                         "ramp_steps"});
    ReweightConfig rw;
    rw.alpha = get_field<double>(node, path, "alpha", 1.0);
    rw.floor_percentile = get_field<double>(node, path, "floor_percentile", 5.0);
    rw.min_group_count = get_field<int>(node, path, "min_group_count", 16);
    rw.warmup_samples = get_field<std::int64_t>(node, path, "warmup_samples", 640);
    rw.ramp_steps = get_field<std::int64_t>(node, path, "ramp_steps", 100);

    require(rw.alpha >= 0.0, path + ".alpha", "must be >= 0");
    require(rw.floor_percentile > 0.0 && rw.floor_percentile < 100.0,
            path + ".floor_percentile", "must lie in (0,100)");
    require(rw.min_group_count >= 2, path + ".min_group_count", "must be >= 2");
    require(rw.warmup_samples >= 0, path + ".warmup_samples", "must be >= 0");
    require(rw.ramp_steps >= 0, path + ".ramp_steps", "must be >= 0");
    return rw;
}

std::pair<TrainConfig, std::string> parse_train(const json& node, const DataConfig& data) {
    const std::string path = "train";
    expect_object(node, path);
    reject_unknown_keys(node, path,
                        {"model", "hidden_width", "strategy", "mixture", "prefilter_keep",
                         "epochs", "batch_size", "accumulation_steps", "lr", "beta1", "beta2",
                         "warmup_ratio", "eval_tolerance", "reuse_warmup_samples", "seed",
                         "reweight"});
    TrainConfig t;
    t.model = parse_model_kind(get_field<std::string>(node, path, "model", "linear"),
                               path + ".model");
    t.hidden_width = get_field<int>(node, path, "hidden_width", 32);
    try {
        t.strategy =
            strategy_from_string(get_field<std::string>(node, path, "strategy", "resure"));
    } catch (const ConfigError& e) {
        throw ConfigError("config: " + path + ".strategy: " + e.what());
    }
    t.objective = data.task.kind;
    const std::string mixture = get_field<std::string>(node, path, "mixture", "H+N+L");
    if (node.contains("prefilter_keep") && !node.at("prefilter_keep").is_null()) {
        t.prefilter_keep = get_field<double>(node, path, "prefilter_keep", 0.75);
        require(*t.prefilter_keep > 0.0 && *t.prefilter_keep <= 1.0, path + ".prefilter_keep",
                "must lie in (0,1]");
    }
    t.epochs = get_field<int>(node, path, "epochs", 3);
    t.batch_size = get_field<int>(node, path, "batch_size", 64);
    t.accumulation_steps = get_field<int>(node, path, "accumulation_steps", 1);
    t.lr = get_field<double>(node, path, "lr",
                             t.model == ModelKind::Linear ? 0.01 : 0.005);
    t.beta1 = get_field<double>(node, path, "beta1", 0.9);
    t.beta2 = get_field<double>(node, path, "beta2", 0.95);
    t.warmup_ratio = get_field<double>(node, path, "warmup_ratio", 0.01);
    t.eval_tolerance = get_field<double>(node, path, "eval_tolerance", 0.2);
    t.reuse_warmup_samples = get_field<bool>(node, path, "reuse_warmup_samples", true);
    t.seed = get_field<std::uint64_t>(node, path, "seed", 1);
    if (node.contains("reweight")) {
        t.reweight = parse_reweight(node.at("reweight"), path + ".reweight");
    }

    require(t.epochs >= 1, path + ".epochs", "must be >= 1");
    require(t.batch_size >= 1, path + ".batch_size", "must be >= 1");
    require(t.accumulation_steps >= 1 && t.batch_size % t.accumulation_steps == 0,
            path + ".accumulation_steps", "must divide batch_size");
    require(t.hidden_width >= 1, path + ".hidden_width", "must be >= 1");
    require(t.lr > 0.0, path + ".lr", "must be > 0");
    require(t.beta1 >= 0.0 && t.beta1 < 1.0, path + ".beta1", "must lie in [0,1)");
    require(t.beta2 >= 0.0 && t.beta2 < 1.0, path + ".beta2", "must lie in [0,1)");
    require(t.warmup_ratio >= 0.0 && t.warmup_ratio <= 0.5, path + ".warmup_ratio",
            "must lie in [0,0.5]");
    require(t.eval_tolerance > 0.0, path + ".eval_tolerance", "must be > 0");
    return {t, mixture};
}

SweepConfig parse_sweep(const json& node) {
    const std::string path = "sweep";
    expect_object(node, path);
    reject_unknown_keys(node, path, {"mixtures", "strategies", "seeds"});
    SweepConfig s;
    s.mixtures = get_field<std::vector<std::string>>(node, path, "mixtures", {});
    const auto strategy_names =
        get_field<std::vector<std::string>>(node, path, "strategies", {});
    for (const std::string& name : strategy_names) {
        try {
            s.strategies.push_back(strategy_from_string(name));
        } catch (const ConfigError& e) {
            throw ConfigError("config: " + path + ".strategies: " + e.what());
        }
    }
    s.seeds = get_field<std::vector<std::uint64_t>>(node, path, "seeds", {});
    require(!s.mixtures.empty(), path + ".mixtures", "must list at least one mixture");
    require(!s.strategies.empty(), path + ".strategies", "must list at least one strategy");
    require(!s.seeds.empty(), path + ".seeds", "must list at least one seed");
    for (const std::string& m : s.mixtures) parse_mixture(m);
    return s;
}

OutputConfig parse_output(const json& node) {
    const std::string path = "output";
    expect_object(node, path);
    reject_unknown_keys(node, path, {"dir", "formats"});
    OutputConfig o;
    o.dir = get_field<std::string>(node, path, "dir", "out");
    o.formats = get_field<std::vector<std::string>>(node, path, "formats", {"csv", "json"});
    require(!o.dir.empty(), path + ".dir", "must not be empty");
    for (const std::string& f : o.formats) {
        require(f == "csv" || f == "json", path + ".formats", "unknown format '" + f + "'");
    }
    return o;
}

}  // namespace

std::vector<std::string> parse_mixture(const std::string& mixture) {
    std::vector<std::string> tokens;
    std::string token;
    std::istringstream ss(mixture);
    while (std::getline(ss, token, '+')) {
        if (token != "H" && token != "N" && token != "L" && token != "D") {
            throw ConfigError("config: mixture '" + mixture +
                              "': unknown tier token '" + token + "'");
        }
        tokens.push_back(token);
    }
    if (tokens.empty()) {
        throw ConfigError("config: empty mixture label");
    }
    std::set<std::string> seen(tokens.begin(), tokens.end());
    if (seen.size() != tokens.size()) {
        throw ConfigError("config: mixture '" + mixture + "': repeated tier token");
    }
    if (!seen.count("H")) {
        throw ConfigError("config: mixture '" + mixture +
                          "': must include the high tier (warm-up source)");
    }
    return tokens;
}

ExperimentConfig parse_config(const json& doc) {
    expect_object(doc, "(root)");
    reject_unknown_keys(doc, "(root)", {"data", "train", "sweep", "output"});
    if (!doc.contains("data")) {
        throw ConfigError("config: missing required section 'data'");
    }
    ExperimentConfig cfg;
    cfg.data = parse_data(doc.at("data"));
    if (doc.contains("train")) {
        auto [train, mixture] = parse_train(doc.at("train"), cfg.data);
        cfg.train = train;
        cfg.train_mixture = mixture;
    } else {
        cfg.train.objective = cfg.data.task.kind;
    }
    if (doc.contains("sweep")) {
        cfg.sweep = parse_sweep(doc.at("sweep"));
    }
    if (doc.contains("output")) {
        cfg.output = parse_output(doc.at("output"));
    }

    // Cross-section checks: every mixture the config can run must be backed
    // by generated tiers.
    auto check_mixture = [&](const std::string& m) {
        for (const std::string& tok : parse_mixture(m)) {
            if (tok == "N" && !cfg.data.tiers.count(Tier::Normal)) {
                throw ConfigError("config: mixture '" + m + "' needs data.tiers.normal");
            }
            if (tok == "L" && !cfg.data.tiers.count(Tier::Low)) {
                throw ConfigError("config: mixture '" + m + "' needs data.tiers.low");
            }
            if (tok == "D" && (!cfg.data.drift || cfg.data.drift->count <= 0)) {
                throw ConfigError("config: mixture '" + m + "' needs data.drift.count > 0");
            }
        }
    };
    if (doc.contains("train")) check_mixture(cfg.train_mixture);
    if (cfg.sweep) {
        for (const std::string& m : cfg.sweep->mixtures) check_mixture(m);
    }

    cfg.echo = doc;
    cfg.hash = hex64(fnv1a64(doc.dump()));
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ConfigError("config: " + path.string() + ": " + e.what());
    }
    return parse_config(doc);
}

}  // namespace resure
