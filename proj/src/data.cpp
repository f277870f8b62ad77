#include "resure/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "resure/errors.hpp"
#include "resure/util.hpp"

namespace resure {

using nlohmann::json;

std::string to_string(Tier t) {
    switch (t) {
        case Tier::High: return "high";
        case Tier::Normal: return "normal";
        case Tier::Low: return "low";
    }
    return "high";
}

std::string to_string(TaskTag t) {
    return t == TaskTag::Primary ? "primary" : "drift";
}

Tier tier_from_string(const std::string& s) {
    if (s == "high") return Tier::High;
    if (s == "normal") return Tier::Normal;
    if (s == "low") return Tier::Low;
    throw DataError("unknown tier '" + s + "'");
}

TaskTag task_tag_from_string(const std::string& s) {
    if (s == "primary") return TaskTag::Primary;
    if (s == "drift") return TaskTag::Drift;
    throw DataError("unknown task '" + s + "'");
}

int turn_group(const DialogueRecord& rec) {
    if (rec.supervised.size() != rec.turns.size()) {
        throw DataError("dialogue: supervised mask length " +
                        std::to_string(rec.supervised.size()) + " != turn count " +
                        std::to_string(rec.turns.size()));
    }
    for (std::size_t i = rec.turns.size(); i > 0; --i) {
        if (rec.supervised[i - 1]) return static_cast<int>(i);
    }
    throw DataError("dialogue has no supervised turn");
}

DialogueRecord make_dialogue(int group, Rng& rng) {
    if (group < 1) throw ValueError("make_dialogue: group must be >= 1");
    const int extra = static_cast<int>(rng.bounded(3));
    DialogueRecord rec;
    const int total = group + extra;
    for (int i = 1; i <= total; ++i) {
        rec.turns.push_back({"user message " + std::to_string(i),
                             "assistant reply " + std::to_string(i)});
        rec.supervised.push_back(i <= group);
    }
    return rec;
}

TrueRule make_rule(const GeneratorSpec& spec) {
    Rng rng(derive_seed(spec.rule_seed, "true-rule"));
    TrueRule rule;
    rule.weights.resize(static_cast<std::size_t>(spec.feature_dim));
    double norm2 = 0.0;
    for (double& w : rule.weights) {
        w = rng.normal();
        norm2 += w * w;
    }
    const double norm = std::sqrt(norm2);
    for (double& w : rule.weights) w /= norm;
    rule.bias = 0.0;
    return rule;
}

namespace {

double rule_score(const TrueRule& rule, const GeneratorSpec& spec,
                  std::span<const double> x) {
    // Score in the generator's own frame: the offset shift is removed first.
    const double shift = spec.offset / std::sqrt(static_cast<double>(spec.feature_dim));
    double s = rule.bias;
    for (std::size_t i = 0; i < rule.weights.size(); ++i) {
        s += rule.weights[i] * (x[i] - shift);
    }
    return s;
}

void validate_generator(const GeneratorSpec& spec) {
    if (spec.feature_dim < 1) throw ConfigError("generator: feature_dim must be >= 1");
    if (spec.num_groups < 1) throw ConfigError("generator: num_groups must be >= 1");
    if (!spec.group_weights.empty() &&
        spec.group_weights.size() != static_cast<std::size_t>(spec.num_groups)) {
        throw ConfigError("generator: group_weights size must equal num_groups");
    }
    if (spec.margin < 0.0) throw ConfigError("generator: margin must be >= 0");
    if (spec.residual_sigma < 0.0) throw ConfigError("generator: residual_sigma must be >= 0");
}

}  // namespace

double rule_accuracy(const GeneratorSpec& spec, std::span<const Sample> data,
                     double tolerance) {
    if (data.empty()) throw EmptyInputError("rule_accuracy: empty data");
    const TrueRule rule = make_rule(spec);
    std::int64_t hits = 0;
    for (const Sample& s : data) {
        const double score = rule_score(rule, spec, s.features);
        if (spec.kind == TaskKind::Classification) {
            const double predicted = score > 0.0 ? 1.0 : 0.0;
            if (predicted == s.label) ++hits;
        } else {
            if (std::abs(score - s.label) <= tolerance) ++hits;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(data.size());
}

std::vector<Sample> generate(const GeneratorSpec& spec, std::int64_t count,
                             std::uint64_t seed) {
    validate_generator(spec);
    if (count <= 0) throw ConfigError("generate: count must be > 0");

    const TrueRule rule = make_rule(spec);
    const double shift = spec.offset / std::sqrt(static_cast<double>(spec.feature_dim));
    std::vector<double> weights = spec.group_weights;
    if (weights.empty()) weights.assign(static_cast<std::size_t>(spec.num_groups), 1.0);

    Rng rng(derive_seed(seed, "generate"));
    std::vector<Sample> out;
    out.reserve(static_cast<std::size_t>(count));
    const auto d = static_cast<std::size_t>(spec.feature_dim);

    for (std::int64_t i = 0; i < count; ++i) {
        Sample s;
        s.id = i;
        s.group = static_cast<int>(rng.categorical(weights)) + 1;
        s.features.resize(d);

        if (spec.kind == TaskKind::Classification) {
            // Rejection-sample until the point clears the margin band.
            double score = 0.0;
            for (;;) {
                score = rule.bias;
                for (std::size_t k = 0; k < d; ++k) {
                    s.features[k] = rng.normal();
                    score += rule.weights[k] * s.features[k];
                }
                if (std::abs(score) >= spec.margin) break;
            }
            s.label = score > 0.0 ? 1.0 : 0.0;
        } else {
            double score = rule.bias;
            for (std::size_t k = 0; k < d; ++k) {
                s.features[k] = rng.normal();
                score += rule.weights[k] * s.features[k];
            }
            s.label = score + rng.normal(0.0, spec.residual_sigma);
        }
        if (shift != 0.0) {
            for (double& f : s.features) f += shift;
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<Sample> inject_noise(std::vector<Sample> data, const NoiseSpec& spec,
                                 std::uint64_t seed) {
    for (const auto& [group, rate] : spec.per_group_rates) {
        if (rate < 0.0 || rate > 1.0) {
            throw ConfigError("noise rate for group " + std::to_string(group) +
                              " outside [0,1]: " + fmt_double(rate));
        }
    }

    for (const auto& [group, rate] : spec.per_group_rates) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < data.size(); ++i) {
            if (data[i].group == group) members.push_back(i);
        }
        const auto k = static_cast<std::size_t>(
            std::floor(rate * static_cast<double>(members.size())));
        if (k == 0) continue;

        Rng rng(derive_seed(seed, "noise-group-" + std::to_string(group)));
        rng.shuffle(members);
        members.resize(k);

        switch (spec.corruption) {
            case Corruption::LabelFlip:
                for (std::size_t idx : members) {
                    data[idx].label = data[idx].label == 0.0 ? 1.0 : 0.0;
                    data[idx].is_noisy = true;
                }
                break;
            case Corruption::LabelShuffle: {
                // Cyclic reassignment among the selected samples; collisions
                // (same label received) fall back to flip/jitter so that a
                // noisy label always differs from the clean one.
                std::vector<double> old_labels;
                old_labels.reserve(k);
                for (std::size_t idx : members) old_labels.push_back(data[idx].label);
                for (std::size_t j = 0; j < k; ++j) {
                    const std::size_t idx = members[j];
                    double incoming = old_labels[(j + 1) % k];
                    if (incoming == old_labels[j]) {
                        incoming = old_labels[j] == 0.0 ? 1.0 : 0.0;
                        if (incoming == old_labels[j]) {  // degenerate non-binary label
                            double delta = rng.normal(0.0, spec.jitter_sigma);
                            while (delta == 0.0) delta = rng.normal(0.0, spec.jitter_sigma);
                            incoming = old_labels[j] + delta;
                        }
                    }
                    data[idx].label = incoming;
                    data[idx].is_noisy = true;
                }
                break;
            }
            case Corruption::TargetJitter:
                for (std::size_t idx : members) {
                    double delta = rng.normal(0.0, spec.jitter_sigma);
                    while (delta == 0.0) delta = rng.normal(0.0, spec.jitter_sigma);
                    data[idx].label += delta;
                    data[idx].is_noisy = true;
                }
                break;
        }
    }
    return data;
}

std::vector<Sample> mix(const std::vector<std::pair<std::vector<Sample>, Tier>>& tiers,
                        std::uint64_t shuffle_seed) {
    if (tiers.empty()) throw EmptyInputError("mix: no tiers");
    std::vector<Sample> out;
    for (const auto& [samples, tier] : tiers) {
        for (const Sample& s : samples) {
            out.push_back(s);
            out.back().tier = tier;
        }
    }
    Rng rng(derive_seed(shuffle_seed, "mix"));
    rng.shuffle(out);
    return out;
}

std::vector<Sample> prefilter(const std::vector<Sample>& data,
                              const std::function<double(const Sample&)>& proxy_score,
                              double keep_fraction) {
    if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
        throw ConfigError("prefilter: keep_fraction must lie in (0,1], got " +
                          fmt_double(keep_fraction));
    }
    if (data.empty()) return {};
    const auto n_keep = static_cast<std::size_t>(
        std::ceil(keep_fraction * static_cast<double>(data.size())));

    struct Scored {
        double score;
        std::int64_t id;
        std::size_t index;
    };
    std::vector<Scored> scored;
    scored.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        scored.push_back({proxy_score(data[i]), data[i].id, i});
    }
    std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.id < b.id;
    });

    std::vector<bool> keep(data.size(), false);
    for (std::size_t j = 0; j < n_keep && j < scored.size(); ++j) {
        keep[scored[j].index] = true;
    }
    std::vector<Sample> out;
    out.reserve(n_keep);
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (keep[i]) out.push_back(data[i]);
    }
    return out;
}

std::map<int, double> group_noise_rates(double base_rate, int num_groups) {
    if (base_rate < 0.0 || base_rate > 1.0) {
        throw ConfigError("base noise rate outside [0,1]: " + fmt_double(base_rate));
    }
    std::map<int, double> rates;
    for (int b = 1; b <= num_groups; ++b) {
        const double scaled =
            base_rate * 2.0 * static_cast<double>(b) / static_cast<double>(num_groups + 1);
        rates[b] = std::clamp(scaled, 0.0, 1.0);
    }
    return rates;
}

void write_samples_jsonl(const std::filesystem::path& path, std::span<const Sample> samples) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    for (const Sample& s : samples) {
        json j;
        j["id"] = s.id;
        j["features"] = s.features;
        j["label"] = s.label;
        j["group"] = s.group;
        j["is_noisy"] = s.is_noisy;
        j["tier"] = to_string(s.tier);
        j["task"] = to_string(s.task);
        out << j.dump() << '\n';
    }
    if (!out) throw DataError("write failed for " + path.string());
}

std::vector<Sample> read_samples_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::vector<Sample> out;
    std::string line;
    std::int64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw DataError(path.filename().string() + ":" + std::to_string(lineno) +
                            ": parse error: " + e.what());
        }
        try {
            Sample s;
            s.id = j.at("id").get<std::int64_t>();
            s.features = j.at("features").get<std::vector<double>>();
            s.label = j.at("label").get<double>();
            s.group = j.at("group").get<int>();
            s.is_noisy = j.at("is_noisy").get<bool>();
            s.tier = tier_from_string(j.at("tier").get<std::string>());
            s.task = task_tag_from_string(j.at("task").get<std::string>());
            for (double f : s.features) {
                if (!std::isfinite(f)) throw DataError("non-finite feature");
            }
            if (!std::isfinite(s.label)) throw DataError("non-finite label");
            out.push_back(std::move(s));
        } catch (const json::exception& e) {
            throw DataError(path.filename().string() + ":" + std::to_string(lineno) +
                            ": bad record: " + e.what());
        } catch (const DataError& e) {
            throw DataError(path.filename().string() + ":" + std::to_string(lineno) + ": " +
                            e.what());
        }
    }
    return out;
}

void write_dialogues_jsonl(const std::filesystem::path& path,
                           std::span<const DialogueRecord> records) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    for (const DialogueRecord& rec : records) {
        json turns = json::array();
        for (const DialogueTurn& t : rec.turns) {
            turns.push_back({{"user", t.user}, {"assistant", t.assistant}});
        }
        json j;
        j["turns"] = turns;
        j["supervised"] = rec.supervised;
        out << j.dump() << '\n';
    }
    if (!out) throw DataError("write failed for " + path.string());
}

std::vector<DialogueRecord> read_dialogues_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    std::vector<DialogueRecord> out;
    std::string line;
    std::int64_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            const json j = json::parse(line);
            DialogueRecord rec;
            for (const json& t : j.at("turns")) {
                rec.turns.push_back({t.at("user").get<std::string>(),
                                     t.at("assistant").get<std::string>()});
            }
            rec.supervised = j.at("supervised").get<std::vector<bool>>();
            out.push_back(std::move(rec));
        } catch (const json::exception& e) {
            throw DataError(path.filename().string() + ":" + std::to_string(lineno) +
                            ": parse error: " + e.what());
        }
    }
    return out;
}

}  // namespace resure
