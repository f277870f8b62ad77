#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "resure/data.hpp"
#include "resure/errors.hpp"

using namespace resure;

namespace {

GeneratorSpec classification_spec() {
    GeneratorSpec spec;
    spec.kind = TaskKind::Classification;
    spec.feature_dim = 8;
    spec.num_groups = 4;
    spec.margin = 0.1;
    spec.rule_seed = 77;
    return spec;
}

bool same_samples(const std::vector<Sample>& a, const std::vector<Sample>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].id != b[i].id || a[i].label != b[i].label || a[i].group != b[i].group ||
            a[i].is_noisy != b[i].is_noisy || a[i].features != b[i].features) {
            return false;
        }
    }
    return true;
}

}  // namespace

TEST_CASE("turn_group returns the last supervised turn") {
    DialogueRecord all;
    for (int i = 0; i < 3; ++i) {
        all.turns.push_back({"u", "a"});
        all.supervised.push_back(true);
    }
    CHECK(turn_group(all) == 3);

    DialogueRecord partial;
    for (int i = 0; i < 4; ++i) partial.turns.push_back({"u", "a"});
    partial.supervised = {true, true, false, false};
    CHECK(turn_group(partial) == 2);

    DialogueRecord single;
    single.turns.push_back({"hi", "hello"});
    single.supervised = {true};
    CHECK(turn_group(single) == 1);

    DialogueRecord none;
    none.turns.push_back({"u", "a"});
    none.supervised = {false};
    CHECK_THROWS_AS(turn_group(none), DataError);

    DialogueRecord bad_mask;
    bad_mask.turns.push_back({"u", "a"});
    bad_mask.supervised = {true, false};
    CHECK_THROWS_AS(turn_group(bad_mask), DataError);
}

TEST_CASE("turn_group ignores unsupervised turn content") {
    Rng rng(5);
    DialogueRecord rec = make_dialogue(3, rng);
    const int g = turn_group(rec);
    CHECK(g == 3);
    for (std::size_t i = 0; i < rec.turns.size(); ++i) {
        if (!rec.supervised[i]) rec.turns[i] = {"edited", "edited"};
    }
    CHECK(turn_group(rec) == g);
}

TEST_CASE("generate is deterministic and clean") {
    const GeneratorSpec spec = classification_spec();
    const auto a = generate(spec, 100, 42);
    const auto b = generate(spec, 100, 42);
    CHECK(same_samples(a, b));
    for (const Sample& s : a) {
        CHECK_FALSE(s.is_noisy);
        CHECK(s.group >= 1);
        CHECK(s.group <= spec.num_groups);
        CHECK((s.label == 0.0 || s.label == 1.0));
    }
    const auto c = generate(spec, 100, 43);
    CHECK_FALSE(same_samples(a, c));
}

TEST_CASE("the generator's own rule reproduces clean labels") {
    const GeneratorSpec spec = classification_spec();
    const auto data = generate(spec, 2000, 7);
    CHECK(rule_accuracy(spec, data, 0.0) >= spec.clean_accuracy);

    GeneratorSpec reg = spec;
    reg.kind = TaskKind::Regression;
    reg.residual_sigma = 0.1;
    reg.clean_accuracy = 0.9;
    const auto rdata = generate(reg, 2000, 7);
    CHECK(rule_accuracy(reg, rdata, 2.0 * reg.residual_sigma) >= reg.clean_accuracy);
}

TEST_CASE("generate rejects bad parameters") {
    const GeneratorSpec spec = classification_spec();
    CHECK_THROWS_AS(generate(spec, 0, 1), ConfigError);
    GeneratorSpec bad = spec;
    bad.feature_dim = 0;
    CHECK_THROWS_AS(generate(bad, 10, 1), ConfigError);
}

TEST_CASE("inject_noise corrupts exact per-group counts") {
    GeneratorSpec spec = classification_spec();
    spec.group_weights = {1.0, 0.0, 0.0, 0.0};  // everything in group 1
    auto data = generate(spec, 1000, 9);

    NoiseSpec noise;
    noise.per_group_rates = {{1, 0.2}, {2, 0.5}, {3, 0.0}, {4, 0.0}};
    const auto noisy = inject_noise(data, noise, 11);
    std::int64_t n_noisy = 0;
    for (std::size_t i = 0; i < noisy.size(); ++i) {
        if (noisy[i].is_noisy) {
            ++n_noisy;
            CHECK(noisy[i].label != data[i].label);
        } else {
            CHECK(noisy[i].label == data[i].label);
        }
        CHECK(noisy[i].id == data[i].id);
        CHECK(noisy[i].features == data[i].features);
        CHECK(noisy[i].group == data[i].group);
    }
    CHECK(n_noisy == 200);  // floor(0.2 * 1000)
}

TEST_CASE("noise rate 0 is identity, rate 1 corrupts a whole group") {
    const GeneratorSpec spec = classification_spec();
    const auto data = generate(spec, 400, 3);

    NoiseSpec zero;
    for (int g = 1; g <= 4; ++g) zero.per_group_rates[g] = 0.0;
    const auto untouched = inject_noise(data, zero, 5);
    CHECK(same_samples(untouched, data));

    NoiseSpec g2;
    g2.per_group_rates = {{2, 1.0}};
    const auto corrupted = inject_noise(data, g2, 5);
    for (std::size_t i = 0; i < corrupted.size(); ++i) {
        if (corrupted[i].group == 2) {
            CHECK(corrupted[i].is_noisy);
            CHECK(corrupted[i].label != data[i].label);
        } else {
            CHECK_FALSE(corrupted[i].is_noisy);
        }
    }
}

TEST_CASE("target jitter always changes the label") {
    GeneratorSpec spec = classification_spec();
    spec.kind = TaskKind::Regression;
    const auto data = generate(spec, 300, 21);
    NoiseSpec noise;
    noise.corruption = Corruption::TargetJitter;
    noise.jitter_sigma = 2.0;
    for (int g = 1; g <= 4; ++g) noise.per_group_rates[g] = 0.5;
    const auto noisy = inject_noise(data, noise, 6);
    for (std::size_t i = 0; i < noisy.size(); ++i) {
        if (noisy[i].is_noisy) CHECK(noisy[i].label != data[i].label);
    }
}

TEST_CASE("mix concatenates, stamps tiers, shuffles deterministically") {
    const GeneratorSpec spec = classification_spec();
    auto h = generate(spec, 100, 1);
    auto n = generate(spec, 100, 2);
    auto l = generate(spec, 100, 3);
    for (std::size_t i = 0; i < 100; ++i) {
        n[i].id += 1000;
        l[i].id += 2000;
    }

    const auto single = mix({{h, Tier::High}}, 5);
    CHECK(single.size() == 100);
    std::multiset<std::int64_t> ids_in, ids_out;
    for (const Sample& s : h) ids_in.insert(s.id);
    for (const Sample& s : single) {
        ids_out.insert(s.id);
        CHECK(s.tier == Tier::High);
    }
    CHECK(ids_in == ids_out);

    const auto mixed =
        mix({{h, Tier::High}, {n, Tier::Normal}, {l, Tier::Low}}, 5);
    CHECK(mixed.size() == 300);
    int counts[3] = {0, 0, 0};
    for (const Sample& s : mixed) counts[static_cast<int>(s.tier)]++;
    CHECK(counts[0] == 100);
    CHECK(counts[1] == 100);
    CHECK(counts[2] == 100);

    const auto again =
        mix({{h, Tier::High}, {n, Tier::Normal}, {l, Tier::Low}}, 5);
    CHECK(same_samples(mixed, again));
}

TEST_CASE("prefilter keeps the top fraction with id tie-break") {
    const GeneratorSpec spec = classification_spec();
    const auto data = generate(spec, 100, 15);

    const auto all = prefilter(data, [](const Sample&) { return 0.0; }, 1.0);
    CHECK(same_samples(all, data));

    // score by negated id: lowest ids score highest
    const auto by_id = prefilter(
        data, [](const Sample& s) { return -static_cast<double>(s.id); }, 0.75);
    CHECK(by_id.size() == 75);
    double min_kept = 1e300, max_dropped = -1e300;
    std::set<std::int64_t> kept_ids;
    for (const Sample& s : by_id) kept_ids.insert(s.id);
    for (const Sample& s : data) {
        const double score = -static_cast<double>(s.id);
        if (kept_ids.count(s.id)) min_kept = std::min(min_kept, score);
        else max_dropped = std::max(max_dropped, score);
    }
    CHECK(min_kept >= max_dropped);

    // all-equal scores: deterministic keep of the 50 lowest ids
    const auto ties = prefilter(data, [](const Sample&) { return 1.0; }, 0.5);
    CHECK(ties.size() == 50);
    for (const Sample& s : ties) CHECK(s.id < 50);

    CHECK_THROWS_AS(prefilter(data, [](const Sample&) { return 0.0; }, 0.0), ConfigError);
    CHECK_THROWS_AS(prefilter(data, [](const Sample&) { return 0.0; }, -0.3), ConfigError);
}

TEST_CASE("tier noise profile scales with group index and preserves the mean") {
    const auto rates = group_noise_rates(0.4, 4);
    CHECK(rates.at(1) == doctest::Approx(0.16));
    CHECK(rates.at(2) == doctest::Approx(0.32));
    CHECK(rates.at(3) == doctest::Approx(0.48));
    CHECK(rates.at(4) == doctest::Approx(0.64));
    double mean = 0.0;
    for (const auto& [g, r] : rates) mean += r;
    CHECK(mean / 4.0 == doctest::Approx(0.4));
    CHECK(group_noise_rates(0.9, 4).at(4) == doctest::Approx(1.0));  // clamped
}

TEST_CASE("samples and dialogues survive a JSONL round trip") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "resure_data_test";
    fs::create_directories(dir);

    GeneratorSpec spec = classification_spec();
    auto data = generate(spec, 50, 33);
    NoiseSpec noise;
    noise.per_group_rates = {{1, 0.5}, {2, 0.5}};
    data = inject_noise(std::move(data), noise, 8);
    data[0].task = TaskTag::Drift;
    data[1].tier = Tier::Low;

    write_samples_jsonl(dir / "samples.jsonl", data);
    const auto back = read_samples_jsonl(dir / "samples.jsonl");
    CHECK(same_samples(back, data));
    for (std::size_t i = 0; i < data.size(); ++i) {
        CHECK(back[i].tier == data[i].tier);
        CHECK(back[i].task == data[i].task);
    }

    Rng rng(3);
    std::vector<DialogueRecord> dialogues;
    for (int g = 1; g <= 5; ++g) dialogues.push_back(make_dialogue(g, rng));
    write_dialogues_jsonl(dir / "dialogues.jsonl", dialogues);
    const auto dback = read_dialogues_jsonl(dir / "dialogues.jsonl");
    REQUIRE(dback.size() == dialogues.size());
    for (std::size_t i = 0; i < dialogues.size(); ++i) {
        CHECK(turn_group(dback[i]) == turn_group(dialogues[i]));
        CHECK(dback[i].turns.size() == dialogues[i].turns.size());
    }
    fs::remove_all(dir);
}

TEST_CASE("malformed JSONL reports the line number") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "resure_data_bad";
    fs::create_directories(dir);
    {
        std::ofstream out(dir / "bad.jsonl");
        out << R"({"id":0,"features":[0.0],"label":1.0,"group":1,"is_noisy":false,"tier":"high","task":"primary"})"
            << "\n";
        out << "{not json}\n";
    }
    try {
        read_samples_jsonl(dir / "bad.jsonl");
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("bad.jsonl:2") != std::string::npos);
    }
    fs::remove_all(dir);
}
