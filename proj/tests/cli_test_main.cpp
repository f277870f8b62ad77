// Integration tests for the command-line tool: exit codes, file contracts,
// determinism. argv[1] is the path to the resure binary.
#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "resure/report.hpp"
#include "resure/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int checks_failed = 0;

void expect(bool ok, const std::string& what) {
    if (!ok) {
        ++checks_failed;
        std::cout << "  FAIL: " << what << '\n';
    }
}

struct CliResult {
    int exit_code = -1;
    std::string out;
    std::string err;
};

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

class CliRunner {
public:
    CliRunner(std::string binary, fs::path scratch)
        : binary_(std::move(binary)), scratch_(std::move(scratch)) {}

    CliResult run(const std::string& args, const std::string& env = "") {
        const fs::path out = scratch_ / "cli_stdout.txt";
        const fs::path err = scratch_ / "cli_stderr.txt";
        const std::string cmd = env + (env.empty() ? "" : " ") + binary_ + " " + args + " > " +
                                out.string() + " 2> " + err.string();
        const int raw = std::system(cmd.c_str());
        CliResult res;
        res.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
        res.out = slurp(out);
        res.err = slurp(err);
        return res;
    }

private:
    std::string binary_;
    fs::path scratch_;
};

json demo_config(std::int64_t per_tier = 300) {
    json cfg;
    cfg["data"]["task"] = {{"kind", "regression"},
                           {"feature_dim", 8},
                           {"num_groups", 4},
                           {"residual_sigma", 0.05}};
    cfg["data"]["tiers"]["high"] = {{"count", per_tier}, {"noise_rate", 0.0}};
    cfg["data"]["tiers"]["normal"] = {{"count", per_tier}, {"noise_rate", 0.15}};
    cfg["data"]["tiers"]["low"] = {{"count", per_tier}, {"noise_rate", 0.4}};
    cfg["data"]["corruption"] = "target_jitter";
    cfg["data"]["jitter_sigma"] = 4.0;
    cfg["data"]["eval_count"] = 400;
    cfg["data"]["seed"] = 1;
    cfg["data"]["emit_dialogues"] = true;
    cfg["train"] = {{"model", "linear"},
                    {"strategy", "resure"},
                    {"mixture", "H+N+L"},
                    {"epochs", 2},
                    {"lr", 0.05},
                    {"eval_tolerance", 0.15},
                    {"seed", 1}};
    cfg["train"]["reweight"] = {{"warmup_samples", 128}, {"ramp_steps", 5}};
    cfg["sweep"] = {{"mixtures", {"H", "H+N+L"}},
                    {"strategies", {"resure"}},
                    {"seeds", {1, 2}}};
    cfg["output"] = {{"dir", "unused-default"}};
    return cfg;
}

fs::path write_config(const fs::path& dir, const json& cfg, const std::string& name) {
    fs::create_directories(dir);
    const fs::path path = dir / name;
    std::ofstream out(path);
    out << cfg.dump(2) << '\n';
    return path;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: cli_tests <path-to-resure-binary>\n";
        return 2;
    }
    const std::string binary = argv[1];
    const fs::path scratch = fs::temp_directory_path() / "resure_cli_tests";
    fs::remove_all(scratch);
    fs::create_directories(scratch);
    CliRunner cli(binary, scratch);

    std::cout << "== help and usage errors\n";
    expect(cli.run("--help").exit_code == 0, "--help exits 0");
    expect(cli.run("").exit_code == 2, "missing subcommand exits 2");
    expect(cli.run("train").exit_code == 2, "missing --config exits 2");
    expect(cli.run("train -c " + (scratch / "nope.json").string()).exit_code == 2,
           "missing config file exits 2");

    std::cout << "== config validation\n";
    {
        json bad = demo_config();
        bad["train"]["reweight"]["alpa"] = 2.0;
        const fs::path cfg = write_config(scratch / "bad", bad, "config.json");
        const CliResult res = cli.run("gen-data -c " + cfg.string() + " -o " +
                                      (scratch / "bad").string());
        expect(res.exit_code == 2, "unknown key exits 2");
        expect(res.err.find("train.reweight.alpa") != std::string::npos,
               "error names the offending field path");
    }

    std::cout << "== gen-data\n";
    const fs::path ws = scratch / "ws";
    const fs::path cfg_path = write_config(ws, demo_config(), "config.json");
    {
        const CliResult res = cli.run("gen-data -c " + cfg_path.string() + " -o " + ws.string());
        expect(res.exit_code == 0, "gen-data exits 0");
        for (const char* f : {"high.jsonl", "normal.jsonl", "low.jsonl", "eval.jsonl",
                              "manifest.json", "dialogues.jsonl"}) {
            expect(fs::exists(ws / "data" / f), std::string("gen-data writes ") + f);
        }
        const json manifest = json::parse(slurp(ws / "data" / "manifest.json"));
        expect(manifest["files"]["high.jsonl"]["count"] == 300, "manifest count high");
        expect(manifest["files"]["low.jsonl"]["count"] == 300, "manifest count low");
        expect(manifest["files"]["high.jsonl"]["noisy"] == 0, "high tier stays clean");
        expect(manifest["files"]["low.jsonl"]["noisy"] > 50, "low tier has noise");
        expect(manifest.contains("config_hash"), "manifest embeds the config hash");

        // determinism: regenerate into a second root, byte-compare
        const fs::path ws2 = scratch / "ws2";
        cli.run("gen-data -c " + cfg_path.string() + " -o " + ws2.string());
        for (const char* f : {"high.jsonl", "normal.jsonl", "low.jsonl", "eval.jsonl",
                              "manifest.json", "dialogues.jsonl"}) {
            expect(slurp(ws / "data" / f) == slurp(ws2 / "data" / f),
                   std::string("gen-data deterministic: ") + f);
        }

        // dialogue alignment: line i of dialogues.jsonl maps to sample i of
        // the concatenated partition files
        const auto dialogues = resure::read_dialogues_jsonl(ws / "data" / "dialogues.jsonl");
        std::vector<resure::Sample> all;
        for (const char* f : {"high.jsonl", "normal.jsonl", "low.jsonl"}) {
            const auto part = resure::read_samples_jsonl(ws / "data" / f);
            all.insert(all.end(), part.begin(), part.end());
        }
        expect(dialogues.size() == all.size(), "one dialogue per train sample");
        bool aligned = true;
        for (std::size_t i = 0; i < all.size() && i < dialogues.size(); ++i) {
            if (resure::turn_group(dialogues[i]) != all[i].group) aligned = false;
        }
        expect(aligned, "dialogue turn_group matches the sample group");
    }

    std::cout << "== train\n";
    {
        const CliResult res = cli.run("train -c " + cfg_path.string() + " -o " + ws.string());
        expect(res.exit_code == 0, "train exits 0");
        for (const char* f : {"metrics.csv", "steps.csv", "group_stats.csv", "summary.json",
                              "truth.csv"}) {
            expect(fs::exists(ws / "run" / f), std::string("train writes ") + f);
        }
        const json summary = json::parse(slurp(ws / "run" / "summary.json"));
        expect(summary["detection"].contains("precision") &&
                   summary["detection"].contains("recall"),
               "summary carries detection precision/recall");
        expect(summary["run"]["strategy"] == "resure", "summary echoes the strategy");
        expect(summary.contains("config_hash"), "summary embeds the config hash");
        const std::string hash = summary["config_hash"].get<std::string>();
        expect(resure::csv_config_hash(ws / "run" / "steps.csv") == hash,
               "steps.csv hash matches summary");

        // uniform strategy: every step-log weight is 1
        json uni = demo_config();
        uni["train"]["strategy"] = "uniform";
        const fs::path uni_cfg = write_config(ws, uni, "uniform.json");
        const fs::path uni_out = scratch / "uniform_out";
        cli.run("gen-data -c " + uni_cfg.string() + " -o " + uni_out.string());
        expect(cli.run("train -c " + uni_cfg.string() + " -o " + uni_out.string()).exit_code ==
                   0,
               "uniform train exits 0");
        bool all_one = true;
        for (const auto& rec : resure::read_steps_csv(uni_out / "run" / "steps.csv")) {
            if (rec.weight != 1.0 || rec.flagged) all_one = false;
        }
        expect(all_one, "uniform step-log weights are all 1");
    }

    std::cout << "== data errors\n";
    {
        // corrupt one line of the dataset
        const fs::path broken_ws = scratch / "broken";
        fs::create_directories(broken_ws / "data");
        for (const char* f : {"high.jsonl", "normal.jsonl", "low.jsonl", "eval.jsonl"}) {
            fs::copy_file(ws / "data" / f, broken_ws / "data" / f);
        }
        std::ofstream app(broken_ws / "data" / "normal.jsonl", std::ios::app);
        app << "{broken\n";
        app.close();
        const CliResult res =
            cli.run("train -c " + cfg_path.string() + " -o " + broken_ws.string());
        expect(res.exit_code == 3, "corrupted JSONL exits 3");
        expect(res.err.find("normal.jsonl:301") != std::string::npos,
               "parse error names file and line");

        // missing data directory entirely
        const CliResult missing = cli.run("train -c " + cfg_path.string() + " -o " +
                                          (scratch / "empty").string());
        expect(missing.exit_code == 3, "missing dataset exits 3");
    }

    std::cout << "== divergence\n";
    {
        json boom = demo_config();
        boom["train"]["lr"] = 1e160;
        boom["train"]["strategy"] = "uniform";
        const fs::path boom_cfg = write_config(scratch / "boom", boom, "config.json");
        const fs::path boom_ws = scratch / "boom";
        cli.run("gen-data -c " + boom_cfg.string() + " -o " + boom_ws.string());
        const CliResult res =
            cli.run("train -c " + boom_cfg.string() + " -o " + boom_ws.string());
        expect(res.exit_code == 4, "divergence exits 4");
        expect(res.err.find("step") != std::string::npos, "divergence names the step");
    }

    std::cout << "== sweep and report\n";
    {
        const fs::path sweep_ws = scratch / "sweep_ws";
        const CliResult res =
            cli.run("sweep -c " + cfg_path.string() + " -o " + sweep_ws.string() + " -j 2");
        expect(res.exit_code == 0, "sweep exits 0");
        expect(fs::exists(sweep_ws / "sweep" / "sweep.csv"), "sweep writes sweep.csv");
        expect(fs::exists(sweep_ws / "sweep" / "sweep_runs.json"), "sweep writes run index");

        // 2 mixtures x 1 strategy x 2 seeds = 4 rows
        std::istringstream table(slurp(sweep_ws / "sweep" / "sweep.csv"));
        std::string line;
        int rows = 0;
        while (std::getline(table, line)) {
            if (!line.empty() && line[0] != '#' && line.find("setting,") != 0) ++rows;
        }
        expect(rows == 4, "sweep table has one row per (mixture,strategy,seed)");

        // rerun is byte-identical, independent of --jobs
        const fs::path sweep_ws2 = scratch / "sweep_ws2";
        cli.run("sweep -c " + cfg_path.string() + " -o " + sweep_ws2.string() + " -j 1");
        expect(slurp(sweep_ws / "sweep" / "sweep.csv") ==
                   slurp(sweep_ws2 / "sweep" / "sweep.csv"),
               "sweep.csv identical across reruns and job counts");
        expect(slurp(sweep_ws / "sweep" / "sweep_runs.json") ==
                   slurp(sweep_ws2 / "sweep" / "sweep_runs.json"),
               "sweep_runs.json identical across reruns");

        expect(cli.run("report -c " + cfg_path.string() + " -o " + sweep_ws.string())
                       .exit_code == 0,
               "report exits 0");
        expect(fs::exists(sweep_ws / "sweep" / "report.csv"), "report writes report.csv");

        // the re-joined table agrees with the sweep's own aggregate on the
        // run identity, accuracy and spearman columns
        {
            std::istringstream sw(slurp(sweep_ws / "sweep" / "sweep.csv"));
            std::istringstream rp(slurp(sweep_ws / "sweep" / "report.csv"));
            std::string sl, rl;
            bool agree = true;
            while (std::getline(sw, sl) && std::getline(rp, rl)) {
                auto head = [](const std::string& s, int n) {
                    std::size_t pos = 0;
                    for (int i = 0; i < n && pos != std::string::npos; ++i) {
                        pos = s.find(',', pos + 1);
                    }
                    return s.substr(0, pos);
                };
                auto tail = [](const std::string& s) {
                    const std::size_t pos = s.rfind(',');
                    return pos == std::string::npos ? s : s.substr(pos);
                };
                if (head(sl, 5) != head(rl, 5) || tail(sl) != tail(rl)) agree = false;
            }
            expect(agree, "report.csv agrees with sweep.csv on shared columns");
        }

        // a different config must be refused
        json other = demo_config(310);
        const fs::path other_cfg = write_config(scratch / "other", other, "config.json");
        const CliResult mixed =
            cli.run("report -c " + other_cfg.string() + " -o " + sweep_ws.string());
        expect(mixed.exit_code == 3, "report refuses outputs from a different config");

        // single-mixture sweep reports spearman as nan
        json single = demo_config();
        single["sweep"]["mixtures"] = {"H"};
        const fs::path single_cfg = write_config(scratch / "single", single, "config.json");
        const fs::path single_ws = scratch / "single_ws";
        cli.run("sweep -c " + single_cfg.string() + " -o " + single_ws.string());
        const std::string csv = slurp(single_ws / "sweep" / "sweep.csv");
        expect(csv.find(",nan") != std::string::npos,
               "single-setting sweep marks spearman undefined");
    }

    std::cout << "== output root precedence\n";
    {
        const fs::path env_ws = scratch / "env_ws";
        const CliResult res = cli.run("gen-data -c " + cfg_path.string(),
                                      "RESURE_OUTPUT_ROOT=" + env_ws.string());
        expect(res.exit_code == 0, "gen-data with env root exits 0");
        expect(fs::exists(env_ws / "data" / "manifest.json"),
               "RESURE_OUTPUT_ROOT overrides the config output dir");
    }

    if (checks_failed == 0) {
        std::cout << "cli_tests: all checks passed\n";
        return 0;
    }
    std::cout << "cli_tests: " << checks_failed << " check(s) failed\n";
    return 1;
}
