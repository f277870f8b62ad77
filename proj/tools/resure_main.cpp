#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "resure/config.hpp"
#include "resure/errors.hpp"
#include "resure/experiment.hpp"

namespace {

namespace fs = std::filesystem;

// Output root precedence: --out flag, then RESURE_OUTPUT_ROOT, then the
// config's output.dir.
fs::path resolve_out_root(const std::string& flag_value, const resure::ExperimentConfig& cfg) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("RESURE_OUTPUT_ROOT"); env && *env) return env;
    return cfg.output.dir;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"resure: reliability-weighted training experiments on synthetic data"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_flag;
    std::string data_flag;
    int jobs = 1;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("-c,--config", config_path, "experiment config (JSON)")->required();
        cmd->add_option("-o,--out", out_flag, "output root (overrides config and env)");
    };

    CLI::App* gen = app.add_subcommand("gen-data", "generate dataset files");
    add_common(gen);
    CLI::App* train = app.add_subcommand("train", "run one training experiment");
    add_common(train);
    train->add_option("-d,--data", data_flag, "dataset directory (default <out>/data)");
    CLI::App* sweep = app.add_subcommand("sweep", "run the mixture/strategy/seed grid");
    add_common(sweep);
    sweep->add_option("-j,--jobs", jobs, "max parallel runs")->check(CLI::PositiveNumber);
    CLI::App* report = app.add_subcommand("report", "rebuild the sweep table from run logs");
    add_common(report);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    }

    try {
        const resure::ExperimentConfig cfg = resure::load_config(config_path);
        const fs::path out_root = resolve_out_root(out_flag, cfg);

        if (gen->parsed()) {
            resure::cmd_gen_data(cfg, out_root);
        } else if (train->parsed()) {
            const fs::path data_dir =
                data_flag.empty() ? out_root / "data" : fs::path(data_flag);
            resure::cmd_train(cfg, data_dir, out_root);
        } else if (sweep->parsed()) {
            const int failures = resure::cmd_sweep(cfg, out_root, jobs);
            if (failures > 0) {
                std::cerr << "sweep: " << failures
                          << " run(s) failed; see sweep_runs.json\n";
                return 1;
            }
        } else if (report->parsed()) {
            resure::cmd_report(cfg, out_root);
        }
        return 0;
    } catch (const resure::ConfigError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const resure::DataError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const resure::DivergenceError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
