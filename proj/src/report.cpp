#include "resure/report.hpp"

#include <fstream>
#include <sstream>

#include "resure/errors.hpp"
#include "resure/util.hpp"

namespace resure {

using nlohmann::json;

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    return in;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
    return fields;
}

// Reads a report CSV, checking the hash comment and header, and hands each
// data row to `consume`.
template <typename Fn>
void read_csv_rows(const std::filesystem::path& path, const std::string& expect_header,
                   Fn&& consume) {
    std::ifstream in = open_in(path);
    std::string line;
    std::int64_t lineno = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line[0] == '#') continue;
        if (!header_seen) {
            if (line != expect_header) {
                throw DataError(path.filename().string() + ":" + std::to_string(lineno) +
                                ": unexpected header '" + line + "'");
            }
            header_seen = true;
            continue;
        }
        try {
            consume(split_csv(line));
        } catch (const Error& e) {
            throw DataError(path.filename().string() + ":" + std::to_string(lineno) + ": " +
                            e.what());
        }
    }
    if (!header_seen) throw DataError(path.string() + ": missing header");
}

}  // namespace

void write_run_report(const RunReport& report, const std::filesystem::path& dir,
                      const json& config_echo, const std::string& config_hash,
                      const json& run_meta) {
    std::filesystem::create_directories(dir);
    const std::string hash_line = "# config_hash=" + config_hash + "\n";

    {
        std::ofstream out = open_out(dir / "metrics.csv");
        out << hash_line << "epoch,train_loss,weighted_train_loss,eval_loss,eval_accuracy\n";
        for (const EpochMetrics& em : report.epochs) {
            out << em.epoch << ',' << fmt_double(em.train_loss) << ','
                << fmt_double(em.weighted_train_loss) << ',' << fmt_double(em.eval_loss)
                << ',' << fmt_double(em.eval_accuracy) << '\n';
        }
    }
    {
        std::ofstream out = open_out(dir / "steps.csv");
        out << hash_line
            << "epoch,step,sample_id,group,loss,threshold,flagged,absorbed,weight,"
               "adjusted_loss\n";
        for (const StepRecord& r : report.steps) {
            out << r.epoch << ',' << r.step << ',' << r.sample_id << ',' << r.group << ','
                << fmt_double(r.loss) << ',' << fmt_double(r.threshold) << ','
                << (r.flagged ? 1 : 0) << ',' << (r.absorbed ? 1 : 0) << ','
                << fmt_double(r.weight) << ',' << fmt_double(r.adjusted_loss) << '\n';
        }
    }
    {
        std::ofstream out = open_out(dir / "group_stats.csv");
        out << hash_line << "epoch,group,count,mean,variance\n";
        for (const GroupSnapshot& g : report.group_stats) {
            out << g.epoch << ',' << g.group << ',' << g.count << ',' << fmt_double(g.mean)
                << ',' << fmt_double(g.variance) << '\n';
        }
    }
    {
        json summary;
        summary["config"] = config_echo;
        summary["config_hash"] = config_hash;
        summary["run"] = run_meta;
        summary["final"] = {
            {"eval_loss", report.final_eval_loss},
            {"eval_accuracy", report.final_eval_accuracy},
            {"total_steps", report.total_steps},
        };
        summary["final"]["mean_weight_clean"] =
            report.mean_weight_clean ? json(*report.mean_weight_clean) : json(nullptr);
        summary["final"]["mean_weight_noisy"] =
            report.mean_weight_noisy ? json(*report.mean_weight_noisy) : json(nullptr);
        summary["final"]["noise_gap"] =
            report.noise_gap ? json(*report.noise_gap) : json(nullptr);
        summary["detection"] = detection_to_json(report.detection);
        summary["weights"] = weight_summaries_to_json(report.weights);
        std::ofstream out = open_out(dir / "summary.json");
        out << summary.dump(2) << '\n';
    }
}

std::vector<StepRecord> read_steps_csv(const std::filesystem::path& path) {
    std::vector<StepRecord> out;
    read_csv_rows(path,
                  "epoch,step,sample_id,group,loss,threshold,flagged,absorbed,weight,"
                  "adjusted_loss",
                  [&](const std::vector<std::string>& f) {
                      if (f.size() != 10) throw DataError("expected 10 fields");
                      StepRecord r;
                      r.epoch = static_cast<int>(parse_int(f[0]));
                      r.step = parse_int(f[1]);
                      r.sample_id = parse_int(f[2]);
                      r.group = static_cast<int>(parse_int(f[3]));
                      r.loss = parse_double(f[4]);
                      r.threshold = parse_double(f[5]);
                      r.flagged = parse_int(f[6]) != 0;
                      r.absorbed = parse_int(f[7]) != 0;
                      r.weight = parse_double(f[8]);
                      r.adjusted_loss = parse_double(f[9]);
                      out.push_back(r);
                  });
    return out;
}

std::vector<GroupSnapshot> read_group_stats_csv(const std::filesystem::path& path) {
    std::vector<GroupSnapshot> out;
    read_csv_rows(path, "epoch,group,count,mean,variance",
                  [&](const std::vector<std::string>& f) {
                      if (f.size() != 5) throw DataError("expected 5 fields");
                      GroupSnapshot g;
                      g.epoch = static_cast<int>(parse_int(f[0]));
                      g.group = static_cast<int>(parse_int(f[1]));
                      g.count = static_cast<std::uint64_t>(parse_int(f[2]));
                      g.mean = parse_double(f[3]);
                      g.variance = parse_double(f[4]);
                      out.push_back(g);
                  });
    return out;
}

json read_summary_json(const std::filesystem::path& path) {
    std::ifstream in = open_in(path);
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

std::string csv_config_hash(const std::filesystem::path& path) {
    std::ifstream in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw DataError(path.string() + ": empty file");
    const std::string prefix = "# config_hash=";
    if (line.rfind(prefix, 0) != 0) {
        throw DataError(path.string() + ": missing config hash line");
    }
    return line.substr(prefix.size());
}

void write_truth_csv(const std::filesystem::path& path, std::span<const Sample> samples,
                     const std::string& config_hash) {
    std::ofstream out = open_out(path);
    out << "# config_hash=" << config_hash << "\nid,is_noisy\n";
    for (const Sample& s : samples) {
        out << s.id << ',' << (s.is_noisy ? 1 : 0) << '\n';
    }
}

std::map<std::int64_t, bool> read_truth_csv(const std::filesystem::path& path) {
    std::map<std::int64_t, bool> out;
    read_csv_rows(path, "id,is_noisy", [&](const std::vector<std::string>& f) {
        if (f.size() != 2) throw DataError("expected 2 fields");
        out[parse_int(f[0])] = parse_int(f[1]) != 0;
    });
    return out;
}

json detection_to_json(const DetectionMetrics& m) {
    json j;
    j["tp"] = m.tp;
    j["fp"] = m.fp;
    j["fn"] = m.fn;
    j["tn"] = m.tn;
    j["precision"] = m.precision ? json(*m.precision) : json(nullptr);
    j["recall"] = m.recall ? json(*m.recall) : json(nullptr);
    j["f1"] = m.f1 ? json(*m.f1) : json(nullptr);
    return j;
}

json weight_summaries_to_json(const std::vector<EpochWeightSummary>& ws) {
    auto stats_json = [](const std::optional<ClassWeightStats>& s) {
        if (!s) return json(nullptr);
        return json{{"n", s->n},
                    {"mean", s->mean},
                    {"median", s->median},
                    {"p5", s->p5},
                    {"p95", s->p95}};
    };
    json arr = json::array();
    for (const EpochWeightSummary& w : ws) {
        arr.push_back({{"epoch", w.epoch},
                       {"clean", stats_json(w.clean)},
                       {"noisy", stats_json(w.noisy)}});
    }
    return arr;
}

}  // namespace resure
