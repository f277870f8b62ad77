#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "resure/trainer.hpp"

namespace resure {

// Persists one run as metrics.csv (per-epoch), steps.csv (per-sample
// reweight records), group_stats.csv (per-epoch registry snapshots) and
// summary.json. Every file leads with the experiment config hash so
// reports from different configs are never silently mixed.
void write_run_report(const RunReport& report, const std::filesystem::path& dir,
                      const nlohmann::json& config_echo, const std::string& config_hash,
                      const nlohmann::json& run_meta);

std::vector<StepRecord> read_steps_csv(const std::filesystem::path& path);
std::vector<GroupSnapshot> read_group_stats_csv(const std::filesystem::path& path);
nlohmann::json read_summary_json(const std::filesystem::path& path);

// The hash recorded on the first line of a report CSV.
std::string csv_config_hash(const std::filesystem::path& path);

// Truth table (id, is_noisy) used by post-hoc joins.
void write_truth_csv(const std::filesystem::path& path, std::span<const Sample> samples,
                     const std::string& config_hash);
std::map<std::int64_t, bool> read_truth_csv(const std::filesystem::path& path);

nlohmann::json detection_to_json(const DetectionMetrics& m);
nlohmann::json weight_summaries_to_json(const std::vector<EpochWeightSummary>& ws);

}  // namespace resure
