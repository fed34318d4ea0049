#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "orchestra/simulator.hpp"

namespace orchestra {

/// One row per metric tick.
[[nodiscard]] std::string metrics_csv(const MetricsReport& report);
[[nodiscard]] std::string summary_json(const Scenario& scenario, const MetricsReport& report);
[[nodiscard]] std::string rewards_csv(const std::vector<EpisodeStats>& episodes);
[[nodiscard]] std::string comparison_csv(const std::vector<ComparisonRow>& rows);
[[nodiscard]] std::string comparison_json(const Scenario& scenario, const std::vector<ComparisonRow>& rows);

/// Writes `content` to `path`, creating parent directories. Throws IoError.
void write_file(const std::filesystem::path& path, const std::string& content);

/// metrics.csv, summary.json and trace.jsonl under `dir`.
void write_run_outputs(const std::filesystem::path& dir, const Scenario& scenario, const RunResult& result);

}  // namespace orchestra
