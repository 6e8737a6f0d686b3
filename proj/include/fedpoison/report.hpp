#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"

#include "fedpoison/orchestrator.hpp"

namespace fedpoison {

/// metrics.csv: round,client_id,loss,accuracy,f1,epochs_run. Client rows in
/// ascending id, then one `agg` row (empty epochs_run) per round. Floats use
/// 17 significant digits so files compare exactly across runs.
void write_metrics_csv(std::ostream& out, const std::vector<RoundRecord>& rounds);
std::string metrics_csv(const std::vector<RoundRecord>& rounds);

/// Config echo, final metrics, completion flag and wall time.
nlohmann::json summary_json(const ExperimentReport& report);

/// Writes metrics.csv, summary.json and flip_log.csv into `out_dir`.
void write_outputs(const std::filesystem::path& out_dir, const ExperimentReport& report);

/// One parsed metrics.csv row. `series` is "client_<id>" or "agg".
struct MetricsRow {
  unsigned round = 0;
  std::string series;
  double loss = 0.0;
  double accuracy = 0.0;
  double f1 = 0.0;
};

/// Throws DataError on a missing or malformed file.
std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);

struct ComparisonRun {
  std::string run_id;
  std::vector<MetricsRow> rows;
};

/// Long format: run_id,round,series,metric,value with metric in
/// {loss, accuracy, f1}.
void write_comparison_csv(std::ostream& out, const std::vector<ComparisonRun>& runs);

/// Final-round table, one line per (run, series).
void write_final_summary(std::ostream& out, const std::vector<ComparisonRun>& runs);

}  // namespace fedpoison
