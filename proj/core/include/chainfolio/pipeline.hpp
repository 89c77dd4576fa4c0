#pragma once

#include "chainfolio/calendar.hpp"
#include "chainfolio/config.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace chainfolio::pipeline {

enum class Stage { Synth, Ingest, Snapshot, Optimize, Metrics, Report, Validate };

/// ingest, snapshot, optimize, metrics, report: the default `run` sequence.
inline constexpr Stage kAnalysisStages[] = {Stage::Ingest, Stage::Snapshot, Stage::Optimize, Stage::Metrics,
                                            Stage::Report};

std::string_view to_string(Stage stage);
std::optional<Stage> parse_stage(std::string_view text);

/// Comma-separated stage names, returned in dependency order without
/// duplicates. Throws InputError on unknown names.
std::vector<Stage> parse_stage_list(std::string_view text);

/// Names of the files that make up the report bundle, relative to
/// `report_dir`.
inline constexpr std::string_view kReportFiles[] = {
    "summary.csv",     "distance_histogram.csv", "decay_fit.csv",  "concentration.csv",
    "cumulative_excess.csv", "naive_deltas.csv", "size_threshold.csv", "wealth_bins.csv",
    "rf_sensitivity.csv", "report.txt"};

/// Output locations under the work directory.
struct Layout {
  std::filesystem::path root;

  std::filesystem::path ingest_dir() const { return root / "ingest"; }
  std::filesystem::path ledger_dir() const { return ingest_dir() / "ledgers"; }
  std::filesystem::path filter_report() const { return ingest_dir() / "filter_report.csv"; }
  std::filesystem::path snapshot_dir() const { return root / "snapshots"; }
  std::filesystem::path solution_dir() const { return root / "solutions"; }
  std::filesystem::path metrics_dir() const { return root / "metrics"; }
  std::filesystem::path report_dir() const { return root / "report"; }
  std::filesystem::path validation_report() const { return root / "validation.txt"; }
};

struct StageResult {
  Stage stage = Stage::Ingest;
  std::size_t computed = 0;  ///< partitions (re)written
  std::size_t skipped = 0;   ///< partitions whose inputs were unchanged
  std::vector<std::string> notes;
};

/// First day of every month covered by the configuration.
std::vector<Date> snapshot_dates(const PipelineConfig& cfg);

/// Runs one stage. Partitions whose recorded input hash matches and whose
/// output is intact are skipped. Throws DependencyError when an upstream
/// partition is missing.
StageResult run_stage(const PipelineConfig& cfg, Stage stage);

/// Runs the given stages in dependency order.
std::vector<StageResult> run(const PipelineConfig& cfg, std::span<const Stage> stages);

}  // namespace chainfolio::pipeline
