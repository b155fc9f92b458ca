#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "segbench/quality.hpp"
#include "segbench/stats.hpp"

namespace segbench {

/// printf "%.6g"; absent values render as "NA".
std::string format_value(double value);
std::string format_value(const std::optional<double>& value);

/// Splits one CSV line; double-quoted fields may contain commas and "" escapes.
std::vector<std::string> split_csv_line(std::string_view line);

// Per-case metrics: case_id, dice, iou, sensitivity, specificity, hd_mm,
// stsd_mm, diameter_err_pct, volume_err_pct.
void write_case_csv(std::ostream& out, std::span<const CaseRecord> rows);
void write_case_json(std::ostream& out, std::span<const CaseRecord> rows);
/// Columns are matched by name; metric columns that are missing read as
/// absent. Throws ParseFailure.
std::vector<CaseRecord> read_case_csv(std::istream& in, std::string_view source = "<stream>");
std::vector<CaseRecord> read_case_csv(const std::filesystem::path& path);

/// team_id plus one column per tag (e.g. dimensionality, cnn_count,
/// framework, architecture).
std::map<std::string, Attributes> read_attributes_csv(const std::filesystem::path& path);

/// Published-style summary table: a team or team_id column, metric columns
/// holding "mean (std)" or a bare mean, anything else kept as attributes.
std::vector<TeamSummary> read_summary_csv(std::istream& in, std::string_view source = "<stream>");
std::vector<TeamSummary> read_summary_csv(const std::filesystem::path& path);

struct QualityRow {
  std::string scan_id;
  QualityReport report;
};

void write_quality_csv(std::ostream& out, std::span<const QualityRow> rows);
void write_quality_json(std::ostream& out, std::span<const QualityRow> rows);
std::vector<QualityRow> read_quality_csv(const std::filesystem::path& path);

/// rank, team, <metric>_mean, <metric>_std for the six technical metrics,
/// p_value.
void write_leaderboard_csv(std::ostream& out, const Leaderboard& board);

struct CorrelationResult {
  std::string x;
  std::string y;
  std::size_t n = 0;
  double r = 0.0;
};

void write_leaderboard_json(std::ostream& out, const Leaderboard& board, std::span<const GroupComparison> comparisons,
                            std::span<const CorrelationResult> correlations, HausdorffMode hausdorff);

}  // namespace segbench
