#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "segbench/metrics.hpp"

namespace segbench {

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  ///< sample standard deviation (n - 1); 0 for one value
  std::size_t n = 0;
};

/// Throws EmptyCases for an empty sample.
MeanStd mean_std(std::span<const double> values);

/// I_x(a, b) by Lentz's continued fraction. Requires a, b > 0, x in [0, 1].
double regularized_incomplete_beta(double a, double b, double x);

/// CDF of Student's t distribution with `df` (> 0, not necessarily integer)
/// degrees of freedom.
double student_t_cdf(double t, double df);

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;  ///< two-tailed
};

/// Unequal-variance t-test with Welch-Satterthwaite degrees of freedom.
/// Throws DegenerateSample when a sample has fewer than two values, a value is
/// not finite, or both samples have zero variance.
WelchResult welch_test(std::span<const double> xs, std::span<const double> ys);
double welch_ttest(std::span<const double> xs, std::span<const double> ys);

/// Pearson correlation. Throws InvalidArgument for unequal lengths,
/// DegenerateSample for fewer than two pairs, ConstantSample for zero variance.
double correlate(std::span<const double> xs, std::span<const double> ys);

enum class Metric { Dice, Iou, Sensitivity, Specificity, HdMm, StsdMm, DiameterErrPct, VolumeErrPct };
inline constexpr std::size_t kMetricCount = 8;
inline constexpr std::array<Metric, kMetricCount> kAllMetrics{
    Metric::Dice,   Metric::Iou,    Metric::Sensitivity,    Metric::Specificity,
    Metric::HdMm, Metric::StsdMm, Metric::DiameterErrPct, Metric::VolumeErrPct};

/// Column names: dice, iou, sensitivity, specificity, hd_mm, stsd_mm,
/// diameter_err_pct, volume_err_pct.
std::string_view to_string(Metric metric) noexcept;
Metric parse_metric(std::string_view name);

/// One row of a per-case metrics table; absent values are "NA" on disk.
struct CaseRecord {
  std::string case_id;
  std::array<std::optional<double>, kMetricCount> values{};

  std::optional<double> operator[](Metric m) const { return values[static_cast<std::size_t>(m)]; }
};

CaseRecord to_record(std::string case_id, const CaseMetrics& metrics);

using Attributes = std::map<std::string, std::string>;

struct TeamResult {
  std::string team_id;
  Attributes attributes;
  std::vector<CaseRecord> cases;
};

struct TeamSummary {
  std::string team_id;
  Attributes attributes;
  /// Per metric over the cases where it is present; empty when none are.
  std::array<std::optional<MeanStd>, kMetricCount> metrics{};

  const std::optional<MeanStd>& operator[](Metric m) const { return metrics[static_cast<std::size_t>(m)]; }
};

/// Throws EmptyCases.
TeamSummary aggregate(const TeamResult& team);

struct GroupStats {
  std::string value;
  std::vector<std::string> teams;
  double mean = 0.0;  ///< mean over the teams' metric means
  /// Welch p of this group's team means against all other teams' means;
  /// absent when either side has fewer than two teams.
  std::optional<double> p_vs_rest;
};

struct GroupComparison {
  std::string attribute;
  Metric metric = Metric::Dice;
  std::vector<GroupStats> groups;  ///< ordered by attribute value
  /// Welch p between the two groups when there are exactly two.
  std::optional<double> p_value;
};

/// Teams are partitioned by the attribute value; teams without the attribute
/// or without the metric are skipped. Throws DegeneratePartition when fewer
/// than two non-empty groups remain.
GroupComparison compare_groups(std::span<const TeamSummary> teams, std::string_view attribute, Metric metric);
GroupComparison compare_groups(std::span<const TeamResult> teams, std::string_view attribute, Metric metric);

struct LeaderboardRow {
  std::size_t rank = 0;  ///< 1-based
  TeamSummary summary;
  std::optional<double> p_value;
};

inline constexpr std::string_view kPValueMethod =
    "two-tailed Welch t-test of the team's per-case Dice against the pooled per-case Dice of all other teams";

struct Leaderboard {
  std::vector<LeaderboardRow> rows;
  std::string p_value_method{kPValueMethod};
};

/// Rows sorted by mean Dice descending, then mean STSD ascending, then team id.
/// Throws EmptyInput, CaseSetMismatch.
Leaderboard build_leaderboard(std::span<const TeamResult> teams);

/// Ranks precomputed summaries with the same ordering; p-values are absent.
Leaderboard rank_summaries(std::span<const TeamSummary> summaries);

}  // namespace segbench
