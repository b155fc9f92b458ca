#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string_view>

#include "segbench/grid.hpp"

namespace segbench {

// Scan quality from a scan and its atrium mask.
//
//   snr = sigma_bg / (mu_fg - mu_bg)   noise-to-contrast; higher is worse
//   cr  = mu_fg / mu_bg
//   het = sigma_fg / mu_fg
//
// Foreground statistics come from the mask voxels. The mask dilated by
// `margin` (6-connected) is excluded from the background, as are voxels within
// `margin` of the grid edge. Standard deviations are population values.

enum class QualityBand { High, Medium, Low };

std::string_view to_string(QualityBand band) noexcept;
QualityBand parse_quality_band(std::string_view text);

/// High below 1, Low above 3, Medium on [1, 3].
QualityBand band_for_snr(double snr) noexcept;

struct QualityReport {
  double snr = 0.0;
  double cr = 0.0;
  double het = 0.0;
  QualityBand band = QualityBand::High;
};

inline constexpr int kDefaultQualityMargin = 3;

QualityReport assess_quality(const Volume& scan, const Mask& atrium, int margin = kDefaultQualityMargin);

struct QualityDistribution {
  std::array<std::size_t, 3> counts{};  // indexed by QualityBand
  std::array<double, 3> fractions{};
};

QualityDistribution quality_distribution(std::span<const QualityReport> reports);

}  // namespace segbench
