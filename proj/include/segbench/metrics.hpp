#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "segbench/grid.hpp"

namespace segbench {

// Per-case segmentation metrics. Distances are Euclidean in millimetres
// between surface-voxel centres; a surface voxel is a foreground voxel with at
// least one 6-neighbour that is background or outside the grid.

struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const noexcept { return tp + tn + fp + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

ConfusionCounts confusion(const Mask& prediction, const Mask& truth);

/// 2|A∩B| / (|A|+|B|); 1.0 when both masks are empty.
double dice(const Mask& a, const Mask& b);
/// |A∩B| / |A∪B|; 1.0 when both masks are empty.
double iou(const Mask& a, const Mask& b);

struct SensitivitySpecificity {
  double sensitivity = 0.0;
  double specificity = 0.0;
  ConfusionCounts counts;
};

/// Throws DegenerateTruth unless the truth has both foreground and background.
SensitivitySpecificity sensitivity_specificity(const Mask& prediction, const Mask& truth);

std::vector<VoxelIndex> surface_points(const Mask& mask);

/// Minimum surface-to-surface distances in both directions: `a_to_b[i]` is
/// the distance from the i-th surface point of `a` (in linear order) to the
/// nearest surface point of `b`.
struct SurfaceDistances {
  std::vector<double> a_to_b;
  std::vector<double> b_to_a;
};

SurfaceDistances surface_distances(const Mask& a, const Mask& b);

enum class HausdorffMode {
  Directed,   ///< max over b's surface of the distance to a's surface
  Symmetric,  ///< max of both directed values
};

double hausdorff_mm(const Mask& a, const Mask& b, HausdorffMode mode = HausdorffMode::Symmetric);
double stsd_mm(const Mask& a, const Mask& b);

/// Foreground extent along `axis` in mm: (max - min + 1) * spacing.
double la_diameter_mm(const Mask& mask, Axis axis = Axis::X);
double la_volume_cm3(const Mask& mask);

struct CaseMetrics {
  double dice = 0.0;
  double iou = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  std::optional<double> hd_mm;    ///< absent when the prediction is empty
  std::optional<double> stsd_mm;  ///< absent when the prediction is empty
  double diameter_pred_mm = 0.0;
  double diameter_true_mm = 0.0;
  double diameter_err_pct = 0.0;
  double volume_pred_cm3 = 0.0;
  double volume_true_cm3 = 0.0;
  double volume_err_pct = 0.0;
};

struct EvaluateOptions {
  Axis diameter_axis = Axis::X;
  HausdorffMode hausdorff = HausdorffMode::Symmetric;
};

CaseMetrics evaluate_case(const Mask& prediction, const Mask& truth, const EvaluateOptions& options = {});

struct SliceDice {
  std::int64_t z = 0;
  std::optional<double> dice;  ///< unset when neither mask has pixels on the slice
};

std::vector<SliceDice> dice_profile_z(const Mask& prediction, const Mask& truth);

}  // namespace segbench
