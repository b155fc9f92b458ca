#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "segbench/grid.hpp"

namespace segbench {

inline constexpr Extent3 kDefaultRoiSize{240, 160, 96};

/// Placement of a fixed-size crop inside a full grid. The origin may be
/// negative and origin + size may exceed the grid; those voxels are zero
/// padding in the patch.
struct RoiBox {
  VoxelIndex origin;
  Extent3 size{0, 0, 0};
  Dims full;

  std::size_t voxel_count() const noexcept {
    return static_cast<std::size_t>(size[0]) * static_cast<std::size_t>(size[1]) * static_cast<std::size_t>(size[2]);
  }
  Dims patch_dims() const noexcept { return {size[0], size[1], size[2]}; }
  /// Padding voxels before / after the grid along an axis.
  std::int64_t pad_before(int axis) const noexcept;
  std::int64_t pad_after(int axis) const noexcept;
  bool in_bounds() const noexcept;
  bool contains(std::int64_t x, std::int64_t y, std::int64_t z) const noexcept;
  bool operator==(const RoiBox&) const = default;
};

/// Box of `size` whose origin is center - floor(size / 2) on every axis.
RoiBox centered_box(const VoxelIndex& center, const Extent3& size, const Dims& full);

Volume crop(const Volume& volume, const RoiBox& box);
Mask crop(const Mask& mask, const RoiBox& box);

template <typename Grid>
struct Crop {
  Grid patch;
  RoiBox box;
};

Crop<Volume> crop(const Volume& volume, const VoxelIndex& center, const Extent3& size);
Crop<Mask> crop(const Mask& mask, const VoxelIndex& center, const Extent3& size);

/// Places the patch back at box.origin in a grid of `full_dims`; padded patch
/// voxels are dropped. Throws BoxInconsistent when the patch does not match
/// the box size.
Mask uncrop(const Mask& patch, const RoiBox& box, const Dims& full_dims);

/// Foreground voxels of `mask` inside the box.
std::size_t count_in_box(const Mask& mask, const RoiBox& box);

/// Integer centroid of the foreground, each coordinate rounded half-up.
/// Throws EmptyMask.
VoxelIndex localize_oracle(const Mask& truth);

/// Otsu threshold over a `bins`-bin histogram spanning [min, max]; voxels
/// strictly above the returned value are foreground. Throws ConstantVolume.
double otsu_threshold(std::span<const float> samples, int bins = 256);

/// Downsample by `factor` on every axis, Otsu-threshold, keep the largest
/// 26-connected bright component and map its centroid back to the full grid.
/// Throws NoForeground.
VoxelIndex localize_threshold(const Volume& volume, int downsample_factor = 4);

class Localizer {
 public:
  virtual ~Localizer() = default;
  virtual std::string name() const = 0;
  virtual VoxelIndex locate(const Volume& volume) const = 0;
};

class ThresholdLocalizer final : public Localizer {
 public:
  explicit ThresholdLocalizer(int downsample_factor = 4) : factor_(downsample_factor) {}
  std::string name() const override { return "threshold"; }
  VoxelIndex locate(const Volume& volume) const override { return localize_threshold(volume, factor_); }

 private:
  int factor_;
};

class OracleLocalizer final : public Localizer {
 public:
  explicit OracleLocalizer(Mask truth) : truth_(std::move(truth)) {}
  std::string name() const override { return "oracle"; }
  VoxelIndex locate(const Volume& volume) const override;

 private:
  Mask truth_;
};

/// Returns a fixed point, by default the grid centre (n - 1) / 2 rounded down.
class FixedCenterLocalizer final : public Localizer {
 public:
  FixedCenterLocalizer() = default;
  explicit FixedCenterLocalizer(VoxelIndex center) : center_(center) {}
  std::string name() const override { return "fixed-center"; }
  VoxelIndex locate(const Volume& volume) const override;

 private:
  std::optional<VoxelIndex> center_;
};

class Segmenter {
 public:
  virtual ~Segmenter() = default;
  virtual std::string name() const = 0;
  /// Output geometry must equal the patch geometry.
  virtual Mask segment(const Volume& patch, const RoiBox& box) const = 0;
};

/// Returns the ground truth cropped to the box.
class OracleSegmenter final : public Segmenter {
 public:
  explicit OracleSegmenter(Mask truth) : truth_(std::move(truth)) {}
  std::string name() const override { return "oracle"; }
  Mask segment(const Volume& patch, const RoiBox& box) const override;

 private:
  Mask truth_;
};

struct ThresholdSegmenterOptions {
  int bins = 256;
  bool keep_largest = true;
  /// 6-connected closing radius; 0 disables the closing step.
  int closing_radius = 1;
};

/// Otsu threshold over the in-grid patch voxels, then largest 26-component
/// and closing.
class ThresholdSegmenter final : public Segmenter {
 public:
  explicit ThresholdSegmenter(ThresholdSegmenterOptions options = {}) : options_(options) {}
  std::string name() const override { return "threshold"; }
  Mask segment(const Volume& patch, const RoiBox& box) const override;

 private:
  ThresholdSegmenterOptions options_;
};

/// Reads <directory>/<case_id>.nrrd as a full-resolution mask and crops it to
/// the box, so precomputed model outputs run through the same geometry.
class ExternalPredictionSegmenter final : public Segmenter {
 public:
  ExternalPredictionSegmenter(std::filesystem::path directory, std::string case_id)
      : directory_(std::move(directory)), case_id_(std::move(case_id)) {}
  std::string name() const override { return "external"; }
  Mask segment(const Volume& patch, const RoiBox& box) const override;

 private:
  std::filesystem::path directory_;
  std::string case_id_;
};

struct PipelineResult {
  Mask mask;
  VoxelIndex center;
  RoiBox box;
};

PipelineResult run_pipeline_detailed(const Volume& volume, const Localizer& localizer, const Segmenter& segmenter,
                                     const Extent3& roi_size = kDefaultRoiSize);
Mask run_pipeline(const Volume& volume, const Localizer& localizer, const Segmenter& segmenter,
                  const Extent3& roi_size = kDefaultRoiSize);

// Offset experiment. The box starts centred on the truth centroid and is
// shifted by s voxels along `axis` in the positive direction, which moves the
// atrium towards the box's low side. 100% is the largest shift at which no
// foreground leaves the box: s_max = min_axis(truth) - origin_0, clamped at 0.
// Offset p maps to s = round(p / 100 * s_max).
struct OffsetPoint {
  double offset_pct = 0.0;
  std::int64_t shift_voxels = 0;
  std::size_t inside = 0;  ///< truth voxels inside the shifted box
  double dice = 0.0;
};

std::int64_t max_no_loss_shift(const Mask& truth, const Extent3& roi_size, Axis axis);

std::vector<OffsetPoint> offset_sweep(const Volume& volume, const Mask& truth, const Segmenter& segmenter,
                                      const Extent3& roi_size, std::span<const double> offsets_pct,
                                      Axis axis = Axis::X, unsigned jobs = 1);

struct PatchSizePoint {
  std::int64_t wx = 0;
  std::int64_t wy = 0;
  double background_pct = 0.0;
  double la_containment_pct = 0.0;
};

inline constexpr std::int64_t kDefaultPatchDepth = 96;

/// Boxes centred on the truth centroid with a fixed z extent. Padding voxels
/// count towards the box size.
std::vector<PatchSizePoint> patch_size_sweep(const Mask& truth, std::span<const std::array<std::int64_t, 2>> sizes,
                                             std::int64_t z_extent = kDefaultPatchDepth);
std::vector<PatchSizePoint> patch_size_sweep(const Volume& volume, const Mask& truth,
                                             std::span<const std::array<std::int64_t, 2>> sizes,
                                             std::int64_t z_extent = kDefaultPatchDepth);

}  // namespace segbench
