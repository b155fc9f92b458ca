#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "segbench/grid.hpp"

namespace segbench {

/// Affine rescale to a Float32 volume in [0, 1]. Throws ConstantVolume.
Volume normalize_intensity(const Volume& volume);

struct ClaheParams {
  int tiles_x = 8;
  int tiles_y = 8;
  /// Multiple of the uniform bin height at which tile histograms are clipped;
  /// infinity disables clipping.
  double clip_limit = 2.0;
  int bins = 256;
};

/// Contrast limited adaptive histogram equalisation applied to each xy slice
/// independently. Bins span the volume's global [min, max]; the output stays
/// inside that range and integer types are rounded to the nearest integer,
/// ties to even.
Volume clahe_slicewise(const Volume& volume, const ClaheParams& params = {});

enum class AugmentationKind { Rotate, Elastic, PerspectiveScale, Flip };

std::string_view to_string(AugmentationKind kind) noexcept;

struct AugmentationSpec {
  AugmentationKind kind = AugmentationKind::Flip;
  double angle_deg = 0.0;   ///< rotate: about the z axis through the grid centre
  double magnitude = 0.0;   ///< elastic: max control-point displacement, voxels
  int control_points = 4;   ///< elastic: control grid points per axis
  double scale = 1.0;       ///< perspective-scale: in-plane zoom factor
  double perspective = 0.0; ///< perspective-scale: x-zoom change across y, |p| < 1
  Axis flip_axis = Axis::X;
  std::uint64_t seed = 0;
};

void validate(const AugmentationSpec& spec);

/// Applies the transform to both grids: trilinear sampling for the volume,
/// nearest-neighbour for the mask, zero outside the source grid.
std::pair<Volume, Mask> apply_augmentation(const Volume& volume, const Mask& mask, const AugmentationSpec& spec);

/// Declarative spec list: {"transforms": [{"kind": "rotate", "angle_deg": 10,
/// "seed": 1}, ...]}. Every entry must carry a seed; unknown keys are rejected.
std::vector<AugmentationSpec> parse_augmentation_config(std::string_view json_text);
std::vector<AugmentationSpec> load_augmentation_config(const std::filesystem::path& path);

/// Variant i draws concrete parameters from the AugmentationSpec ranges with a generator
/// seeded by base_seed + i: rotation angle in [-angle, angle], elastic
/// magnitude in [0, magnitude], zoom between 1 and scale, perspective in
/// [-p, p], each flip with probability 1/2.
class AugmentationStream {
 public:
  AugmentationStream(const Volume& volume, const Mask& mask, std::vector<AugmentationSpec> specs,
                     std::uint64_t base_seed);

  std::pair<Volume, Mask> variant(std::uint64_t index) const;
  std::pair<Volume, Mask> next() { return variant(cursor_++); }
  std::uint64_t position() const noexcept { return cursor_; }

  /// Concrete transforms used for variant `index`.
  std::vector<AugmentationSpec> draw(std::uint64_t index) const;

 private:
  const Volume* volume_;
  const Mask* mask_;
  std::vector<AugmentationSpec> specs_;
  std::uint64_t base_seed_;
  std::uint64_t cursor_ = 0;
};

/// Offline scheme: the first `count` variants of the online stream.
std::vector<std::pair<Volume, Mask>> materialize_augmentations(const Volume& volume, const Mask& mask,
                                                               const std::vector<AugmentationSpec>& specs,
                                                               std::uint64_t base_seed, std::size_t count,
                                                               unsigned jobs = 1);

}  // namespace segbench
