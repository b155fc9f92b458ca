#pragma once

#include <span>
#include <vector>

#include "segbench/grid.hpp"

namespace segbench {

/// Exact squared Euclidean distance transform with anisotropic spacing.
/// `features` holds one byte per voxel of a grid of extent `dims`; the result
/// at each voxel is the squared physical distance (mm^2) to the nearest
/// nonzero feature voxel, or +infinity when there are none.
///
/// Separable lower-envelope-of-parabolas scheme, one pass per axis.
std::vector<double> squared_edt(std::span<const std::uint8_t> features, const Dims& dims, const Spacing& spacing);

}  // namespace segbench
