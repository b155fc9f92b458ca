#pragma once

#include <cstddef>
#include <vector>

#include "segbench/grid.hpp"

namespace segbench {

// Mask clean-up operators: connected components, binary morphology and
// majority smoothing. Voxels outside the grid count as background.

enum class Connectivity { Six = 6, TwentySix = 26 };

enum class StructuringShape {
  Cross,  ///< 6-connected; radius r gives the L1 ball of radius r
  Cube,   ///< 26-connected; radius r gives the (2r+1)^3 cube
};

struct StructuringElement {
  StructuringShape shape = StructuringShape::Cross;
  int radius = 1;
};

/// Component id per voxel (0 = background, ids from 1 in order of each
/// component's smallest linear index) plus the size of every component.
struct ComponentLabels {
  std::vector<std::uint32_t> labels;
  std::vector<std::size_t> sizes;  // sizes[id - 1]
};

ComponentLabels label_components(const Mask& mask, Connectivity connectivity = Connectivity::TwentySix);
std::size_t component_count(const Mask& mask, Connectivity connectivity = Connectivity::TwentySix);

/// Keeps the largest component; ties go to the component whose smallest
/// linear index is lowest. Empty input gives empty output.
Mask largest_component(const Mask& mask, Connectivity connectivity = Connectivity::TwentySix);

Mask dilate(const Mask& mask, const StructuringElement& se);
Mask erode(const Mask& mask, const StructuringElement& se);
Mask closing(const Mask& mask, const StructuringElement& se);
Mask opening(const Mask& mask, const StructuringElement& se);

/// Iterated 3x3x3 majority vote. Only in-grid voxels vote; a tie keeps the
/// voxel's current value.
Mask smooth_surface(const Mask& mask, int iterations);

}  // namespace segbench
