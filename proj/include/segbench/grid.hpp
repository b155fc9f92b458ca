#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "segbench/error.hpp"

namespace segbench {

/// Grid extent in voxels. Linear order is x-fastest:
/// index(x, y, z) = x + y * nx + z * nx * ny.
struct Dims {
  std::int64_t nx = 0;
  std::int64_t ny = 0;
  std::int64_t nz = 0;

  std::size_t voxel_count() const noexcept {
    return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny) * static_cast<std::size_t>(nz);
  }
  std::size_t slice_size() const noexcept { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
  bool contains(std::int64_t x, std::int64_t y, std::int64_t z) const noexcept {
    return x >= 0 && y >= 0 && z >= 0 && x < nx && y < ny && z < nz;
  }
  std::int64_t operator[](int axis) const noexcept { return axis == 0 ? nx : axis == 1 ? ny : nz; }
  bool operator==(const Dims&) const = default;
};

/// Physical voxel edge lengths in millimetres.
struct Spacing {
  double sx = 1.0;
  double sy = 1.0;
  double sz = 1.0;

  double voxel_volume_mm3() const noexcept { return sx * sy * sz; }
  double operator[](int axis) const noexcept { return axis == 0 ? sx : axis == 1 ? sy : sz; }
  bool operator==(const Spacing&) const = default;
};

struct VoxelIndex {
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::int64_t z = 0;

  std::int64_t operator[](int axis) const noexcept { return axis == 0 ? x : axis == 1 ? y : z; }
  bool operator==(const VoxelIndex&) const = default;
};

using Extent3 = std::array<std::int64_t, 3>;

enum class Axis { X = 0, Y = 1, Z = 2 };

/// On-disk sample type. Volumes always hold samples as float in memory, which
/// represents every 8- and 16-bit unsigned value exactly.
enum class ScalarType { UInt8, UInt16, Float32 };

std::size_t scalar_size(ScalarType type) noexcept;

/// Throws DimensionMismatch / NonPositiveSpacing when the geometry is unusable.
void validate_geometry(const Dims& dims, const Spacing& spacing);

class Volume {
 public:
  Volume() = default;
  Volume(Dims dims, Spacing spacing, ScalarType type = ScalarType::Float32);
  Volume(Dims dims, Spacing spacing, ScalarType type, std::vector<float> data);

  const Dims& dims() const noexcept { return dims_; }
  const Spacing& spacing() const noexcept { return spacing_; }
  ScalarType type() const noexcept { return type_; }

  std::span<const float> data() const noexcept { return data_; }
  std::span<float> data() noexcept { return data_; }

  std::size_t index(std::int64_t x, std::int64_t y, std::int64_t z) const noexcept {
    return static_cast<std::size_t>(x + dims_.nx * (y + dims_.ny * z));
  }
  float at(std::int64_t x, std::int64_t y, std::int64_t z) const noexcept { return data_[index(x, y, z)]; }
  float& at(std::int64_t x, std::int64_t y, std::int64_t z) noexcept { return data_[index(x, y, z)]; }

  bool operator==(const Volume&) const = default;

 private:
  Dims dims_{};
  Spacing spacing_{};
  ScalarType type_ = ScalarType::Float32;
  std::vector<float> data_;
};

/// Binary label grid; one byte per voxel holding 0 or 1.
class Mask {
 public:
  Mask() = default;
  Mask(Dims dims, Spacing spacing);
  Mask(Dims dims, Spacing spacing, std::vector<std::uint8_t> bits);

  const Dims& dims() const noexcept { return dims_; }
  const Spacing& spacing() const noexcept { return spacing_; }

  std::span<const std::uint8_t> bits() const noexcept { return bits_; }
  std::span<std::uint8_t> bits() noexcept { return bits_; }

  std::size_t index(std::int64_t x, std::int64_t y, std::int64_t z) const noexcept {
    return static_cast<std::size_t>(x + dims_.nx * (y + dims_.ny * z));
  }
  bool test(std::int64_t x, std::int64_t y, std::int64_t z) const noexcept { return bits_[index(x, y, z)] != 0; }
  void set(std::int64_t x, std::int64_t y, std::int64_t z, bool on = true) noexcept {
    bits_[index(x, y, z)] = on ? 1 : 0;
  }

  std::size_t count() const noexcept;
  bool empty() const noexcept { return count() == 0; }

  bool operator==(const Mask&) const = default;

 private:
  Dims dims_{};
  Spacing spacing_{};
  std::vector<std::uint8_t> bits_;
};

VoxelIndex unravel(const Dims& dims, std::size_t linear) noexcept;

/// Inclusive voxel bounding box of the foreground. `valid` is false for an
/// empty mask.
struct BoundingBox {
  Extent3 lo{0, 0, 0};
  Extent3 hi{-1, -1, -1};
  bool valid = false;

  BoundingBox united(const BoundingBox& other) const noexcept;
  BoundingBox grown(std::int64_t margin, const Dims& clip) const noexcept;
  std::int64_t extent(int axis) const noexcept { return valid ? hi[axis] - lo[axis] + 1 : 0; }
};

BoundingBox bounding_box(const Mask& mask);

template <typename A, typename B>
bool same_geometry(const A& a, const B& b) noexcept {
  return a.dims() == b.dims() && a.spacing() == b.spacing();
}

template <typename A, typename B>
void require_same_geometry(const A& a, const B& b) {
  if (!same_geometry(a, b)) {
    throw Error(Errc::GeometryMismatch, "grids differ in dims or spacing");
  }
}

Mask complement(const Mask& mask);

/// Block-mean downsampling; output dims are ceil(dim / factor) and partial
/// edge blocks average only the voxels they contain. Output type is Float32.
Volume downsample(const Volume& volume, const Extent3& factor);

}  // namespace segbench
