#include "segbench/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace segbench {

std::size_t scalar_size(ScalarType type) noexcept {
  switch (type) {
    case ScalarType::UInt8: return 1;
    case ScalarType::UInt16: return 2;
    case ScalarType::Float32: return 4;
  }
  return 0;
}

void validate_geometry(const Dims& dims, const Spacing& spacing) {
  if (dims.nx <= 0 || dims.ny <= 0 || dims.nz <= 0) {
    throw Error(Errc::DimensionMismatch, "dims must be positive");
  }
  for (int a = 0; a < 3; ++a) {
    const double s = spacing[a];
    if (!std::isfinite(s) || s <= 0.0) {
      throw Error(Errc::NonPositiveSpacing, "spacing component " + std::to_string(a) + " is not positive");
    }
  }
}

Volume::Volume(Dims dims, Spacing spacing, ScalarType type)
    : dims_(dims), spacing_(spacing), type_(type) {
  validate_geometry(dims_, spacing_);
  data_.assign(dims_.voxel_count(), 0.0f);
}

Volume::Volume(Dims dims, Spacing spacing, ScalarType type, std::vector<float> data)
    : dims_(dims), spacing_(spacing), type_(type), data_(std::move(data)) {
  validate_geometry(dims_, spacing_);
  if (data_.size() != dims_.voxel_count()) {
    throw Error(Errc::DimensionMismatch, "data length " + std::to_string(data_.size()) + " != " +
                                             std::to_string(dims_.voxel_count()));
  }
}

Mask::Mask(Dims dims, Spacing spacing) : dims_(dims), spacing_(spacing) {
  validate_geometry(dims_, spacing_);
  bits_.assign(dims_.voxel_count(), 0);
}

Mask::Mask(Dims dims, Spacing spacing, std::vector<std::uint8_t> bits)
    : dims_(dims), spacing_(spacing), bits_(std::move(bits)) {
  validate_geometry(dims_, spacing_);
  if (bits_.size() != dims_.voxel_count()) {
    throw Error(Errc::DimensionMismatch, "mask length " + std::to_string(bits_.size()) + " != " +
                                             std::to_string(dims_.voxel_count()));
  }
  for (auto& b : bits_) b = b ? 1 : 0;
}

std::size_t Mask::count() const noexcept {
  std::size_t n = 0;
  for (auto b : bits_) n += b;
  return n;
}

VoxelIndex unravel(const Dims& dims, std::size_t linear) noexcept {
  const auto nx = static_cast<std::size_t>(dims.nx);
  const auto ny = static_cast<std::size_t>(dims.ny);
  return {static_cast<std::int64_t>(linear % nx), static_cast<std::int64_t>((linear / nx) % ny),
          static_cast<std::int64_t>(linear / (nx * ny))};
}

BoundingBox BoundingBox::united(const BoundingBox& other) const noexcept {
  if (!valid) return other;
  if (!other.valid) return *this;
  BoundingBox out{};
  out.valid = true;
  for (int a = 0; a < 3; ++a) {
    out.lo[a] = std::min(lo[a], other.lo[a]);
    out.hi[a] = std::max(hi[a], other.hi[a]);
  }
  return out;
}

BoundingBox BoundingBox::grown(std::int64_t margin, const Dims& clip) const noexcept {
  if (!valid) return *this;
  BoundingBox out = *this;
  for (int a = 0; a < 3; ++a) {
    out.lo[a] = std::max<std::int64_t>(0, lo[a] - margin);
    out.hi[a] = std::min<std::int64_t>(clip[a] - 1, hi[a] + margin);
  }
  return out;
}

BoundingBox bounding_box(const Mask& mask) {
  const Dims& d = mask.dims();
  BoundingBox box{};
  box.lo = {d.nx, d.ny, d.nz};
  box.hi = {-1, -1, -1};
  auto bits = mask.bits();
  std::size_t i = 0;
  for (std::int64_t z = 0; z < d.nz; ++z) {
    for (std::int64_t y = 0; y < d.ny; ++y) {
      const std::uint8_t* row = bits.data() + i;
      i += static_cast<std::size_t>(d.nx);
      const auto* first = std::find(row, row + d.nx, std::uint8_t{1});
      if (first == row + d.nx) continue;
      std::int64_t last = d.nx - 1;
      while (!row[last]) --last;
      box.lo[0] = std::min(box.lo[0], static_cast<std::int64_t>(first - row));
      box.hi[0] = std::max(box.hi[0], last);
      box.lo[1] = std::min(box.lo[1], y);
      box.hi[1] = std::max(box.hi[1], y);
      box.lo[2] = std::min(box.lo[2], z);
      box.hi[2] = std::max(box.hi[2], z);
      box.valid = true;
    }
  }
  if (!box.valid) return BoundingBox{};
  return box;
}

Mask complement(const Mask& mask) {
  std::vector<std::uint8_t> bits(mask.bits().begin(), mask.bits().end());
  for (auto& b : bits) b ^= 1;
  return Mask(mask.dims(), mask.spacing(), std::move(bits));
}

Volume downsample(const Volume& volume, const Extent3& factor) {
  const Dims& d = volume.dims();
  for (int a = 0; a < 3; ++a) {
    if (factor[a] <= 0) throw Error(Errc::InvalidArgument, "downsample factor must be positive");
    if (factor[a] > d[a]) {
      throw Error(Errc::FactorExceedsDim, "factor " + std::to_string(factor[a]) + " exceeds dim " +
                                              std::to_string(d[a]) + " on axis " + std::to_string(a));
    }
  }
  const Dims out_dims{(d.nx + factor[0] - 1) / factor[0], (d.ny + factor[1] - 1) / factor[1],
                      (d.nz + factor[2] - 1) / factor[2]};
  const Spacing& s = volume.spacing();
  const Spacing out_spacing{s.sx * static_cast<double>(factor[0]), s.sy * static_cast<double>(factor[1]),
                            s.sz * static_cast<double>(factor[2])};
  if (factor == Extent3{1, 1, 1}) {
    std::vector<float> same(volume.data().begin(), volume.data().end());
    return Volume(out_dims, out_spacing, volume.type(), std::move(same));
  }

  std::vector<double> sums(out_dims.voxel_count(), 0.0);
  std::vector<std::uint32_t> counts(out_dims.voxel_count(), 0);
  for (std::int64_t z = 0; z < d.nz; ++z) {
    const std::int64_t oz = z / factor[2];
    for (std::int64_t y = 0; y < d.ny; ++y) {
      const std::int64_t oy = y / factor[1];
      const std::size_t out_row = static_cast<std::size_t>(out_dims.nx * (oy + out_dims.ny * oz));
      const std::size_t in_row = volume.index(0, y, z);
      for (std::int64_t x = 0; x < d.nx; ++x) {
        const std::size_t o = out_row + static_cast<std::size_t>(x / factor[0]);
        sums[o] += volume.data()[in_row + static_cast<std::size_t>(x)];
        counts[o] += 1;
      }
    }
  }
  std::vector<float> out(sums.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(sums[i] / counts[i]);
  return Volume(out_dims, out_spacing, ScalarType::Float32, std::move(out));
}

}  // namespace segbench
