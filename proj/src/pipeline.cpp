#include "segbench/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "segbench/metrics.hpp"
#include "segbench/morphology.hpp"
#include "segbench/nrrd.hpp"
#include "segbench/parallel.hpp"

namespace segbench {

std::int64_t RoiBox::pad_before(int axis) const noexcept { return std::max<std::int64_t>(0, -origin[axis]); }

std::int64_t RoiBox::pad_after(int axis) const noexcept {
  return std::max<std::int64_t>(0, origin[axis] + size[axis] - full[axis]);
}

bool RoiBox::in_bounds() const noexcept {
  for (int a = 0; a < 3; ++a) {
    if (pad_before(a) > 0 || pad_after(a) > 0) return false;
  }
  return true;
}

bool RoiBox::contains(std::int64_t x, std::int64_t y, std::int64_t z) const noexcept {
  return x >= origin.x && y >= origin.y && z >= origin.z && x < origin.x + size[0] && y < origin.y + size[1] &&
         z < origin.z + size[2];
}

RoiBox centered_box(const VoxelIndex& center, const Extent3& size, const Dims& full) {
  for (int a = 0; a < 3; ++a) {
    if (size[a] <= 0) throw Error(Errc::InvalidArgument, "ROI size must be positive");
  }
  RoiBox box;
  box.size = size;
  box.full = full;
  box.origin = {center.x - size[0] / 2, center.y - size[1] / 2, center.z - size[2] / 2};
  return box;
}

namespace {

// Overlap of the box with the grid along one axis, in patch coordinates.
struct Span1D {
  std::int64_t patch_lo = 0;
  std::int64_t grid_lo = 0;
  std::int64_t length = 0;
};

Span1D overlap(const RoiBox& box, int axis) {
  const std::int64_t lo = std::max<std::int64_t>(box.origin[axis], 0);
  const std::int64_t hi = std::min<std::int64_t>(box.origin[axis] + box.size[axis], box.full[axis]);
  return {lo - box.origin[axis], lo, std::max<std::int64_t>(0, hi - lo)};
}

// Copies the overlapping rows between a full grid and a patch.
template <typename Fn>
void for_each_row(const RoiBox& box, Fn&& fn) {
  const Span1D sx = overlap(box, 0);
  const Span1D sy = overlap(box, 1);
  const Span1D sz = overlap(box, 2);
  if (sx.length == 0 || sy.length == 0 || sz.length == 0) return;
  for (std::int64_t z = 0; z < sz.length; ++z) {
    for (std::int64_t y = 0; y < sy.length; ++y) {
      fn(VoxelIndex{sx.grid_lo, sy.grid_lo + y, sz.grid_lo + z}, VoxelIndex{sx.patch_lo, sy.patch_lo + y, sz.patch_lo + z},
         sx.length);
    }
  }
}

void check_box(const RoiBox& box, const Dims& full) {
  if (!(box.full == full)) throw Error(Errc::BoxInconsistent, "box was placed on a grid of different dims");
  for (int a = 0; a < 3; ++a) {
    if (box.size[a] <= 0) throw Error(Errc::BoxInconsistent, "box size must be positive");
  }
}

}  // namespace

Volume crop(const Volume& volume, const RoiBox& box) {
  check_box(box, volume.dims());
  Volume patch(box.patch_dims(), volume.spacing(), volume.type());
  for_each_row(box, [&](const VoxelIndex& g, const VoxelIndex& p, std::int64_t n) {
    std::copy_n(volume.data().begin() + static_cast<std::ptrdiff_t>(volume.index(g.x, g.y, g.z)), n,
                patch.data().begin() + static_cast<std::ptrdiff_t>(patch.index(p.x, p.y, p.z)));
  });
  return patch;
}

Mask crop(const Mask& mask, const RoiBox& box) {
  check_box(box, mask.dims());
  Mask patch(box.patch_dims(), mask.spacing());
  for_each_row(box, [&](const VoxelIndex& g, const VoxelIndex& p, std::int64_t n) {
    std::copy_n(mask.bits().begin() + static_cast<std::ptrdiff_t>(mask.index(g.x, g.y, g.z)), n,
                patch.bits().begin() + static_cast<std::ptrdiff_t>(patch.index(p.x, p.y, p.z)));
  });
  return patch;
}

Crop<Volume> crop(const Volume& volume, const VoxelIndex& center, const Extent3& size) {
  const RoiBox box = centered_box(center, size, volume.dims());
  return {crop(volume, box), box};
}

Crop<Mask> crop(const Mask& mask, const VoxelIndex& center, const Extent3& size) {
  const RoiBox box = centered_box(center, size, mask.dims());
  return {crop(mask, box), box};
}

Mask uncrop(const Mask& patch, const RoiBox& box, const Dims& full_dims) {
  if (!(patch.dims() == box.patch_dims())) throw Error(Errc::BoxInconsistent, "patch dims differ from box size");
  check_box(box, full_dims);
  Mask out(full_dims, patch.spacing());
  for_each_row(box, [&](const VoxelIndex& g, const VoxelIndex& p, std::int64_t n) {
    std::copy_n(patch.bits().begin() + static_cast<std::ptrdiff_t>(patch.index(p.x, p.y, p.z)), n,
                out.bits().begin() + static_cast<std::ptrdiff_t>(out.index(g.x, g.y, g.z)));
  });
  return out;
}

std::size_t count_in_box(const Mask& mask, const RoiBox& box) {
  check_box(box, mask.dims());
  std::size_t n = 0;
  for_each_row(box, [&](const VoxelIndex& g, const VoxelIndex&, std::int64_t len) {
    const auto row = mask.bits().subspan(mask.index(g.x, g.y, g.z), static_cast<std::size_t>(len));
    n += static_cast<std::size_t>(std::count(row.begin(), row.end(), std::uint8_t{1}));
  });
  return n;
}

namespace {

// floor(sum / count + 1/2) in exact integer arithmetic.
std::int64_t round_half_up(std::int64_t sum, std::int64_t count) {
  const std::int64_t num = 2 * sum + count;
  const std::int64_t den = 2 * count;
  std::int64_t q = num / den;
  if ((num % den != 0) && ((num < 0) != (den < 0))) --q;
  return q;
}

}  // namespace

VoxelIndex localize_oracle(const Mask& truth) {
  const Dims& d = truth.dims();
  std::int64_t sx = 0, sy = 0, sz = 0, n = 0;
  const auto bits = truth.bits();
  std::size_t i = 0;
  for (std::int64_t z = 0; z < d.nz; ++z) {
    for (std::int64_t y = 0; y < d.ny; ++y) {
      for (std::int64_t x = 0; x < d.nx; ++x, ++i) {
        if (!bits[i]) continue;
        sx += x;
        sy += y;
        sz += z;
        ++n;
      }
    }
  }
  if (n == 0) throw Error(Errc::EmptyMask, "cannot localise an empty mask");
  return {round_half_up(sx, n), round_half_up(sy, n), round_half_up(sz, n)};
}

double otsu_threshold(std::span<const float> samples, int bins) {
  if (bins < 2) throw Error(Errc::InvalidArgument, "Otsu needs >= 2 bins");
  if (samples.empty()) throw Error(Errc::EmptyInput, "no samples to threshold");
  const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
  const double lo = *mn;
  const double hi = *mx;
  if (!(hi > lo)) throw Error(Errc::ConstantVolume, "cannot threshold constant intensities");
  auto bin_of = [&](float v) {
    return std::clamp(static_cast<int>(std::floor((static_cast<double>(v) - lo) / (hi - lo) * bins)), 0, bins - 1);
  };
  std::vector<double> hist(static_cast<std::size_t>(bins), 0.0);
  for (float v : samples) hist[static_cast<std::size_t>(bin_of(v))] += 1.0;

  const double total = static_cast<double>(samples.size());
  double sum_all = 0.0;
  for (int b = 0; b < bins; ++b) sum_all += b * hist[static_cast<std::size_t>(b)];
  double w0 = 0.0, sum0 = 0.0, best_var = -1.0;
  int best = 0;
  for (int b = 0; b < bins - 1; ++b) {
    w0 += hist[static_cast<std::size_t>(b)];
    sum0 += b * hist[static_cast<std::size_t>(b)];
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double m0 = sum0 / w0;
    const double m1 = (sum_all - sum0) / w1;
    const double var = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (var > best_var) {
      best_var = var;
      best = b;
    }
  }
  // Report the largest sample in the low class so "> threshold" splits
  // exactly on the chosen bin boundary.
  double threshold = lo;
  for (float v : samples) {
    if (bin_of(v) <= best) threshold = std::max(threshold, static_cast<double>(v));
  }
  return threshold;
}

VoxelIndex localize_threshold(const Volume& volume, int downsample_factor) {
  if (downsample_factor < 1) throw Error(Errc::InvalidArgument, "downsample factor must be >= 1");
  const Dims& full = volume.dims();
  const Extent3 factor{std::min<std::int64_t>(downsample_factor, full.nx), std::min<std::int64_t>(downsample_factor, full.ny),
                       std::min<std::int64_t>(downsample_factor, full.nz)};
  const Volume small = downsample(volume, factor);
  const auto data = small.data();
  const auto [mn, mx] = std::minmax_element(data.begin(), data.end());
  if (!(*mx > *mn)) throw Error(Errc::NoForeground, "uniform volume has no bright region");
  const double t = otsu_threshold(data);
  Mask bright(small.dims(), small.spacing());
  for (std::size_t i = 0; i < data.size(); ++i) bright.bits()[i] = data[i] > t ? 1 : 0;
  const Mask blob = largest_component(bright, Connectivity::TwentySix);
  if (blob.empty()) throw Error(Errc::NoForeground, "threshold produced no foreground");

  const Dims& d = small.dims();
  double sum[3] = {0.0, 0.0, 0.0};
  double n = 0.0;
  std::size_t i = 0;
  for (std::int64_t z = 0; z < d.nz; ++z) {
    for (std::int64_t y = 0; y < d.ny; ++y) {
      for (std::int64_t x = 0; x < d.nx; ++x, ++i) {
        if (!blob.bits()[i]) continue;
        const std::int64_t c[3] = {x, y, z};
        for (int a = 0; a < 3; ++a) {
          // Centre of the block this coarse voxel averaged.
          const std::int64_t b0 = c[a] * factor[a];
          const std::int64_t b1 = std::min(b0 + factor[a], full[a]) - 1;
          sum[a] += 0.5 * static_cast<double>(b0 + b1);
        }
        n += 1.0;
      }
    }
  }
  VoxelIndex out;
  std::int64_t* coord[3] = {&out.x, &out.y, &out.z};
  for (int a = 0; a < 3; ++a) {
    *coord[a] = std::clamp(static_cast<std::int64_t>(std::floor(sum[a] / n + 0.5)), std::int64_t{0}, full[a] - 1);
  }
  return out;
}

VoxelIndex OracleLocalizer::locate(const Volume& volume) const {
  require_same_geometry(volume, truth_);
  return localize_oracle(truth_);
}

VoxelIndex FixedCenterLocalizer::locate(const Volume& volume) const {
  const Dims& d = volume.dims();
  const VoxelIndex c = center_.value_or(VoxelIndex{(d.nx - 1) / 2, (d.ny - 1) / 2, (d.nz - 1) / 2});
  if (!d.contains(c.x, c.y, c.z)) throw Error(Errc::InvalidArgument, "fixed centre lies outside the volume");
  return c;
}

Mask OracleSegmenter::segment(const Volume& patch, const RoiBox& box) const {
  if (!(patch.dims() == box.patch_dims())) throw Error(Errc::BoxInconsistent, "patch dims differ from box size");
  return crop(truth_, box);
}

Mask ThresholdSegmenter::segment(const Volume& patch, const RoiBox& box) const {
  if (!(patch.dims() == box.patch_dims())) throw Error(Errc::BoxInconsistent, "patch dims differ from box size");
  std::vector<float> inside;
  inside.reserve(patch.dims().voxel_count());
  Mask in_grid(patch.dims(), patch.spacing());
  for_each_row(box, [&](const VoxelIndex&, const VoxelIndex& p, std::int64_t n) {
    const std::size_t start = patch.index(p.x, p.y, p.z);
    for (std::int64_t k = 0; k < n; ++k) {
      inside.push_back(patch.data()[start + static_cast<std::size_t>(k)]);
      in_grid.bits()[start + static_cast<std::size_t>(k)] = 1;
    }
  });
  Mask out(patch.dims(), patch.spacing());
  if (inside.empty()) return out;
  const auto [mn, mx] = std::minmax_element(inside.begin(), inside.end());
  if (!(*mx > *mn)) return out;
  const double t = otsu_threshold(inside, options_.bins);
  for (std::size_t i = 0; i < out.bits().size(); ++i) {
    out.bits()[i] = (in_grid.bits()[i] && patch.data()[i] > t) ? 1 : 0;
  }
  if (options_.keep_largest) out = largest_component(out, Connectivity::TwentySix);
  if (options_.closing_radius > 0) {
    out = closing(out, {StructuringShape::Cross, options_.closing_radius});
    for (std::size_t i = 0; i < out.bits().size(); ++i) out.bits()[i] &= in_grid.bits()[i];
  }
  return out;
}

Mask ExternalPredictionSegmenter::segment(const Volume& patch, const RoiBox& box) const {
  if (!(patch.dims() == box.patch_dims())) throw Error(Errc::BoxInconsistent, "patch dims differ from box size");
  const Mask full = read_mask(directory_ / (case_id_ + ".nrrd"));
  if (!(full.dims() == box.full)) {
    throw Error(Errc::GeometryMismatch, "external prediction for " + case_id_ + " has different dims");
  }
  Mask out = crop(full, box);
  return Mask(out.dims(), patch.spacing(), std::vector<std::uint8_t>(out.bits().begin(), out.bits().end()));
}

PipelineResult run_pipeline_detailed(const Volume& volume, const Localizer& localizer, const Segmenter& segmenter,
                                     const Extent3& roi_size) {
  PipelineResult r;
  r.center = localizer.locate(volume);
  if (!volume.dims().contains(r.center.x, r.center.y, r.center.z)) {
    throw Error(Errc::InvalidArgument, localizer.name() + " localizer returned a point outside the volume");
  }
  r.box = centered_box(r.center, roi_size, volume.dims());
  const Volume patch = crop(volume, r.box);
  const Mask seg = segmenter.segment(patch, r.box);
  if (!same_geometry(seg, patch)) {
    throw Error(Errc::GeometryMismatch, segmenter.name() + " segmenter changed the patch geometry");
  }
  r.mask = uncrop(seg, r.box, volume.dims());
  return r;
}

Mask run_pipeline(const Volume& volume, const Localizer& localizer, const Segmenter& segmenter,
                  const Extent3& roi_size) {
  return run_pipeline_detailed(volume, localizer, segmenter, roi_size).mask;
}

std::int64_t max_no_loss_shift(const Mask& truth, const Extent3& roi_size, Axis axis) {
  const BoundingBox bb = bounding_box(truth);
  if (!bb.valid) throw Error(Errc::EmptyMask, "offset sweep needs a non-empty truth");
  const int a = static_cast<int>(axis);
  const RoiBox box0 = centered_box(localize_oracle(truth), roi_size, truth.dims());
  return std::max<std::int64_t>(0, bb.lo[a] - box0.origin[a]);
}

std::vector<OffsetPoint> offset_sweep(const Volume& volume, const Mask& truth, const Segmenter& segmenter,
                                      const Extent3& roi_size, std::span<const double> offsets_pct, Axis axis,
                                      unsigned jobs) {
  require_same_geometry(volume, truth);
  const std::int64_t s_max = max_no_loss_shift(truth, roi_size, axis);
  const RoiBox box0 = centered_box(localize_oracle(truth), roi_size, truth.dims());
  const int a = static_cast<int>(axis);
  for (double p : offsets_pct) {
    if (!std::isfinite(p) || p < 0.0) throw Error(Errc::InvalidArgument, "offsets must be finite and >= 0");
  }
  std::vector<OffsetPoint> out(offsets_pct.size());
  parallel_for(offsets_pct.size(), jobs, [&](std::size_t i) {
    OffsetPoint& pt = out[i];
    pt.offset_pct = offsets_pct[i];
    pt.shift_voxels = std::llround(offsets_pct[i] / 100.0 * static_cast<double>(s_max));
    RoiBox box = box0;
    const std::int64_t shifted = box.origin[a] + pt.shift_voxels;
    (a == 0 ? box.origin.x : a == 1 ? box.origin.y : box.origin.z) = shifted;
    pt.inside = count_in_box(truth, box);
    const Volume patch = crop(volume, box);
    const Mask seg = segmenter.segment(patch, box);
    pt.dice = dice(uncrop(seg, box, volume.dims()), truth);
  });
  return out;
}

std::vector<PatchSizePoint> patch_size_sweep(const Mask& truth, std::span<const std::array<std::int64_t, 2>> sizes,
                                             std::int64_t z_extent) {
  if (z_extent <= 0) throw Error(Errc::InvalidArgument, "z extent must be positive");
  const VoxelIndex c = localize_oracle(truth);
  const double total = static_cast<double>(truth.count());
  std::vector<PatchSizePoint> out;
  out.reserve(sizes.size());
  for (const auto& s : sizes) {
    const RoiBox box = centered_box(c, {s[0], s[1], z_extent}, truth.dims());
    const double inside = static_cast<double>(count_in_box(truth, box));
    PatchSizePoint pt;
    pt.wx = s[0];
    pt.wy = s[1];
    pt.background_pct = 100.0 * (1.0 - inside / static_cast<double>(box.voxel_count()));
    pt.la_containment_pct = 100.0 * inside / total;
    out.push_back(pt);
  }
  return out;
}

std::vector<PatchSizePoint> patch_size_sweep(const Volume& volume, const Mask& truth,
                                             std::span<const std::array<std::int64_t, 2>> sizes,
                                             std::int64_t z_extent) {
  require_same_geometry(volume, truth);
  return patch_size_sweep(truth, sizes, z_extent);
}

}  // namespace segbench
