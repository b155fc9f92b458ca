#include "segbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "segbench/distance.hpp"

namespace segbench {
namespace {

struct OverlapCounts {
  std::uint64_t a = 0;
  std::uint64_t b = 0;
  std::uint64_t both = 0;
};

OverlapCounts overlap(const Mask& a, const Mask& b) {
  require_same_geometry(a, b);
  OverlapCounts c;
  const auto ba = a.bits();
  const auto bb = b.bits();
  for (std::size_t i = 0; i < ba.size(); ++i) {
    c.a += ba[i];
    c.b += bb[i];
    c.both += ba[i] & bb[i];
  }
  return c;
}

double dice_from(const OverlapCounts& c) {
  if (c.a + c.b == 0) return 1.0;
  return 2.0 * static_cast<double>(c.both) / static_cast<double>(c.a + c.b);
}

double iou_from(const OverlapCounts& c) {
  const std::uint64_t uni = c.a + c.b - c.both;
  if (uni == 0) return 1.0;
  return static_cast<double>(c.both) / static_cast<double>(uni);
}

bool is_surface(const Mask& m, std::int64_t x, std::int64_t y, std::int64_t z) {
  const Dims& d = m.dims();
  if (x == 0 || y == 0 || z == 0 || x == d.nx - 1 || y == d.ny - 1 || z == d.nz - 1) return true;
  return !m.test(x - 1, y, z) || !m.test(x + 1, y, z) || !m.test(x, y - 1, z) || !m.test(x, y + 1, z) ||
         !m.test(x, y, z - 1) || !m.test(x, y, z + 1);
}

void require_nonempty(const Mask& m, const char* which) {
  if (m.empty()) throw Error(Errc::EmptyMask, std::string(which) + " mask is empty");
}

// Squared-distance field to a surface point set, restricted to `box`.
struct LocalField {
  BoundingBox box;
  Dims dims;
  std::vector<double> sq;

  double distance_at(const VoxelIndex& p) const {
    const auto i = static_cast<std::size_t>((p.x - box.lo[0]) + dims.nx * ((p.y - box.lo[1]) + dims.ny * (p.z - box.lo[2])));
    return std::sqrt(sq[i]);
  }
};

LocalField field_to(const std::vector<VoxelIndex>& surface, const BoundingBox& box, const Spacing& spacing) {
  LocalField f;
  f.box = box;
  f.dims = {box.extent(0), box.extent(1), box.extent(2)};
  std::vector<std::uint8_t> features(f.dims.voxel_count(), 0);
  for (const auto& p : surface) {
    features[static_cast<std::size_t>((p.x - box.lo[0]) +
                                      f.dims.nx * ((p.y - box.lo[1]) + f.dims.ny * (p.z - box.lo[2])))] = 1;
  }
  f.sq = squared_edt(features, f.dims, spacing);
  return f;
}

}  // namespace

ConfusionCounts confusion(const Mask& prediction, const Mask& truth) {
  const OverlapCounts c = overlap(prediction, truth);
  ConfusionCounts out;
  out.tp = c.both;
  out.fp = c.a - c.both;
  out.fn = c.b - c.both;
  out.tn = static_cast<std::uint64_t>(prediction.bits().size()) - out.tp - out.fp - out.fn;
  return out;
}

double dice(const Mask& a, const Mask& b) { return dice_from(overlap(a, b)); }

double iou(const Mask& a, const Mask& b) { return iou_from(overlap(a, b)); }

SensitivitySpecificity sensitivity_specificity(const Mask& prediction, const Mask& truth) {
  const ConfusionCounts c = confusion(prediction, truth);
  if (c.tp + c.fn == 0) throw Error(Errc::DegenerateTruth, "truth has no foreground");
  if (c.tn + c.fp == 0) throw Error(Errc::DegenerateTruth, "truth has no background");
  SensitivitySpecificity out;
  out.counts = c;
  out.sensitivity = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  out.specificity = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
  return out;
}

std::vector<VoxelIndex> surface_points(const Mask& mask) {
  std::vector<VoxelIndex> out;
  const BoundingBox box = bounding_box(mask);
  if (!box.valid) return out;
  for (std::int64_t z = box.lo[2]; z <= box.hi[2]; ++z) {
    for (std::int64_t y = box.lo[1]; y <= box.hi[1]; ++y) {
      for (std::int64_t x = box.lo[0]; x <= box.hi[0]; ++x) {
        if (mask.test(x, y, z) && is_surface(mask, x, y, z)) out.push_back({x, y, z});
      }
    }
  }
  return out;
}

SurfaceDistances surface_distances(const Mask& a, const Mask& b) {
  require_same_geometry(a, b);
  require_nonempty(a, "first");
  require_nonempty(b, "second");
  const auto surf_a = surface_points(a);
  const auto surf_b = surface_points(b);
  // Every feature and query point lies in the union box, and squared
  // distances do not depend on anything outside it.
  const BoundingBox box = bounding_box(a).united(bounding_box(b));
  const LocalField to_b = field_to(surf_b, box, a.spacing());
  const LocalField to_a = field_to(surf_a, box, a.spacing());

  SurfaceDistances out;
  out.a_to_b.reserve(surf_a.size());
  out.b_to_a.reserve(surf_b.size());
  for (const auto& p : surf_a) out.a_to_b.push_back(to_b.distance_at(p));
  for (const auto& p : surf_b) out.b_to_a.push_back(to_a.distance_at(p));
  return out;
}

namespace {

double hausdorff_from(const SurfaceDistances& sd, HausdorffMode mode) {
  const double b_side = *std::max_element(sd.b_to_a.begin(), sd.b_to_a.end());
  if (mode == HausdorffMode::Directed) return b_side;
  return std::max(b_side, *std::max_element(sd.a_to_b.begin(), sd.a_to_b.end()));
}

double stsd_from(const SurfaceDistances& sd) {
  const double total = std::accumulate(sd.a_to_b.begin(), sd.a_to_b.end(), 0.0) +
                       std::accumulate(sd.b_to_a.begin(), sd.b_to_a.end(), 0.0);
  return total / static_cast<double>(sd.a_to_b.size() + sd.b_to_a.size());
}

}  // namespace

double hausdorff_mm(const Mask& a, const Mask& b, HausdorffMode mode) {
  return hausdorff_from(surface_distances(a, b), mode);
}

double stsd_mm(const Mask& a, const Mask& b) { return stsd_from(surface_distances(a, b)); }

double la_diameter_mm(const Mask& mask, Axis axis) {
  const BoundingBox box = bounding_box(mask);
  if (!box.valid) throw Error(Errc::EmptyMask, "diameter of an empty mask");
  const int a = static_cast<int>(axis);
  return static_cast<double>(box.extent(a)) * mask.spacing()[a];
}

double la_volume_cm3(const Mask& mask) {
  return static_cast<double>(mask.count()) * mask.spacing().voxel_volume_mm3() / 1000.0;
}

CaseMetrics evaluate_case(const Mask& prediction, const Mask& truth, const EvaluateOptions& options) {
  require_same_geometry(prediction, truth);
  const OverlapCounts c = overlap(prediction, truth);
  if (c.b == 0) throw Error(Errc::DegenerateTruth, "truth has no foreground");
  const auto total = static_cast<std::uint64_t>(truth.bits().size());
  if (c.b == total) throw Error(Errc::DegenerateTruth, "truth has no background");

  CaseMetrics m;
  m.dice = dice_from(c);
  m.iou = iou_from(c);
  const std::uint64_t tp = c.both;
  const std::uint64_t fp = c.a - c.both;
  const std::uint64_t fn = c.b - c.both;
  const std::uint64_t tn = total - tp - fp - fn;
  m.sensitivity = static_cast<double>(tp) / static_cast<double>(tp + fn);
  m.specificity = static_cast<double>(tn) / static_cast<double>(tn + fp);

  if (c.a > 0) {
    const SurfaceDistances sd = surface_distances(prediction, truth);
    // Directed mode measures from the truth surface to the prediction.
    m.hd_mm = hausdorff_from(sd, options.hausdorff);
    m.stsd_mm = stsd_from(sd);
    m.diameter_pred_mm = la_diameter_mm(prediction, options.diameter_axis);
  }
  m.diameter_true_mm = la_diameter_mm(truth, options.diameter_axis);
  m.diameter_err_pct = 100.0 * std::abs(m.diameter_pred_mm - m.diameter_true_mm) / m.diameter_true_mm;
  const double voxel_mm3 = truth.spacing().voxel_volume_mm3();
  m.volume_pred_cm3 = static_cast<double>(c.a) * voxel_mm3 / 1000.0;
  m.volume_true_cm3 = static_cast<double>(c.b) * voxel_mm3 / 1000.0;
  m.volume_err_pct = 100.0 * std::abs(m.volume_pred_cm3 - m.volume_true_cm3) / m.volume_true_cm3;
  return m;
}

std::vector<SliceDice> dice_profile_z(const Mask& prediction, const Mask& truth) {
  require_same_geometry(prediction, truth);
  const Dims& d = truth.dims();
  const std::size_t slice = d.slice_size();
  std::vector<SliceDice> out;
  out.reserve(static_cast<std::size_t>(d.nz));
  const auto pa = prediction.bits();
  const auto pb = truth.bits();
  for (std::int64_t z = 0; z < d.nz; ++z) {
    OverlapCounts c;
    const std::size_t base = static_cast<std::size_t>(z) * slice;
    for (std::size_t i = base; i < base + slice; ++i) {
      c.a += pa[i];
      c.b += pb[i];
      c.both += pa[i] & pb[i];
    }
    SliceDice s{z, std::nullopt};
    if (c.a + c.b > 0) s.dice = dice_from(c);
    out.push_back(s);
  }
  return out;
}

}  // namespace segbench
