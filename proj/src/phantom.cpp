#include "segbench/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "segbench/parallel.hpp"
#include "segbench/random.hpp"

namespace segbench {
namespace {

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

Vec3 normalized(const Vec3& a) {
  const double n = norm(a);
  if (!(n > 0.0) || !std::isfinite(n)) throw Error(Errc::InvalidSpec, "direction vector must be non-zero");
  return {a[0] / n, a[1] / n, a[2] / n};
}

bool in_ellipsoid(const Ellipsoid& e, const Vec3& p) {
  double s = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double q = (p[a] - e.center_mm[a]) / e.semi_axes_mm[a];
    s += q * q;
  }
  return s <= 1.0;
}

struct PreparedTube {
  Vec3 origin;
  Vec3 dir;
  double r2;
  double length;
};

bool in_tube(const PreparedTube& t, const Vec3& p) {
  const Vec3 d{p[0] - t.origin[0], p[1] - t.origin[1], p[2] - t.origin[2]};
  const double along = dot(d, t.dir);
  if (along < 0.0 || along > t.length) return false;
  return dot(d, d) - along * along <= t.r2;
}

// Analytic bounding box (mm) of the union before the cut.
std::pair<Vec3, Vec3> solid_bounds(const PhantomSpec& spec) {
  Vec3 lo, hi;
  for (int a = 0; a < 3; ++a) {
    lo[a] = spec.body.center_mm[a] - spec.body.semi_axes_mm[a];
    hi[a] = spec.body.center_mm[a] + spec.body.semi_axes_mm[a];
  }
  for (const auto& t : spec.tubes) {
    const Vec3 dir = normalized(t.direction);
    for (int a = 0; a < 3; ++a) {
      const double disk = t.radius_mm * std::sqrt(std::max(0.0, 1.0 - dir[a] * dir[a]));
      const double e0 = t.attach_mm[a];
      const double e1 = t.attach_mm[a] + t.length_mm * dir[a];
      lo[a] = std::min(lo[a], std::min(e0, e1) - disk);
      hi[a] = std::max(hi[a], std::max(e0, e1) + disk);
    }
  }
  return {lo, hi};
}

void check_intensities(const Intensities& in) {
  for (double v : {in.mu_fg, in.sigma_fg, in.mu_bg, in.sigma_bg}) {
    if (!std::isfinite(v)) throw Error(Errc::InvalidSpec, "intensities must be finite");
  }
  if (in.sigma_fg < 0.0 || in.sigma_bg < 0.0) throw Error(Errc::InvalidSpec, "sigmas must be >= 0");
}

}  // namespace

Vec3 attachment_point(const Ellipsoid& body, const Vec3& direction, double depth) {
  const Vec3 d = normalized(direction);
  double s = 0.0;
  for (int a = 0; a < 3; ++a) s += (d[a] / body.semi_axes_mm[a]) * (d[a] / body.semi_axes_mm[a]);
  const double t = depth / std::sqrt(s);
  return {body.center_mm[0] + t * d[0], body.center_mm[1] + t * d[1], body.center_mm[2] + t * d[2]};
}

PhantomSpec default_phantom_spec(const Dims& dims, const Spacing& spacing) {
  validate_geometry(dims, spacing);
  PhantomSpec spec;
  spec.dims = dims;
  spec.spacing = spacing;
  Vec3 extent;
  for (int a = 0; a < 3; ++a) {
    extent[a] = static_cast<double>(dims[a] - 1) * spacing[a];
    spec.body.center_mm[a] = 0.5 * extent[a];
  }
  spec.body.semi_axes_mm = {std::min(22.0, 0.2 * extent[0]), std::min(18.0, 0.2 * extent[1]),
                            std::min(15.0, 0.25 * extent[2])};
  const double radius = 0.2 * std::min({spec.body.semi_axes_mm[0], spec.body.semi_axes_mm[1], spec.body.semi_axes_mm[2]});
  const double length = 0.6 * spec.body.semi_axes_mm[2];
  for (double sx : {-1.0, 1.0}) {
    for (double sy : {-1.0, 1.0}) {
      Tube t;
      t.direction = normalized({0.45 * sx, 0.45 * sy, 0.77});
      t.attach_mm = attachment_point(spec.body, t.direction);
      t.radius_mm = radius;
      t.length_mm = length;
      spec.tubes.push_back(t);
    }
  }
  CutPlane plane;
  plane.point_mm = spec.body.center_mm;
  plane.point_mm[2] -= 0.75 * spec.body.semi_axes_mm[2];
  plane.normal = {0.0, 0.0, 1.0};
  spec.mitral_plane = plane;
  return spec;
}

void validate(const PhantomSpec& spec) {
  validate_geometry(spec.dims, spec.spacing);
  for (double s : spec.body.semi_axes_mm) {
    if (!(s > 0.0) || !std::isfinite(s)) throw Error(Errc::InvalidSpec, "semi-axes must be positive");
  }
  for (const auto& t : spec.tubes) {
    if (!(t.radius_mm > 0.0) || !(t.length_mm > 0.0)) throw Error(Errc::InvalidSpec, "tube radius and length must be positive");
    normalized(t.direction);
  }
  if (spec.mitral_plane) normalized(spec.mitral_plane->normal);
  check_intensities(spec.intensities);
  if (spec.allow_clipping) return;
  const auto [lo, hi] = solid_bounds(spec);
  for (int a = 0; a < 3; ++a) {
    const double top = static_cast<double>(spec.dims[a] - 1) * spec.spacing[a];
    if (lo[a] < 0.0 || hi[a] > top) {
      throw Error(Errc::GeometryOutOfBounds, "phantom extends outside the grid along axis " + std::to_string(a));
    }
  }
}

Mask voxelize(const PhantomSpec& spec) {
  validate(spec);
  std::vector<PreparedTube> tubes;
  for (const auto& t : spec.tubes) {
    tubes.push_back({t.attach_mm, normalized(t.direction), t.radius_mm * t.radius_mm, t.length_mm});
  }
  std::optional<std::pair<Vec3, Vec3>> cut;
  if (spec.mitral_plane) cut.emplace(spec.mitral_plane->point_mm, normalized(spec.mitral_plane->normal));

  const Dims& d = spec.dims;
  const Spacing& s = spec.spacing;
  const auto [lo, hi] = solid_bounds(spec);
  Extent3 vlo, vhi;
  for (int a = 0; a < 3; ++a) {
    vlo[a] = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(lo[a] / s[a])), 0, d[a] - 1);
    vhi[a] = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::ceil(hi[a] / s[a])), 0, d[a] - 1);
  }
  Mask mask(d, s);
  for (std::int64_t z = vlo[2]; z <= vhi[2]; ++z) {
    for (std::int64_t y = vlo[1]; y <= vhi[1]; ++y) {
      for (std::int64_t x = vlo[0]; x <= vhi[0]; ++x) {
        const Vec3 p{static_cast<double>(x) * s.sx, static_cast<double>(y) * s.sy, static_cast<double>(z) * s.sz};
        if (cut) {
          const Vec3 rel{p[0] - cut->first[0], p[1] - cut->first[1], p[2] - cut->first[2]};
          if (dot(rel, cut->second) < 0.0) continue;
        }
        bool inside = in_ellipsoid(spec.body, p);
        for (std::size_t t = 0; !inside && t < tubes.size(); ++t) inside = in_tube(tubes[t], p);
        if (inside) mask.set(x, y, z);
      }
    }
  }
  return mask;
}

std::pair<Volume, Mask> generate(const PhantomSpec& spec, unsigned jobs) {
  Mask mask = voxelize(spec);
  const Dims& d = spec.dims;
  Volume volume(d, spec.spacing, spec.type);
  const Intensities& in = spec.intensities;
  const double top = spec.type == ScalarType::UInt8 ? 255.0 : 65535.0;
  auto data = volume.data();
  const auto bits = mask.bits();
  parallel_for(static_cast<std::size_t>(d.nz), jobs, [&](std::size_t z) {
    Rng rng(derive_seed(spec.seed, z));
    std::normal_distribution<double> gauss(0.0, 1.0);
    const std::size_t begin = z * d.slice_size();
    for (std::size_t i = begin; i < begin + d.slice_size(); ++i) {
      const double n = gauss(rng);
      double v = bits[i] ? in.mu_fg + in.sigma_fg * n : in.mu_bg + in.sigma_bg * n;
      if (spec.type != ScalarType::Float32) v = std::clamp(std::nearbyint(v), 0.0, top);
      data[i] = static_cast<float>(v);
    }
  });
  return {std::move(volume), std::move(mask)};
}

std::array<std::size_t, 3> tier_counts(std::size_t n, const TierFractions& f) {
  const std::array<double, 3> fr{f.high, f.medium, f.low};
  double total = 0.0;
  for (double v : fr) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw Error(Errc::InvalidArgument, "tier fractions must be >= 0");
    total += v;
  }
  if (!(total > 0.0)) throw Error(Errc::InvalidArgument, "tier fractions sum to zero");
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> rem{};
  std::size_t used = 0;
  for (std::size_t t = 0; t < 3; ++t) {
    const double q = static_cast<double>(n) * fr[t] / total;
    counts[t] = static_cast<std::size_t>(std::floor(q + 1e-9));
    rem[t] = q - static_cast<double>(counts[t]);
    used += counts[t];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rem[a] > rem[b] + 1e-12; });
  for (std::size_t k = 0; used < n; ++k, ++used) ++counts[order[k % 3]];
  return counts;
}

std::vector<CohortMember> plan_cohort(const PhantomSpec& base, std::size_t n, const TierFractions& fractions,
                                      const CohortVariation& variation, std::uint64_t seed) {
  if (n == 0) throw Error(Errc::InvalidArgument, "cohort needs at least one member");
  if (variation.center_jitter_mm < 0.0 || variation.axis_jitter < 0.0 || variation.axis_jitter >= 1.0) {
    throw Error(Errc::InvalidArgument, "jitter ranges must be >= 0 (axis jitter < 1)");
  }
  const auto counts = tier_counts(n, fractions);
  const Intensities& in = base.intensities;
  const double contrast = in.mu_fg - in.mu_bg;
  static constexpr std::array<std::pair<double, double>, 3> kBands{{{0.3, 0.7}, {1.4, 2.6}, {3.6, 5.0}}};
  for (std::size_t t = 0; t < 3; ++t) {
    if (counts[t] == 0) continue;
    const auto tier = static_cast<QualityBand>(t);
    if (!(contrast > 0.0)) {
      throw Error(Errc::InfeasibleTier, std::string(to_string(tier)) + " tier needs mu_fg > mu_bg");
    }
    if (base.type != ScalarType::Float32) {
      const double top = base.type == ScalarType::UInt8 ? 255.0 : 65535.0;
      const double sigma = kBands[t].second * contrast;
      if (in.mu_bg - 3.0 * sigma < 0.0 || in.mu_bg + 3.0 * sigma > top || in.mu_fg + 3.0 * in.sigma_fg > top ||
          in.mu_fg - 3.0 * in.sigma_fg < 0.0) {
        throw Error(Errc::InfeasibleTier,
                    std::string(to_string(tier)) + " tier noise would clip at the integer range of the sample type");
      }
    }
  }

  std::vector<CohortMember> out;
  out.reserve(n);
  std::size_t tier = 0;
  std::size_t left = counts[0];
  for (std::size_t i = 0; i < n; ++i) {
    while (left == 0) left = counts[++tier];
    --left;
    CohortMember m;
    char id[32];
    std::snprintf(id, sizeof id, "case_%03zu", i + 1);
    m.id = id;
    m.tier = static_cast<QualityBand>(tier);
    m.seed = derive_seed(seed, i);
    Rng rng(m.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    m.target_snr = kBands[tier].first + (kBands[tier].second - kBands[tier].first) * unit(rng);
    m.spec = base;
    m.spec.seed = m.seed;
    m.spec.intensities.sigma_bg = m.target_snr * contrast;
    if (variation.center_jitter_mm > 0.0 || variation.axis_jitter > 0.0) {
      Vec3 shift{};
      Vec3 scale{};
      for (int a = 0; a < 3; ++a) shift[a] = variation.center_jitter_mm * (2.0 * unit(rng) - 1.0);
      for (int a = 0; a < 3; ++a) scale[a] = 1.0 + variation.axis_jitter * (2.0 * unit(rng) - 1.0);
      Ellipsoid& body = m.spec.body;
      const Ellipsoid original = body;
      for (int a = 0; a < 3; ++a) {
        body.center_mm[a] += shift[a];
        body.semi_axes_mm[a] *= scale[a];
      }
      // Keep the sleeves attached to the moved body.
      for (auto& t : m.spec.tubes) {
        Vec3 rel{};
        for (int a = 0; a < 3; ++a) rel[a] = (t.attach_mm[a] - original.center_mm[a]) * scale[a];
        for (int a = 0; a < 3; ++a) t.attach_mm[a] = body.center_mm[a] + rel[a];
      }
      if (m.spec.mitral_plane) {
        auto& p = m.spec.mitral_plane->point_mm;
        for (int a = 0; a < 3; ++a) p[a] = body.center_mm[a] + (p[a] - original.center_mm[a]) * scale[a];
      }
    }
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<PhantomCase> generate_cohort(const PhantomSpec& base, std::size_t n, const TierFractions& fractions,
                                         const CohortVariation& variation, std::uint64_t seed, unsigned jobs) {
  const auto plan = plan_cohort(base, n, fractions, variation, seed);
  std::vector<PhantomCase> out(plan.size());
  parallel_for(plan.size(), jobs, [&](std::size_t i) {
    auto [volume, mask] = generate(plan[i].spec);
    out[i] = {plan[i], std::move(volume), std::move(mask)};
  });
  return out;
}

}  // namespace segbench
