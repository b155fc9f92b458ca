#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "segbench/grid.hpp"
#include "segbench/quality.hpp"

namespace segbench {

using Vec3 = std::array<double, 3>;

// Physical coordinates: voxel (i, j, k) has its centre at
// (i * sx, j * sy, k * sz) mm.

struct Ellipsoid {
  Vec3 center_mm{0, 0, 0};
  Vec3 semi_axes_mm{1, 1, 1};
};

/// Solid cylinder starting at `attach_mm` and running `length_mm` along
/// `direction` (normalised on use).
struct Tube {
  Vec3 attach_mm{0, 0, 0};
  Vec3 direction{0, 0, 1};
  double radius_mm = 1.0;
  double length_mm = 1.0;
};

/// Points with (p - point) . normal < 0 are cut away.
struct CutPlane {
  Vec3 point_mm{0, 0, 0};
  Vec3 normal{0, 0, 1};
};

struct Intensities {
  double mu_fg = 400.0;
  double sigma_fg = 20.0;
  double mu_bg = 200.0;
  double sigma_bg = 40.0;
};

struct PhantomSpec {
  Dims dims{576, 576, 88};
  Spacing spacing{0.625, 0.625, 0.625};
  Ellipsoid body;
  std::vector<Tube> tubes;
  std::optional<CutPlane> mitral_plane;
  Intensities intensities;
  ScalarType type = ScalarType::Float32;
  /// When false, geometry reaching outside the grid throws GeometryOutOfBounds.
  bool allow_clipping = false;
  std::uint64_t seed = 0;
};

/// Atrium-like body centred in the grid: an ellipsoid, four vein sleeves
/// leaving its upper half, and a valve plane truncating the bottom. Sizes
/// shrink with the grid so small test grids stay in bounds.
PhantomSpec default_phantom_spec(const Dims& dims = {576, 576, 88}, const Spacing& spacing = {0.625, 0.625, 0.625});

/// Point on the body surface along `direction` from its centre, pulled
/// inwards by `depth` (0..1), for attaching tubes.
Vec3 attachment_point(const Ellipsoid& body, const Vec3& direction, double depth = 0.9);

/// Throws InvalidSpec for non-positive axes/radii/lengths or a zero direction;
/// GeometryOutOfBounds when clipping is not allowed and the analytic solid
/// leaves the grid.
void validate(const PhantomSpec& spec);

/// Voxel is foreground iff its centre lies in the union of the body and the
/// tubes and on the kept side of the cut plane.
Mask voxelize(const PhantomSpec& spec);

/// Region-wise Gaussian intensities. Slice z draws from its own generator
/// seeded from (seed, z), so output does not depend on `jobs`.
std::pair<Volume, Mask> generate(const PhantomSpec& spec, unsigned jobs = 1);

struct TierFractions {
  double high = 0.15;
  double medium = 0.70;
  double low = 0.15;
};

/// Largest-remainder apportionment of n over the three tiers; remainder ties
/// go to the earlier tier (high, medium, low).
std::array<std::size_t, 3> tier_counts(std::size_t n, const TierFractions& fractions);

struct CohortVariation {
  double center_jitter_mm = 0.0;  ///< each centre coordinate moves by U(-j, j)
  double axis_jitter = 0.0;       ///< each semi-axis scales by 1 + U(-j, j)
};

struct CohortMember {
  std::string id;
  QualityBand tier = QualityBand::Medium;
  std::uint64_t seed = 0;
  double target_snr = 0.0;
  PhantomSpec spec;
};

/// Deterministic cohort plan. Tiers are assigned in order (high, medium,
/// low); member i uses seed derive_seed(seed, i). The background noise is set
/// to target_snr * (mu_fg - mu_bg) with target_snr drawn inside the band:
/// high U(0.3, 0.7), medium U(1.4, 2.6), low U(3.6, 5.0).
/// Throws InvalidArgument for n == 0 or bad fractions, InfeasibleTier when a
/// band cannot be reached with the base intensities and type.
std::vector<CohortMember> plan_cohort(const PhantomSpec& base, std::size_t n, const TierFractions& fractions,
                                      const CohortVariation& variation, std::uint64_t seed);

struct PhantomCase {
  CohortMember member;
  Volume volume;
  Mask mask;
};

std::vector<PhantomCase> generate_cohort(const PhantomSpec& base, std::size_t n, const TierFractions& fractions,
                                         const CohortVariation& variation, std::uint64_t seed, unsigned jobs = 1);

}  // namespace segbench
