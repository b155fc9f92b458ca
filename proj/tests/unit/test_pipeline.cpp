#include <filesystem>
#include <random>

#include "../support/oracles.hpp"
#include "doctest.h"
#include "error_code.hpp"
#include "segbench/metrics.hpp"
#include "segbench/nrrd.hpp"
#include "segbench/phantom.hpp"
#include "segbench/pipeline.hpp"

using namespace segbench;
using testing_support::code_of;

namespace {

// Foreground voxels of m whose coordinates fall inside the box, counted
// directly.
std::size_t brute_in_box(const Mask& m, const RoiBox& box) {
  std::size_t k = 0;
  const Dims& d = m.dims();
  for (std::int64_t z = 0; z < d.nz; ++z)
    for (std::int64_t y = 0; y < d.ny; ++y)
      for (std::int64_t x = 0; x < d.nx; ++x)
        if (m.test(x, y, z) && x >= box.origin.x && x < box.origin.x + box.size[0] && y >= box.origin.y &&
            y < box.origin.y + box.size[1] && z >= box.origin.z && z < box.origin.z + box.size[2])
          ++k;
  return k;
}

PhantomSpec small_phantom(std::uint64_t seed, bool noiseless) {
  PhantomSpec s = default_phantom_spec({96, 96, 40}, {0.625, 0.625, 0.625});
  s.seed = seed;
  if (noiseless) {
    s.intensities.sigma_fg = 0.0;
    s.intensities.sigma_bg = 0.0;
  }
  return s;
}

}  // namespace

TEST_CASE("centered box arithmetic") {
  const RoiBox b = centered_box({288, 288, 44}, kDefaultRoiSize, {576, 576, 88});
  CHECK(b.origin == VoxelIndex{168, 208, -4});
  CHECK(b.pad_before(2) == 4);
  CHECK(b.pad_after(2) == 4);
  CHECK(b.pad_before(0) == 0);
  CHECK(!b.in_bounds());
  CHECK(b.contains(168, 208, -4));
  CHECK(!b.contains(167, 208, 0));
  CHECK(centered_box({5, 5, 5}, {11, 11, 11}, {11, 11, 11}).in_bounds());
}

TEST_CASE("crop of the full-size volume pads z symmetrically") {
  Volume v({576, 576, 88}, {0.625, 0.625, 0.625}, ScalarType::UInt16);
  for (std::int64_t z = 0; z < 88; ++z) v.at(288, 288, z) = static_cast<float>(z + 1);
  const auto c = crop(v, {288, 288, 44}, kDefaultRoiSize);
  CHECK(c.patch.dims() == Dims{240, 160, 96});
  CHECK(c.patch.type() == ScalarType::UInt16);
  for (std::int64_t z = 0; z < 96; ++z) {
    const float expected = z < 4 || z >= 92 ? 0.0f : static_cast<float>(z - 4 + 1);
    CHECK(c.patch.at(120, 80, z) == expected);
  }
}

TEST_CASE("whole-volume crop is the identity") {
  std::mt19937_64 rng(3);
  const Mask m = oracle::random_blobs({13, 10, 7}, {1, 1, 1}, rng, 3, 4.0);
  const auto c = crop(m, {6, 5, 3}, {13, 10, 7});
  CHECK(c.box.in_bounds());
  CHECK(c.patch == m);
  CHECK(uncrop(c.patch, c.box, m.dims()) == m);
}

TEST_CASE("crop and uncrop keep exactly the in-box voxels") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> pos(-6, 26), ext(1, 14);
  for (int t = 0; t < 60; ++t) {
    const Mask m = oracle::random_blobs({20, 18, 12}, {1, 1, 1}, rng, 3, 5.0);
    const VoxelIndex c{pos(rng), pos(rng), pos(rng) / 2};
    const Extent3 size{ext(rng), ext(rng), ext(rng)};
    const auto cr = crop(m, c, size);
    CHECK(cr.patch.dims() == cr.box.patch_dims());
    const Mask back = uncrop(cr.patch, cr.box, m.dims());
    CHECK(back.dims() == m.dims());
    for (std::int64_t z = 0; z < 12; ++z)
      for (std::int64_t y = 0; y < 18; ++y)
        for (std::int64_t x = 0; x < 20; ++x) CHECK(back.test(x, y, z) == (m.test(x, y, z) && cr.box.contains(x, y, z)));
    CHECK(count_in_box(m, cr.box) == brute_in_box(m, cr.box));
    CHECK(back.count() == count_in_box(m, cr.box));
  }
  const RoiBox box = centered_box({5, 5, 5}, {4, 4, 4}, {10, 10, 10});
  CHECK(code_of([&] { uncrop(Mask({3, 4, 4}, {1, 1, 1}), box, {10, 10, 10}); }) == Errc::BoxInconsistent);
}

TEST_CASE("oracle localizer") {
  Mask one({40, 40, 40}, {1, 1, 1});
  one.set(10, 20, 30);
  CHECK(localize_oracle(one) == VoxelIndex{10, 20, 30});
  Mask cube({20, 20, 20}, {1, 1, 1});
  for (int z = 4; z <= 10; ++z)
    for (int y = 4; y <= 10; ++y)
      for (int x = 4; x <= 10; ++x) cube.set(x, y, z);
  CHECK(localize_oracle(cube) == VoxelIndex{7, 7, 7});
  Mask ell({5, 5, 5}, {1, 1, 1});
  ell.set(0, 0, 0);
  ell.set(1, 0, 0);
  ell.set(2, 0, 0);
  ell.set(0, 1, 0);
  // mean (0.75, 0.25, 0)
  CHECK(localize_oracle(ell) == VoxelIndex{1, 0, 0});
  Mask pair({5, 5, 5}, {1, 1, 1});
  pair.set(0, 0, 0);
  pair.set(1, 1, 0);
  // mean (0.5, 0.5, 0) rounds half up
  CHECK(localize_oracle(pair) == VoxelIndex{1, 1, 0});
  CHECK(code_of([] { localize_oracle(Mask({3, 3, 3}, {1, 1, 1})); }) == Errc::EmptyMask);

  std::mt19937_64 rng(7);
  for (int t = 0; t < 10; ++t) {
    Mask m = oracle::random_blobs({16, 16, 16}, {1, 1, 1}, rng, 2, 3.0);
    Mask clipped({24, 24, 24}, {1, 1, 1});
    Mask moved({24, 24, 24}, {1, 1, 1});
    for (std::int64_t z = 0; z < 16; ++z)
      for (std::int64_t y = 0; y < 16; ++y)
        for (std::int64_t x = 0; x < 16; ++x)
          if (m.test(x, y, z)) {
            clipped.set(x, y, z);
            moved.set(x + 5, y + 3, z + 7);
          }
    if (clipped.empty()) continue;
    const VoxelIndex a = localize_oracle(clipped);
    CHECK(localize_oracle(moved) == VoxelIndex{a.x + 5, a.y + 3, a.z + 7});
  }
}

TEST_CASE("threshold localizer") {
  Volume v({64, 64, 32}, {1, 1, 1});
  for (auto& x : v.data()) x = 10.0f;
  for (std::int64_t z = 0; z < 32; ++z)
    for (std::int64_t y = 0; y < 64; ++y)
      for (std::int64_t x = 0; x < 64; ++x) {
        if ((x - 40) * (x - 40) + (y - 22) * (y - 22) + (z - 15) * (z - 15) <= 36) v.at(x, y, z) = 100.0f;
      }
  const VoxelIndex c = localize_threshold(v, 4);
  CHECK(std::abs(c.x - 40) <= 1);
  CHECK(std::abs(c.y - 22) <= 1);
  CHECK(std::abs(c.z - 15) <= 1);
  CHECK(ThresholdLocalizer(2).locate(v) == localize_threshold(v, 2));

  // 10x10x10 block against a 5x5x4 block; the larger one wins.
  Volume two({64, 64, 32}, {1, 1, 1});
  for (std::int64_t z = 0; z < 10; ++z)
    for (std::int64_t y = 0; y < 10; ++y)
      for (std::int64_t x = 0; x < 10; ++x) two.at(8 + x, 8 + y, 8 + z) = 50.0f;
  for (std::int64_t z = 0; z < 4; ++z)
    for (std::int64_t y = 0; y < 5; ++y)
      for (std::int64_t x = 0; x < 5; ++x) two.at(48 + x, 48 + y, 20 + z) = 50.0f;
  const VoxelIndex big = localize_threshold(two, 1);
  CHECK(big == VoxelIndex{13, 13, 13});
  const VoxelIndex coarse = localize_threshold(two, 2);
  CHECK(std::abs(coarse.x - 13) <= 1);
  CHECK(std::abs(coarse.z - 13) <= 1);

  CHECK(code_of([] { localize_threshold(Volume({8, 8, 8}, {1, 1, 1}), 2); }) == Errc::NoForeground);
}

TEST_CASE("otsu threshold") {
  std::vector<float> s;
  for (int i = 0; i < 100; ++i) s.push_back(10.0f);
  for (int i = 0; i < 50; ++i) s.push_back(90.0f);
  const double t = otsu_threshold(s);
  CHECK(t >= 10.0);
  CHECK(t < 90.0);
  CHECK(code_of([] { otsu_threshold(std::vector<float>(5, 1.0f)); }) == Errc::ConstantVolume);
}

TEST_CASE("fixed-center localizer") {
  const Volume v({10, 11, 5}, {1, 1, 1});
  CHECK(FixedCenterLocalizer().locate(v) == VoxelIndex{4, 5, 2});
  CHECK(FixedCenterLocalizer({1, 2, 3}).locate(v) == VoxelIndex{1, 2, 3});
}

TEST_CASE("pipeline composition on a phantom") {
  const auto [vol, truth] = generate(small_phantom(11, true));
  const Extent3 roi{64, 64, 48};
  const OracleLocalizer oloc(truth);
  const Mask out = run_pipeline(vol, oloc, OracleSegmenter(truth), roi);
  CHECK(out.dims() == vol.dims());
  CHECK(dice(out, truth) == 1.0);

  ThresholdSegmenterOptions plain;
  plain.closing_radius = 0;
  CHECK(dice(run_pipeline(vol, oloc, ThresholdSegmenter(plain), roi), truth) == 1.0);
  CHECK(dice(run_pipeline(vol, oloc, ThresholdSegmenter(), roi), truth) > 0.99);
  const auto noisy = generate(small_phantom(11, false));
  CHECK(dice(run_pipeline(noisy.first, oloc, ThresholdSegmenter(), roi), noisy.second) > 0.9);

  const auto detailed = run_pipeline_detailed(vol, ThresholdLocalizer(4), OracleSegmenter(truth), roi);
  CHECK(detailed.box.size == roi);
  CHECK(std::abs(detailed.center.x - localize_oracle(truth).x) <= 2);
}

TEST_CASE("oracle segmenter dice equals the in-box bound") {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> cx(10, 86), cz(0, 39), w(16, 64);
  const auto [vol, truth] = generate(small_phantom(17, false));
  const OracleSegmenter seg(truth);
  const double a = static_cast<double>(truth.count());
  for (int t = 0; t < 50; ++t) {
    const VoxelIndex c{cx(rng), cx(rng), cz(rng)};
    const Extent3 roi{w(rng), w(rng), w(rng) / 2};
    const FixedCenterLocalizer loc(c);
    const auto r = run_pipeline_detailed(vol, loc, seg, roi);
    const double k = static_cast<double>(brute_in_box(truth, r.box));
    CHECK(dice(r.mask, truth) == 2.0 * k / (a + k));
  }
}

TEST_CASE("external prediction segmenter") {
  const auto dir = std::filesystem::temp_directory_path() / "segbench_ext_pred";
  std::filesystem::create_directories(dir);
  const auto [vol, truth] = generate(small_phantom(19, true));
  write_nrrd(truth, dir / "case_007.nrrd");
  const Mask out = run_pipeline(vol, OracleLocalizer(truth), ExternalPredictionSegmenter(dir, "case_007"), {64, 64, 48});
  CHECK(out == truth);
  CHECK(code_of([&] { run_pipeline(vol, OracleLocalizer(truth), ExternalPredictionSegmenter(dir, "nope"), {8, 8, 8}); }) ==
        Errc::IoFailure);
  std::filesystem::remove_all(dir);
}

TEST_CASE("offset sweep") {
  const auto [vol, truth] = generate(small_phantom(23, false));
  const Extent3 roi{72, 72, 48};
  const OracleSegmenter seg(truth);
  const std::vector<double> offsets{0, 25, 50, 75, 100, 125, 150, 200, 300};
  const auto curve = offset_sweep(vol, truth, seg, roi, offsets, Axis::X, 2);
  REQUIRE(curve.size() == offsets.size());
  const double a = static_cast<double>(truth.count());
  const std::int64_t smax = max_no_loss_shift(truth, roi, Axis::X);
  CHECK(smax > 0);
  for (std::size_t i = 0; i < curve.size(); ++i) {
    const auto& p = curve[i];
    CHECK(p.offset_pct == offsets[i]);
    CHECK(p.shift_voxels == std::llround(offsets[i] / 100.0 * static_cast<double>(smax)));
    const double k = static_cast<double>(p.inside);
    CHECK(p.dice == 2.0 * k / (a + k));
    if (offsets[i] <= 100.0) CHECK(p.dice == 1.0);
    if (offsets[i] > 100.0 && p.shift_voxels > smax) CHECK(p.dice < 1.0);
    if (i > 0) CHECK(p.dice <= curve[i - 1].dice);
  }
  CHECK(offset_sweep(vol, truth, seg, roi, offsets, Axis::X, 1).back().dice == curve.back().dice);
  CHECK(code_of([&] { offset_sweep(vol, Mask(truth.dims(), truth.spacing()), seg, roi, offsets); }) == Errc::EmptyMask);
}

TEST_CASE("patch size sweep") {
  SUBCASE("whole scan box") {
    // Block centroid rounds to the grid centre (320, 320, 44), so the box is the whole grid.
    Mask centred({640, 640, 88}, {0.625, 0.625, 0.625});
    for (std::int64_t z = 34; z < 54; ++z)
      for (std::int64_t y = 300; y < 340; ++y)
        for (std::int64_t x = 305; x < 335; ++x) centred.set(x, y, z);
    const std::vector<std::array<std::int64_t, 2>> sizes{{640, 640}};
    const auto pts = patch_size_sweep(centred, sizes, 88);
    REQUIRE(pts.size() == 1);
    CHECK(pts[0].la_containment_pct == 100.0);
    CHECK(pts[0].background_pct == doctest::Approx(100.0 * (1.0 - 24000.0 / 36044800.0)).epsilon(1e-14));
  }
  SUBCASE("shrinking boxes") {
    const auto [vol, truth] = generate(small_phantom(29, false));
    const std::vector<std::array<std::int64_t, 2>> sizes{{400, 400}, {360, 320}, {320, 240}, {280, 200}, {240, 160}};
    const auto pts = patch_size_sweep(vol, truth, sizes);
    REQUIRE(pts.size() == sizes.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
      CHECK(pts[i].la_containment_pct == 100.0);
      const double box = static_cast<double>(sizes[i][0] * sizes[i][1] * kDefaultPatchDepth);
      CHECK(pts[i].background_pct == doctest::Approx(100.0 * (1.0 - static_cast<double>(truth.count()) / box)));
      if (i > 0) CHECK(pts[i].background_pct < pts[i - 1].background_pct);
    }
    const std::vector<std::array<std::int64_t, 2>> tiny{{8, 8}};
    CHECK(patch_size_sweep(truth, tiny)[0].la_containment_pct < 100.0);
    CHECK(code_of([&] { patch_size_sweep(Mask({4, 4, 4}, {1, 1, 1}), tiny); }) == Errc::EmptyMask);
  }
}
