#include <filesystem>
#include <fstream>
#include <random>

#include "../support/oracles.hpp"
#include "doctest.h"
#include "error_code.hpp"
#include "segbench/preprocess.hpp"

using namespace segbench;
using testing_support::code_of;

namespace {

Volume noise_volume(const Dims& d, std::uint64_t seed, ScalarType type = ScalarType::Float32) {
  Volume v(d, {0.625, 0.625, 0.625}, type);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1000.0);
  for (auto& x : v.data()) x = static_cast<float>(type == ScalarType::Float32 ? u(rng) : std::round(u(rng)));
  return v;
}

Mask box_mask(const Dims& d, VoxelIndex lo, VoxelIndex hi) {
  Mask m(d, {0.625, 0.625, 0.625});
  for (std::int64_t z = lo.z; z <= hi.z; ++z)
    for (std::int64_t y = lo.y; y <= hi.y; ++y)
      for (std::int64_t x = lo.x; x <= hi.x; ++x) m.set(x, y, z);
  return m;
}

}  // namespace

TEST_CASE("normalize") {
  Volume v({3, 1, 1}, {1, 1, 1}, ScalarType::UInt16, {100, 300, 200});
  const Volume n = normalize_intensity(v);
  CHECK(n.type() == ScalarType::Float32);
  CHECK(n.data()[0] == 0.0f);
  CHECK(n.data()[1] == 1.0f);
  CHECK(n.data()[2] == 0.5f);
  CHECK(code_of([] { normalize_intensity(Volume({2, 2, 2}, {1, 1, 1})); }) == Errc::ConstantVolume);

  const Volume r = noise_volume({9, 7, 5}, 3);
  const Volume nr = normalize_intensity(r);
  Volume affine = r;
  for (auto& x : affine.data()) x = 4.0f * x + 17.0f;
  const Volume na = normalize_intensity(affine);
  for (std::size_t i = 0; i < nr.data().size(); ++i) CHECK(na.data()[i] == doctest::Approx(nr.data()[i]).epsilon(1e-5));
}

TEST_CASE("single-tile CLAHE without clipping is histogram equalisation") {
  const Volume v = noise_volume({32, 24, 3}, 7);
  const auto [mn, mx] = std::minmax_element(v.data().begin(), v.data().end());
  const ClaheParams p{1, 1, std::numeric_limits<double>::infinity(), 64};
  const Volume out = clahe_slicewise(v, p);
  for (std::int64_t z = 0; z < 3; ++z) {
    std::vector<double> slice;
    for (std::int64_t i = 0; i < 32 * 24; ++i) slice.push_back(v.data()[static_cast<std::size_t>(z * 32 * 24 + i)]);
    const auto expected = oracle::equalize(slice, *mn, *mx, 64);
    for (std::size_t i = 0; i < slice.size(); ++i)
      CHECK(out.data()[z * 32 * 24 + i] == doctest::Approx(expected[i]).epsilon(1e-5));
  }
}

TEST_CASE("CLAHE properties") {
  const Volume v = noise_volume({40, 40, 4}, 9, ScalarType::UInt16);
  const auto [mn, mx] = std::minmax_element(v.data().begin(), v.data().end());
  for (const double clip : {1.5, 2.0, 4.0, std::numeric_limits<double>::infinity()}) {
    const Volume out = clahe_slicewise(v, {4, 4, clip, 128});
    CHECK(out.dims() == v.dims());
    CHECK(out.type() == ScalarType::UInt16);
    for (float x : out.data()) {
      CHECK(x >= *mn);
      CHECK(x <= *mx);
      CHECK(x == std::round(x));
    }
    // Monotone within a tile region far from tile boundaries is not
    // guaranteed across tiles, but a constant slice stays constant.
  }
  Volume ramp({16, 16, 1}, {1, 1, 1});
  for (std::int64_t y = 0; y < 16; ++y)
    for (std::int64_t x = 0; x < 16; ++x) ramp.at(x, y, 0) = static_cast<float>(x + 16 * y);
  const Volume rr = clahe_slicewise(ramp, {1, 1, 2.0, 256});
  for (std::size_t i = 1; i < rr.data().size(); ++i) CHECK(rr.data()[i] >= rr.data()[i - 1]);

  // Slices are processed independently.
  Volume two = noise_volume({20, 20, 2}, 11);
  Volume changed = two;
  for (std::int64_t i = 0; i < 400; ++i) changed.data()[400 + static_cast<std::size_t>(i)] = two.data()[static_cast<std::size_t>(i)];
  changed.data()[400] = 1000.0f;  // keep the global range
  changed.data()[401] = 0.0f;
  two.data()[400] = 1000.0f;
  two.data()[401] = 0.0f;
  const Volume a = clahe_slicewise(two, {2, 2, 2.0, 64});
  const Volume b = clahe_slicewise(changed, {2, 2, 2.0, 64});
  for (std::size_t i = 0; i < 400; ++i) CHECK(a.data()[i] == b.data()[i]);

  const Volume flat({8, 8, 2}, {1, 1, 1});
  CHECK(clahe_slicewise(flat) == flat);
}

TEST_CASE("CLAHE errors") {
  const Volume v = noise_volume({8, 8, 2}, 1);
  CHECK(code_of([&] { clahe_slicewise(v, {9, 1, 2.0, 256}); }) == Errc::TooManyTiles);
  CHECK(code_of([&] { clahe_slicewise(v, {1, 9, 2.0, 256}); }) == Errc::TooManyTiles);
  CHECK(code_of([&] { clahe_slicewise(v, {0, 1, 2.0, 256}); }) == Errc::InvalidArgument);
  CHECK(code_of([&] { clahe_slicewise(v, {1, 1, 1.0, 256}); }) == Errc::InvalidArgument);
}

TEST_CASE("flip is an involution") {
  const Dims d{9, 8, 7};
  const Volume v = noise_volume(d, 13);
  const Mask m = box_mask(d, {1, 2, 3}, {4, 6, 5});
  for (Axis axis : {Axis::X, Axis::Y, Axis::Z}) {
    AugmentationSpec s;
    s.kind = AugmentationKind::Flip;
    s.flip_axis = axis;
    const auto [v1, m1] = apply_augmentation(v, m, s);
    CHECK(!(v1 == v));
    CHECK(m1.count() == m.count());
    const auto [v2, m2] = apply_augmentation(v1, m1, s);
    CHECK(v2 == v);
    CHECK(m2 == m);
  }
  AugmentationSpec sx;
  const auto [vx, mx] = apply_augmentation(v, m, sx);
  CHECK(vx.at(0, 3, 2) == v.at(8, 3, 2));
  CHECK(mx.test(7, 2, 3));
  CHECK(!mx.test(1, 2, 3));
}

TEST_CASE("rotation by right angles is exact") {
  const Dims d{9, 9, 3};
  const Volume v = noise_volume(d, 17);
  const Mask m = box_mask(d, {1, 2, 0}, {3, 6, 2});
  AugmentationSpec s;
  s.kind = AugmentationKind::Rotate;
  s.angle_deg = 90.0;
  auto cur = std::make_pair(v, m);
  for (int i = 0; i < 4; ++i) {
    cur = apply_augmentation(cur.first, cur.second, s);
    CHECK(cur.second.count() == m.count());
  }
  CHECK(cur.first == v);
  CHECK(cur.second == m);
  s.angle_deg = 0.0;
  const auto id = apply_augmentation(v, m, s);
  CHECK(id.first == v);
  CHECK(id.second == m);
  s.angle_deg = 180.0;
  const auto half = apply_augmentation(v, m, s);
  CHECK(half.first.at(0, 0, 1) == v.at(8, 8, 1));
}

TEST_CASE("identity parameters leave the grids unchanged") {
  const Dims d{12, 10, 6};
  const Volume v = noise_volume(d, 19);
  const Mask m = box_mask(d, {2, 2, 1}, {8, 7, 4});
  AugmentationSpec e;
  e.kind = AugmentationKind::Elastic;
  e.magnitude = 0.0;
  const auto re = apply_augmentation(v, m, e);
  CHECK(re.second == m);
  for (std::size_t i = 0; i < v.data().size(); ++i) CHECK(re.first.data()[i] == doctest::Approx(v.data()[i]).epsilon(1e-5));
  AugmentationSpec p;
  p.kind = AugmentationKind::PerspectiveScale;
  const auto rp = apply_augmentation(v, m, p);
  CHECK(rp.second == m);
}

TEST_CASE("elastic and perspective transforms are deterministic and bounded") {
  const Dims d{24, 24, 8};
  const Volume v = noise_volume(d, 23, ScalarType::UInt8);
  const Mask m = box_mask(d, {6, 6, 2}, {17, 17, 5});
  AugmentationSpec e;
  e.kind = AugmentationKind::Elastic;
  e.magnitude = 2.0;
  e.control_points = 4;
  e.seed = 99;
  const auto a = apply_augmentation(v, m, e);
  const auto b = apply_augmentation(v, m, e);
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
  CHECK(a.first.type() == ScalarType::UInt8);
  for (float x : a.first.data()) CHECK(x == std::round(x));
  CHECK(!(a.second == m));
  // Displacements up to 2 voxels keep the box core and exclude far voxels.
  CHECK(a.second.test(12, 12, 3));
  CHECK(!a.second.test(1, 1, 3));
  e.seed = 100;
  CHECK(!(apply_augmentation(v, m, e).second == a.second));

  AugmentationSpec z;
  z.kind = AugmentationKind::PerspectiveScale;
  z.scale = 1.25;
  const auto zoomed = apply_augmentation(v, m, z);
  CHECK(zoomed.second.count() > m.count());
  z.scale = 0.8;
  CHECK(apply_augmentation(v, m, z).second.count() < m.count());
}

TEST_CASE("augmentation spec validation") {
  AugmentationSpec s;
  s.kind = AugmentationKind::PerspectiveScale;
  s.perspective = 1.0;
  CHECK(code_of([&] { validate(s); }) == Errc::InvalidSpec);
  s.perspective = 0.2;
  s.scale = 0.0;
  CHECK(code_of([&] { validate(s); }) == Errc::InvalidSpec);
  AugmentationSpec e;
  e.kind = AugmentationKind::Elastic;
  e.magnitude = -1.0;
  CHECK(code_of([&] { validate(e); }) == Errc::InvalidSpec);
  e.magnitude = 1.0;
  e.control_points = 1;
  CHECK(code_of([&] { validate(e); }) == Errc::InvalidSpec);
  AugmentationSpec r;
  r.kind = AugmentationKind::Rotate;
  r.angle_deg = std::numeric_limits<double>::quiet_NaN();
  CHECK(code_of([&] { validate(r); }) == Errc::InvalidSpec);
  CHECK(to_string(AugmentationKind::PerspectiveScale) == "perspective-scale");
}

TEST_CASE("augmentation config parsing") {
  const auto specs = parse_augmentation_config(R"({"transforms": [
      {"kind": "rotate", "angle_deg": 10, "seed": 1},
      {"kind": "elastic", "magnitude": 3, "control_points": 5, "seed": 2},
      {"kind": "perspective-scale", "scale": 1.1, "perspective": 0.05, "seed": 3},
      {"kind": "flip", "axis": "y", "seed": 4}]})");
  REQUIRE(specs.size() == 4);
  CHECK(specs[0].kind == AugmentationKind::Rotate);
  CHECK(specs[0].angle_deg == 10.0);
  CHECK(specs[1].control_points == 5);
  CHECK(specs[1].seed == 2);
  CHECK(specs[2].perspective == 0.05);
  CHECK(specs[3].flip_axis == Axis::Y);

  for (const char* bad : {
           "not json",
           "{}",
           R"({"transforms": [{"kind": "rotate"}]})",
           R"({"transforms": [{"kind": "shear", "seed": 1}]})",
           R"({"transforms": [{"kind": "rotate", "seed": 1, "speed": 2}]})",
           R"({"transforms": [{"kind": "flip", "axis": "w", "seed": 1}]})",
           R"({"transforms": [{"kind": "elastic", "magnitude": -2, "seed": 1}]})",
           R"({"transforms": [], "extra": 1})",
       }) {
    CAPTURE(bad);
    CHECK(code_of([&] { parse_augmentation_config(bad); }) == Errc::InvalidSpec);
  }
  const auto path = std::filesystem::temp_directory_path() / "segbench_aug_config.json";
  {
    std::ofstream(path) << R"({"transforms": [{"kind": "flip", "seed": 7}]})";
  }
  CHECK(load_augmentation_config(path).size() == 1);
  std::filesystem::remove(path);
  CHECK(code_of([&] { load_augmentation_config(path); }) == Errc::IoFailure);
}

TEST_CASE("augmentation stream") {
  const Dims d{16, 16, 6};
  const Volume v = noise_volume(d, 29);
  const Mask m = box_mask(d, {4, 4, 1}, {11, 11, 4});
  const auto specs = parse_augmentation_config(R"({"transforms": [
      {"kind": "rotate", "angle_deg": 15, "seed": 1},
      {"kind": "elastic", "magnitude": 1.5, "seed": 2},
      {"kind": "perspective-scale", "scale": 1.2, "perspective": 0.1, "seed": 3},
      {"kind": "flip", "seed": 4}]})");
  AugmentationStream stream(v, m, specs, 1234);
  AugmentationStream again(v, m, specs, 1234);
  for (std::uint64_t i = 0; i < 6; ++i) {
    const auto drawn = stream.draw(i);
    REQUIRE(drawn.size() >= 3);
    REQUIRE(drawn.size() <= 4);
    CHECK(std::abs(drawn[0].angle_deg) <= 15.0);
    CHECK(drawn[1].magnitude >= 0.0);
    CHECK(drawn[1].magnitude <= 1.5);
    CHECK(drawn[2].scale >= 1.0);
    CHECK(drawn[2].scale <= 1.2);
    CHECK(std::abs(drawn[2].perspective) <= 0.1);
    const auto a = stream.next();
    const auto b = again.variant(i);
    CHECK(a.first == b.first);
    CHECK(a.second == b.second);
  }
  CHECK(stream.position() == 6);
  int many = 0;
  for (std::uint64_t i = 0; i < 400; ++i) many += stream.draw(i).size() == 4 ? 1 : 0;
  CHECK(many > 150);
  CHECK(many < 250);
  CHECK(!(stream.variant(0).first == stream.variant(1).first));

  const auto offline = materialize_augmentations(v, m, specs, 1234, 3, 2);
  REQUIRE(offline.size() == 3);
  for (std::uint64_t i = 0; i < 3; ++i) {
    const auto online = again.variant(i);
    CHECK(offline[i].first == online.first);
    CHECK(offline[i].second == online.second);
  }
  CHECK(code_of([&] { AugmentationStream(Volume(), Mask(), specs, 1); }) == Errc::NoBaseData);
  CHECK(code_of([&] { AugmentationStream(v, Mask({2, 2, 2}, {1, 1, 1}), specs, 1); }) == Errc::GeometryMismatch);
}
