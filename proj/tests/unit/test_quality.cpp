#include <random>

#include "doctest.h"
#include "segbench/quality.hpp"

using namespace segbench;

namespace {

struct Scene {
  Volume scan;
  Mask atrium;
};

// A ball of foreground with gaussian noise in both classes.
Scene make_scene(double mu_fg, double sd_fg, double mu_bg, double sd_bg, std::uint64_t seed) {
  const Dims d{40, 40, 30};
  Scene s{Volume(d, {1, 1, 1}), Mask(d, {1, 1, 1})};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> fg(mu_fg, sd_fg), bg(mu_bg, sd_bg);
  for (std::int64_t z = 0; z < d.nz; ++z)
    for (std::int64_t y = 0; y < d.ny; ++y)
      for (std::int64_t x = 0; x < d.nx; ++x) {
        const double r2 = (x - 20.0) * (x - 20.0) + (y - 20.0) * (y - 20.0) + (z - 15.0) * (z - 15.0);
        const bool in = r2 <= 64.0;
        s.atrium.set(x, y, z, in);
        s.scan.at(x, y, z) = static_cast<float>(in ? fg(rng) : bg(rng));
      }
  return s;
}

}  // namespace

TEST_CASE("bands") {
  CHECK(band_for_snr(0.0) == QualityBand::High);
  CHECK(band_for_snr(0.999) == QualityBand::High);
  CHECK(band_for_snr(1.0) == QualityBand::Medium);
  CHECK(band_for_snr(3.0) == QualityBand::Medium);
  CHECK(band_for_snr(3.0001) == QualityBand::Low);
  for (auto b : {QualityBand::High, QualityBand::Medium, QualityBand::Low})
    CHECK(parse_quality_band(to_string(b)) == b);
  CHECK_THROWS_AS(parse_quality_band("best"), Error);
}

TEST_CASE("quality recovers the generating parameters") {
  const Scene s = make_scene(400, 20, 200, 40, 1);
  const QualityReport r = assess_quality(s.scan, s.atrium);
  CHECK(r.snr == doctest::Approx(0.2).epsilon(0.05));
  CHECK(r.cr == doctest::Approx(2.0).epsilon(0.02));
  CHECK(r.het == doctest::Approx(0.05).epsilon(0.1));
  CHECK(r.band == QualityBand::High);
}

TEST_CASE("noiseless two-level scan") {
  Scene s = make_scene(400, 0, 200, 0, 2);
  const QualityReport r = assess_quality(s.scan, s.atrium);
  CHECK(r.het == 0.0);
  CHECK(r.snr == 0.0);
  CHECK(r.cr == 2.0);
}

TEST_CASE("scale and offset behaviour") {
  const Scene s = make_scene(300, 30, 100, 60, 3);
  const QualityReport base = assess_quality(s.scan, s.atrium);
  Volume scaled = s.scan;
  for (auto& v : scaled.data()) v *= 3.0f;
  const QualityReport rs = assess_quality(scaled, s.atrium);
  CHECK(rs.snr == doctest::Approx(base.snr).epsilon(1e-5));
  CHECK(rs.cr == doctest::Approx(base.cr).epsilon(1e-5));
  CHECK(rs.het == doctest::Approx(base.het).epsilon(1e-5));

  Volume shifted = s.scan;
  for (auto& v : shifted.data()) v += 50.0f;
  const QualityReport ro = assess_quality(shifted, s.atrium);
  CHECK(ro.snr == doctest::Approx(base.snr).epsilon(1e-5));
  CHECK(ro.cr < base.cr);
  CHECK(ro.het < base.het);
}

TEST_CASE("margin excludes the rim around the atrium") {
  Scene s = make_scene(400, 0, 200, 0, 4);
  // Partial-volume rim right outside the mask would raise sigma_bg if counted.
  const Mask& a = s.atrium;
  const Dims& d = a.dims();
  for (std::int64_t z = 1; z < d.nz - 1; ++z)
    for (std::int64_t y = 1; y < d.ny - 1; ++y)
      for (std::int64_t x = 1; x < d.nx - 1; ++x)
        if (!a.test(x, y, z) && (a.test(x + 1, y, z) || a.test(x - 1, y, z))) s.scan.at(x, y, z) = 300.0f;
  CHECK(assess_quality(s.scan, a, 3).snr == 0.0);
  CHECK(assess_quality(s.scan, a, 0).snr > 0.0);
}

TEST_CASE("quality errors") {
  const Scene s = make_scene(400, 10, 200, 10, 5);
  auto code_of = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::IoFailure;
  };
  CHECK(code_of([&] { assess_quality(s.scan, Mask(s.atrium.dims(), {1, 1, 1})); }) == Errc::EmptyMask);
  CHECK(code_of([&] { assess_quality(s.scan, Mask({4, 4, 4}, {1, 1, 1})); }) == Errc::GeometryMismatch);
  Volume inverted = s.scan;
  for (auto& v : inverted.data()) v = 600.0f - v;
  CHECK(code_of([&] { assess_quality(inverted, s.atrium); }) == Errc::DegenerateContrast);
  CHECK(code_of([&] { assess_quality(s.scan, s.atrium, 20); }) == Errc::EmptyBackground);
  CHECK(code_of([] { quality_distribution({}); }) == Errc::EmptyInput);
}

TEST_CASE("distribution") {
  std::vector<QualityReport> reports(20);
  for (std::size_t i = 0; i < 20; ++i) reports[i].band = i < 3 ? QualityBand::High : i < 17 ? QualityBand::Medium : QualityBand::Low;
  const auto dist = quality_distribution(reports);
  CHECK(dist.counts == std::array<std::size_t, 3>{3, 14, 3});
  CHECK(dist.fractions[0] == doctest::Approx(0.15));
  CHECK(dist.fractions[1] == doctest::Approx(0.70));
}
