#include "segbench/quality.hpp"

#include <cmath>
#include <string>

#include "segbench/morphology.hpp"

namespace segbench {
namespace {

struct RunningMoments {
  std::size_t n = 0;
  double sum = 0.0;

  void add(double v) {
    ++n;
    sum += v;
  }
  double mean() const { return sum / static_cast<double>(n); }
};

}  // namespace

std::string_view to_string(QualityBand band) noexcept {
  switch (band) {
    case QualityBand::High: return "high";
    case QualityBand::Medium: return "medium";
    case QualityBand::Low: return "low";
  }
  return "medium";
}

QualityBand parse_quality_band(std::string_view text) {
  if (text == "high") return QualityBand::High;
  if (text == "medium") return QualityBand::Medium;
  if (text == "low") return QualityBand::Low;
  throw Error(Errc::ParseFailure, "unknown quality band '" + std::string(text) + "'");
}

QualityBand band_for_snr(double snr) noexcept {
  if (snr < 1.0) return QualityBand::High;
  if (snr > 3.0) return QualityBand::Low;
  return QualityBand::Medium;
}

QualityReport assess_quality(const Volume& scan, const Mask& atrium, int margin) {
  require_same_geometry(scan, atrium);
  if (margin < 0) throw Error(Errc::InvalidArgument, "quality margin must be non-negative");
  if (atrium.empty()) throw Error(Errc::EmptyMask, "atrium mask is empty");

  const Mask excluded = margin > 0 ? dilate(atrium, {StructuringShape::Cross, margin}) : atrium;
  const Dims& d = scan.dims();
  const auto data = scan.data();
  const auto fg_bits = atrium.bits();
  const auto ex_bits = excluded.bits();

  auto in_background = [&](std::int64_t x, std::int64_t y, std::int64_t z, std::size_t i) {
    if (ex_bits[i]) return false;
    return x >= margin && y >= margin && z >= margin && x < d.nx - margin && y < d.ny - margin &&
           z < d.nz - margin;
  };

  RunningMoments fg, bg;
  for (std::int64_t z = 0, i = 0; z < d.nz; ++z) {
    for (std::int64_t y = 0; y < d.ny; ++y) {
      for (std::int64_t x = 0; x < d.nx; ++x, ++i) {
        const auto u = static_cast<std::size_t>(i);
        if (fg_bits[u]) {
          fg.add(data[u]);
        } else if (in_background(x, y, z, u)) {
          bg.add(data[u]);
        }
      }
    }
  }
  if (bg.n == 0) throw Error(Errc::EmptyBackground, "no background voxels outside the margin");

  const double mu_fg = fg.mean();
  const double mu_bg = bg.mean();
  double ss_fg = 0.0, ss_bg = 0.0;
  for (std::int64_t z = 0, i = 0; z < d.nz; ++z) {
    for (std::int64_t y = 0; y < d.ny; ++y) {
      for (std::int64_t x = 0; x < d.nx; ++x, ++i) {
        const auto u = static_cast<std::size_t>(i);
        if (fg_bits[u]) {
          const double e = data[u] - mu_fg;
          ss_fg += e * e;
        } else if (in_background(x, y, z, u)) {
          const double e = data[u] - mu_bg;
          ss_bg += e * e;
        }
      }
    }
  }
  if (!(mu_fg > mu_bg)) {
    throw Error(Errc::DegenerateContrast, "foreground mean " + std::to_string(mu_fg) +
                                              " does not exceed background mean " + std::to_string(mu_bg));
  }
  const double sigma_fg = std::sqrt(ss_fg / static_cast<double>(fg.n));
  const double sigma_bg = std::sqrt(ss_bg / static_cast<double>(bg.n));

  QualityReport r;
  r.snr = sigma_bg / (mu_fg - mu_bg);
  r.cr = mu_fg / mu_bg;
  r.het = sigma_fg / mu_fg;
  r.band = band_for_snr(r.snr);
  return r;
}

QualityDistribution quality_distribution(std::span<const QualityReport> reports) {
  if (reports.empty()) throw Error(Errc::EmptyInput, "no quality reports");
  QualityDistribution out;
  for (const auto& r : reports) ++out.counts[static_cast<std::size_t>(r.band)];
  for (std::size_t b = 0; b < 3; ++b) {
    out.fractions[b] = static_cast<double>(out.counts[b]) / static_cast<double>(reports.size());
  }
  return out;
}

}  // namespace segbench
