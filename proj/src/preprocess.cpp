#include "segbench/preprocess.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iterator>
#include "json.hpp"
#include <numbers>
#include <set>

#include "segbench/parallel.hpp"
#include "segbench/random.hpp"

namespace segbench {
namespace {

std::pair<float, float> min_max(std::span<const float> data) {
  const auto [lo, hi] = std::minmax_element(data.begin(), data.end());
  return {*lo, *hi};
}

float store_value(double v, ScalarType type, double lo, double hi) {
  if (type == ScalarType::Float32) return static_cast<float>(v);
  return static_cast<float>(std::clamp(std::nearbyint(v), std::ceil(lo), std::floor(hi)));
}

}  // namespace

Volume normalize_intensity(const Volume& volume) {
  const auto [lo, hi] = min_max(volume.data());
  if (!(hi > lo)) throw Error(Errc::ConstantVolume, "cannot normalise a constant volume");
  const double range = static_cast<double>(hi) - static_cast<double>(lo);
  std::vector<float> out(volume.data().size());
  const auto in = volume.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>((static_cast<double>(in[i]) - lo) / range);
  }
  return Volume(volume.dims(), volume.spacing(), ScalarType::Float32, std::move(out));
}

// ---------------------------------------------------------------------------
// CLAHE

namespace {

struct TileLayout {
  std::vector<std::int64_t> start;   // tile t covers [start[t], start[t + 1])
  std::vector<double> centre;

  TileLayout(std::int64_t n, int tiles) {
    for (int t = 0; t <= tiles; ++t) start.push_back(n * t / tiles);
    for (int t = 0; t < tiles; ++t) centre.push_back(0.5 * static_cast<double>(start[t] + start[t + 1] - 1));
  }
  int tiles() const { return static_cast<int>(centre.size()); }

  // Neighbouring tile pair and the weight of the second one.
  void locate(std::int64_t x, int& t0, int& t1, double& w) const {
    const double fx = static_cast<double>(x);
    const int last = tiles() - 1;
    if (fx <= centre.front()) {
      t0 = t1 = 0;
      w = 0.0;
      return;
    }
    if (fx >= centre.back()) {
      t0 = t1 = last;
      w = 0.0;
      return;
    }
    int t = 0;
    while (t + 1 < last && centre[t + 1] <= fx) ++t;
    t0 = t;
    t1 = t + 1;
    w = (fx - centre[t]) / (centre[t + 1] - centre[t]);
  }
};

}  // namespace

Volume clahe_slicewise(const Volume& volume, const ClaheParams& params) {
  const Dims& d = volume.dims();
  if (params.tiles_x < 1 || params.tiles_y < 1 || params.bins < 2) {
    throw Error(Errc::InvalidArgument, "CLAHE needs >= 1 tile per axis and >= 2 bins");
  }
  if (params.tiles_x > d.nx || params.tiles_y > d.ny) {
    throw Error(Errc::TooManyTiles, "tile grid exceeds slice dimensions");
  }
  if (!(params.clip_limit > 1.0)) throw Error(Errc::InvalidArgument, "clip limit must exceed 1");

  const auto [flo, fhi] = min_max(volume.data());
  const double lo = flo;
  const double hi = fhi;
  if (!(hi > lo)) return volume;
  const double range = hi - lo;
  const int bins = params.bins;
  auto bin_of = [&](float v) {
    const auto b = static_cast<int>(std::floor((static_cast<double>(v) - lo) / range * bins));
    return std::clamp(b, 0, bins - 1);
  };

  const TileLayout lx(d.nx, params.tiles_x);
  const TileLayout ly(d.ny, params.tiles_y);
  const auto in = volume.data();
  std::vector<float> out(in.size());
  std::vector<double> maps(static_cast<std::size_t>(params.tiles_x * params.tiles_y * bins));
  std::vector<double> hist(static_cast<std::size_t>(bins));

  for (std::int64_t z = 0; z < d.nz; ++z) {
    const std::size_t slice = static_cast<std::size_t>(z) * d.slice_size();
    for (int ty = 0; ty < params.tiles_y; ++ty) {
      for (int tx = 0; tx < params.tiles_x; ++tx) {
        std::fill(hist.begin(), hist.end(), 0.0);
        for (std::int64_t y = ly.start[ty]; y < ly.start[ty + 1]; ++y) {
          for (std::int64_t x = lx.start[tx]; x < lx.start[tx + 1]; ++x) {
            hist[static_cast<std::size_t>(bin_of(in[slice + static_cast<std::size_t>(x + y * d.nx)]))] += 1.0;
          }
        }
        const double total = static_cast<double>((ly.start[ty + 1] - ly.start[ty]) * (lx.start[tx + 1] - lx.start[tx]));
        if (std::isfinite(params.clip_limit)) {
          const double limit = params.clip_limit * total / bins;
          double excess = 0.0;
          for (auto& h : hist) {
            if (h > limit) {
              excess += h - limit;
              h = limit;
            }
          }
          const double share = excess / bins;
          for (auto& h : hist) h += share;
        }
        double* map = maps.data() + static_cast<std::size_t>((ty * params.tiles_x + tx) * bins);
        double cdf = 0.0;
        for (int b = 0; b < bins; ++b) {
          cdf += hist[static_cast<std::size_t>(b)];
          map[b] = lo + range * cdf / total;
        }
      }
    }

    for (std::int64_t y = 0; y < d.ny; ++y) {
      int ty0, ty1;
      double wy;
      ly.locate(y, ty0, ty1, wy);
      for (std::int64_t x = 0; x < d.nx; ++x) {
        int tx0, tx1;
        double wx;
        lx.locate(x, tx0, tx1, wx);
        const std::size_t i = slice + static_cast<std::size_t>(x + y * d.nx);
        const int b = bin_of(in[i]);
        auto m = [&](int ty, int tx) {
          return maps[static_cast<std::size_t>((ty * params.tiles_x + tx) * bins + b)];
        };
        auto row = [&](int ty) { return tx0 == tx1 ? m(ty, tx0) : (1.0 - wx) * m(ty, tx0) + wx * m(ty, tx1); };
        const double v = ty0 == ty1 ? row(ty0) : (1.0 - wy) * row(ty0) + wy * row(ty1);
        out[i] = store_value(std::clamp(v, lo, hi), volume.type(), lo, hi);
      }
    }
  }
  return Volume(d, volume.spacing(), volume.type(), std::move(out));
}

// ---------------------------------------------------------------------------
// Augmentation

std::string_view to_string(AugmentationKind kind) noexcept {
  switch (kind) {
    case AugmentationKind::Rotate: return "rotate";
    case AugmentationKind::Elastic: return "elastic";
    case AugmentationKind::PerspectiveScale: return "perspective-scale";
    case AugmentationKind::Flip: return "flip";
  }
  return "flip";
}

void validate(const AugmentationSpec& spec) {
  auto fail = [](const std::string& why) { throw Error(Errc::InvalidSpec, why); };
  switch (spec.kind) {
    case AugmentationKind::Rotate:
      if (!std::isfinite(spec.angle_deg)) fail("rotation angle must be finite");
      break;
    case AugmentationKind::Elastic:
      if (!std::isfinite(spec.magnitude) || spec.magnitude < 0.0) fail("elastic magnitude must be finite and >= 0");
      if (spec.control_points < 2) fail("elastic control grid needs >= 2 points per axis");
      break;
    case AugmentationKind::PerspectiveScale:
      if (!std::isfinite(spec.scale) || spec.scale <= 0.0) fail("scale must be finite and positive");
      if (!std::isfinite(spec.perspective) || std::abs(spec.perspective) >= 1.0) fail("|perspective| must be < 1");
      break;
    case AugmentationKind::Flip:
      break;
  }
}

namespace {

using Point = std::array<double, 3>;

float sample_trilinear(const Volume& v, const Point& q) {
  const Dims& d = v.dims();
  constexpr double eps = 1e-6;
  std::array<std::int64_t, 3> i0{};
  std::array<double, 3> f{};
  for (int a = 0; a < 3; ++a) {
    const double n1 = static_cast<double>(d[a] - 1);
    if (q[a] < -eps || q[a] > n1 + eps) return 0.0f;
    const double c = std::clamp(q[a], 0.0, n1);
    i0[a] = std::min(static_cast<std::int64_t>(std::floor(c)), d[a] - 1);
    f[a] = c - static_cast<double>(i0[a]);
  }
  double acc = 0.0;
  for (int corner = 0; corner < 8; ++corner) {
    double w = 1.0;
    std::array<std::int64_t, 3> p{};
    for (int a = 0; a < 3; ++a) {
      const bool up = (corner >> a) & 1;
      w *= up ? f[a] : 1.0 - f[a];
      p[a] = i0[a] + (up ? 1 : 0);
    }
    if (w == 0.0) continue;
    if (!d.contains(p[0], p[1], p[2])) continue;
    acc += w * v.at(p[0], p[1], p[2]);
  }
  return static_cast<float>(acc);
}

std::uint8_t sample_nearest(const Mask& m, const Point& q) {
  const std::int64_t x = std::llround(q[0]);
  const std::int64_t y = std::llround(q[1]);
  const std::int64_t z = std::llround(q[2]);
  if (!m.dims().contains(x, y, z)) return 0;
  return m.test(x, y, z) ? 1 : 0;
}

// Pulls every output voxel from source position source(x, y, z).
template <typename SourceFn>
std::pair<Volume, Mask> resample(const Volume& v, const Mask& m, SourceFn&& source) {
  const Dims& d = v.dims();
  std::vector<float> vo(d.voxel_count());
  std::vector<std::uint8_t> mo(d.voxel_count());
  std::size_t i = 0;
  for (std::int64_t z = 0; z < d.nz; ++z) {
    for (std::int64_t y = 0; y < d.ny; ++y) {
      for (std::int64_t x = 0; x < d.nx; ++x, ++i) {
        const Point q = source(x, y, z);
        vo[i] = sample_trilinear(v, q);
        mo[i] = sample_nearest(m, q);
      }
    }
  }
  Volume out_v(d, v.spacing(), v.type(), std::move(vo));
  if (v.type() != ScalarType::Float32) {
    const double top = v.type() == ScalarType::UInt8 ? 255.0 : 65535.0;
    for (auto& s : out_v.data()) s = store_value(s, v.type(), 0.0, top);
  }
  return {std::move(out_v), Mask(d, m.spacing(), std::move(mo))};
}

std::pair<Volume, Mask> flip(const Volume& v, const Mask& m, Axis axis) {
  const Dims& d = v.dims();
  std::vector<float> vo(d.voxel_count());
  std::vector<std::uint8_t> mo(d.voxel_count());
  const int a = static_cast<int>(axis);
  for (std::int64_t z = 0; z < d.nz; ++z) {
    for (std::int64_t y = 0; y < d.ny; ++y) {
      for (std::int64_t x = 0; x < d.nx; ++x) {
        std::array<std::int64_t, 3> s{x, y, z};
        s[a] = d[a] - 1 - s[a];
        const std::size_t dst = v.index(x, y, z);
        vo[dst] = v.at(s[0], s[1], s[2]);
        mo[dst] = m.test(s[0], s[1], s[2]) ? 1 : 0;
      }
    }
  }
  return {Volume(d, v.spacing(), v.type(), std::move(vo)), Mask(d, m.spacing(), std::move(mo))};
}

std::pair<Volume, Mask> rotate(const Volume& v, const Mask& m, double angle_deg) {
  double c, s;
  const double quarter = angle_deg / 90.0;
  if (quarter == std::floor(quarter)) {
    const auto k = static_cast<int>(((static_cast<long long>(quarter) % 4) + 4) % 4);
    static constexpr std::array<double, 4> cos_q{1.0, 0.0, -1.0, 0.0};
    static constexpr std::array<double, 4> sin_q{0.0, 1.0, 0.0, -1.0};
    c = cos_q[static_cast<std::size_t>(k)];
    s = sin_q[static_cast<std::size_t>(k)];
  } else {
    const double rad = angle_deg * std::numbers::pi / 180.0;
    c = std::cos(rad);
    s = std::sin(rad);
  }
  const Dims& d = v.dims();
  const Spacing& sp = v.spacing();
  const double cx = 0.5 * static_cast<double>(d.nx - 1);
  const double cy = 0.5 * static_cast<double>(d.ny - 1);
  // Inverse rotation in physical (mm) coordinates.
  return resample(v, m, [&](std::int64_t x, std::int64_t y, std::int64_t z) -> Point {
    const double px = (static_cast<double>(x) - cx) * sp.sx;
    const double py = (static_cast<double>(y) - cy) * sp.sy;
    const double qx = c * px + s * py;
    const double qy = -s * px + c * py;
    return {cx + qx / sp.sx, cy + qy / sp.sy, static_cast<double>(z)};
  });
}

std::pair<Volume, Mask> perspective_scale(const Volume& v, const Mask& m, double scale, double perspective) {
  const Dims& d = v.dims();
  const double cx = 0.5 * static_cast<double>(d.nx - 1);
  const double cy = 0.5 * static_cast<double>(d.ny - 1);
  return resample(v, m, [&](std::int64_t x, std::int64_t y, std::int64_t z) -> Point {
    const double dy = static_cast<double>(y) - cy;
    const double sx = scale * (1.0 + perspective * dy / static_cast<double>(d.ny));
    return {cx + (static_cast<double>(x) - cx) / sx, cy + dy / scale, static_cast<double>(z)};
  });
}

// Catmull-Rom taps for a position t on a control axis of `g` points.
struct CubicTaps {
  std::array<int, 4> index{};
  std::array<double, 4> weight{};
};

CubicTaps cubic_taps(double t, int g) {
  CubicTaps taps;
  const int i = std::clamp(static_cast<int>(std::floor(t)), 0, g - 1);
  const double u = t - i;
  const double u2 = u * u;
  const double u3 = u2 * u;
  taps.weight = {-0.5 * u3 + u2 - 0.5 * u, 1.5 * u3 - 2.5 * u2 + 1.0, -1.5 * u3 + 2.0 * u2 + 0.5 * u,
                 0.5 * u3 - 0.5 * u2};
  for (int k = 0; k < 4; ++k) taps.index[static_cast<std::size_t>(k)] = std::clamp(i - 1 + k, 0, g - 1);
  return taps;
}

std::vector<CubicTaps> axis_taps(std::int64_t n, int g) {
  std::vector<CubicTaps> out;
  out.reserve(static_cast<std::size_t>(n));
  for (std::int64_t k = 0; k < n; ++k) {
    const double t = n > 1 ? static_cast<double>(k) * (g - 1) / static_cast<double>(n - 1) : 0.0;
    out.push_back(cubic_taps(t, g));
  }
  return out;
}

std::pair<Volume, Mask> elastic(const Volume& v, const Mask& m, double magnitude, int g, std::uint64_t seed) {
  if (magnitude == 0.0) return {v, m};
  const Dims& d = v.dims();
  const auto gs = static_cast<std::size_t>(g);
  // control[component][cz][cy][cx]
  std::array<std::vector<double>, 3> control;
  Rng rng(mix_seed(seed));
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (auto& comp : control) {
    comp.resize(gs * gs * gs);
    for (auto& c : comp) c = magnitude * unit(rng);
  }
  const auto tx = axis_taps(d.nx, g);
  const auto ty = axis_taps(d.ny, g);
  const auto tz = axis_taps(d.nz, g);

  // Expand along x once: ax[component][cz][cy][x].
  std::array<std::vector<double>, 3> ax;
  for (int c = 0; c < 3; ++c) {
    ax[c].assign(gs * gs * static_cast<std::size_t>(d.nx), 0.0);
    for (std::size_t cz = 0; cz < gs; ++cz) {
      for (std::size_t cy = 0; cy < gs; ++cy) {
        for (std::int64_t x = 0; x < d.nx; ++x) {
          double acc = 0.0;
          const auto& t = tx[static_cast<std::size_t>(x)];
          for (int k = 0; k < 4; ++k) acc += t.weight[k] * control[c][(cz * gs + cy) * gs + static_cast<std::size_t>(t.index[k])];
          ax[c][(cz * gs + cy) * static_cast<std::size_t>(d.nx) + static_cast<std::size_t>(x)] = acc;
        }
      }
    }
  }

  // Per z: expand along z to a (cy, x) plane; per y: expand along y.
  std::array<std::vector<double>, 3> plane;
  for (auto& p : plane) p.assign(gs * static_cast<std::size_t>(d.nx), 0.0);
  std::vector<Point> row(static_cast<std::size_t>(d.nx));
  std::vector<float> vo(d.voxel_count());
  std::vector<std::uint8_t> mo(d.voxel_count());
  const auto nx = static_cast<std::size_t>(d.nx);
  for (std::int64_t z = 0; z < d.nz; ++z) {
    const auto& t = tz[static_cast<std::size_t>(z)];
    for (int c = 0; c < 3; ++c) {
      for (std::size_t cy = 0; cy < gs; ++cy) {
        for (std::size_t x = 0; x < nx; ++x) {
          double acc = 0.0;
          for (int k = 0; k < 4; ++k) acc += t.weight[k] * ax[c][(static_cast<std::size_t>(t.index[k]) * gs + cy) * nx + x];
          plane[c][cy * nx + x] = acc;
        }
      }
    }
    for (std::int64_t y = 0; y < d.ny; ++y) {
      const auto& u = ty[static_cast<std::size_t>(y)];
      for (std::size_t x = 0; x < nx; ++x) {
        Point q{static_cast<double>(x), static_cast<double>(y), static_cast<double>(z)};
        for (int c = 0; c < 3; ++c) {
          double acc = 0.0;
          for (int k = 0; k < 4; ++k) acc += u.weight[k] * plane[c][static_cast<std::size_t>(u.index[k]) * nx + x];
          q[static_cast<std::size_t>(c)] += acc;
        }
        const std::size_t i = v.index(static_cast<std::int64_t>(x), y, z);
        vo[i] = sample_trilinear(v, q);
        mo[i] = sample_nearest(m, q);
      }
    }
  }
  Volume out_v(d, v.spacing(), v.type(), std::move(vo));
  if (v.type() != ScalarType::Float32) {
    const double top = v.type() == ScalarType::UInt8 ? 255.0 : 65535.0;
    for (auto& s : out_v.data()) s = store_value(s, v.type(), 0.0, top);
  }
  return {std::move(out_v), Mask(d, m.spacing(), std::move(mo))};
}

}  // namespace

std::pair<Volume, Mask> apply_augmentation(const Volume& volume, const Mask& mask, const AugmentationSpec& spec) {
  require_same_geometry(volume, mask);
  validate(spec);
  switch (spec.kind) {
    case AugmentationKind::Flip: return flip(volume, mask, spec.flip_axis);
    case AugmentationKind::Rotate:
      if (spec.angle_deg == 0.0) return {volume, mask};
      return rotate(volume, mask, spec.angle_deg);
    case AugmentationKind::PerspectiveScale:
      if (spec.scale == 1.0 && spec.perspective == 0.0) return {volume, mask};
      return perspective_scale(volume, mask, spec.scale, spec.perspective);
    case AugmentationKind::Elastic:
      return elastic(volume, mask, spec.magnitude, spec.control_points, spec.seed);
  }
  return {volume, mask};
}

// ---------------------------------------------------------------------------
// Config

std::vector<AugmentationSpec> parse_augmentation_config(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::InvalidSpec, std::string("augmentation config: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("transforms") || !doc["transforms"].is_array()) {
    throw Error(Errc::InvalidSpec, "augmentation config needs a 'transforms' array");
  }
  for (const auto& [key, _] : doc.items()) {
    if (key != "transforms") throw Error(Errc::InvalidSpec, "unknown key '" + key + "'");
  }
  static const std::set<std::string> allowed{"kind", "angle_deg", "magnitude", "control_points", "scale",
                                             "perspective", "axis", "seed"};
  std::vector<AugmentationSpec> specs;
  for (const auto& entry : doc["transforms"]) {
    if (!entry.is_object()) throw Error(Errc::InvalidSpec, "transform entries must be objects");
    for (const auto& [key, _] : entry.items()) {
      if (!allowed.contains(key)) throw Error(Errc::InvalidSpec, "unknown transform key '" + key + "'");
    }
    if (!entry.contains("kind") || !entry.contains("seed")) {
      throw Error(Errc::InvalidSpec, "every transform needs 'kind' and 'seed'");
    }
    try {
      AugmentationSpec s;
      const std::string kind = entry["kind"].get<std::string>();
      if (kind == "rotate") {
        s.kind = AugmentationKind::Rotate;
      } else if (kind == "elastic") {
        s.kind = AugmentationKind::Elastic;
      } else if (kind == "perspective-scale") {
        s.kind = AugmentationKind::PerspectiveScale;
      } else if (kind == "flip") {
        s.kind = AugmentationKind::Flip;
      } else {
        throw Error(Errc::InvalidSpec, "unknown transform kind '" + kind + "'");
      }
      s.seed = entry["seed"].get<std::uint64_t>();
      s.angle_deg = entry.value("angle_deg", s.angle_deg);
      s.magnitude = entry.value("magnitude", s.magnitude);
      s.control_points = entry.value("control_points", s.control_points);
      s.scale = entry.value("scale", s.scale);
      s.perspective = entry.value("perspective", s.perspective);
      const std::string axis = entry.value("axis", std::string("x"));
      if (axis == "x") {
        s.flip_axis = Axis::X;
      } else if (axis == "y") {
        s.flip_axis = Axis::Y;
      } else if (axis == "z") {
        s.flip_axis = Axis::Z;
      } else {
        throw Error(Errc::InvalidSpec, "flip axis must be x, y or z");
      }
      validate(s);
      specs.push_back(s);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::InvalidSpec, std::string("augmentation config: ") + e.what());
    }
  }
  return specs;
}

std::vector<AugmentationSpec> load_augmentation_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  const std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_augmentation_config(text);
}

// ---------------------------------------------------------------------------
// Schemes

AugmentationStream::AugmentationStream(const Volume& volume, const Mask& mask, std::vector<AugmentationSpec> specs,
                                       std::uint64_t base_seed)
    : volume_(&volume), mask_(&mask), specs_(std::move(specs)), base_seed_(base_seed) {
  if (volume.data().empty() || mask.bits().empty()) throw Error(Errc::NoBaseData, "no base scan registered");
  require_same_geometry(volume, mask);
  for (const auto& s : specs_) validate(s);
}

std::vector<AugmentationSpec> AugmentationStream::draw(std::uint64_t index) const {
  Rng rng(mix_seed(base_seed_ + index));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<AugmentationSpec> out;
  for (const auto& range : specs_) {
    AugmentationSpec s = range;
    switch (range.kind) {
      case AugmentationKind::Rotate:
        s.angle_deg = range.angle_deg * (2.0 * unit(rng) - 1.0);
        break;
      case AugmentationKind::Elastic:
        s.magnitude = range.magnitude * unit(rng);
        s.seed = range.seed ^ rng();
        break;
      case AugmentationKind::PerspectiveScale: {
        const double u = unit(rng);
        s.scale = 1.0 + (range.scale - 1.0) * u;
        s.perspective = range.perspective * (2.0 * unit(rng) - 1.0);
        break;
      }
      case AugmentationKind::Flip:
        if (unit(rng) < 0.5) continue;
        break;
    }
    out.push_back(s);
  }
  return out;
}

std::pair<Volume, Mask> AugmentationStream::variant(std::uint64_t index) const {
  std::pair<Volume, Mask> current{*volume_, *mask_};
  for (const auto& s : draw(index)) current = apply_augmentation(current.first, current.second, s);
  return current;
}

std::vector<std::pair<Volume, Mask>> materialize_augmentations(const Volume& volume, const Mask& mask,
                                                               const std::vector<AugmentationSpec>& specs,
                                                               std::uint64_t base_seed, std::size_t count,
                                                               unsigned jobs) {
  const AugmentationStream stream(volume, mask, specs, base_seed);
  std::vector<std::pair<Volume, Mask>> out(count);
  parallel_for(count, jobs, [&](std::size_t i) { out[i] = stream.variant(i); });
  return out;
}

}  // namespace segbench
