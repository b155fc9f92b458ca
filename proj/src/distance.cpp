#include "segbench/distance.hpp"

#include <cmath>
#include <limits>

namespace segbench {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// One-dimensional squared distance transform of a sampled function:
// out[q] = min_p f[p] + w2 * (q - p)^2, over sites with finite f.
class Envelope1D {
 public:
  explicit Envelope1D(std::size_t n) : sites_(n), bounds_(n + 1) {}

  void run(const double* f, double* out, std::size_t n, double w2) {
    std::ptrdiff_t k = -1;
    for (std::size_t q = 0; q < n; ++q) {
      if (!std::isfinite(f[q])) continue;
      double s = -kInf;
      while (k >= 0) {
        const std::size_t p = sites_[static_cast<std::size_t>(k)];
        const double dq = static_cast<double>(q);
        const double dp = static_cast<double>(p);
        s = ((f[q] - f[p]) / w2 + (dq * dq - dp * dp)) / (2.0 * (dq - dp));
        if (s <= bounds_[static_cast<std::size_t>(k)]) {
          --k;
        } else {
          break;
        }
      }
      ++k;
      sites_[static_cast<std::size_t>(k)] = q;
      bounds_[static_cast<std::size_t>(k)] = k == 0 ? -kInf : s;
      bounds_[static_cast<std::size_t>(k) + 1] = kInf;
    }
    if (k < 0) {
      for (std::size_t q = 0; q < n; ++q) out[q] = kInf;
      return;
    }
    std::size_t j = 0;
    for (std::size_t q = 0; q < n; ++q) {
      while (bounds_[j + 1] < static_cast<double>(q)) ++j;
      const std::size_t p = sites_[j];
      const double delta = static_cast<double>(q) - static_cast<double>(p);
      out[q] = f[p] + w2 * delta * delta;
    }
  }

 private:
  std::vector<std::size_t> sites_;
  std::vector<double> bounds_;
};

void pass(std::vector<double>& grid, const Dims& d, int axis, double spacing) {
  const auto n = static_cast<std::size_t>(d[axis]);
  const std::size_t stride = axis == 0 ? 1 : axis == 1 ? static_cast<std::size_t>(d.nx) : d.slice_size();
  const int a1 = axis == 0 ? 1 : 0;
  const int a2 = axis == 2 ? 1 : 2;
  const double w2 = spacing * spacing;
  Envelope1D env(n);
  std::vector<double> in(n), out(n);
  for (std::int64_t j = 0; j < d[a2]; ++j) {
    for (std::int64_t i = 0; i < d[a1]; ++i) {
      Extent3 c{0, 0, 0};
      c[a1] = i;
      c[a2] = j;
      const auto base = static_cast<std::size_t>(c[0] + d.nx * (c[1] + d.ny * c[2]));
      for (std::size_t k = 0; k < n; ++k) in[k] = grid[base + k * stride];
      env.run(in.data(), out.data(), n, w2);
      for (std::size_t k = 0; k < n; ++k) grid[base + k * stride] = out[k];
    }
  }
}

}  // namespace

std::vector<double> squared_edt(std::span<const std::uint8_t> features, const Dims& dims, const Spacing& spacing) {
  if (features.size() != dims.voxel_count()) {
    throw Error(Errc::DimensionMismatch, "feature grid length does not match dims");
  }
  std::vector<double> grid(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) grid[i] = features[i] ? 0.0 : kInf;
  pass(grid, dims, 0, spacing.sx);
  pass(grid, dims, 1, spacing.sy);
  pass(grid, dims, 2, spacing.sz);
  return grid;
}

}  // namespace segbench
