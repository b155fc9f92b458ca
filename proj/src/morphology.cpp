#include "segbench/morphology.hpp"

#include <algorithm>
#include <array>
#include <deque>
#include <string>

namespace segbench {
namespace {

// Dense copy of an axis-aligned box of a mask. Everything outside the box is
// treated as background by the operators below.
struct SubGrid {
  Extent3 lo{0, 0, 0};
  Dims dims{};
  std::vector<std::uint8_t> v;

  std::size_t index(std::int64_t x, std::int64_t y, std::int64_t z) const noexcept {
    return static_cast<std::size_t>(x + dims.nx * (y + dims.ny * z));
  }
};

SubGrid extract(const Mask& mask, const BoundingBox& box) {
  SubGrid g;
  g.lo = box.lo;
  g.dims = {box.extent(0), box.extent(1), box.extent(2)};
  g.v.assign(g.dims.voxel_count(), 0);
  for (std::int64_t z = 0; z < g.dims.nz; ++z) {
    for (std::int64_t y = 0; y < g.dims.ny; ++y) {
      const auto src = mask.bits().begin() + static_cast<std::ptrdiff_t>(mask.index(g.lo[0], g.lo[1] + y, g.lo[2] + z));
      std::copy_n(src, g.dims.nx, g.v.begin() + static_cast<std::ptrdiff_t>(g.index(0, y, z)));
    }
  }
  return g;
}

Mask insert(const SubGrid& g, const Mask& like) {
  Mask out(like.dims(), like.spacing());
  for (std::int64_t z = 0; z < g.dims.nz; ++z) {
    for (std::int64_t y = 0; y < g.dims.ny; ++y) {
      const auto src = g.v.begin() + static_cast<std::ptrdiff_t>(g.index(0, y, z));
      std::copy_n(src, g.dims.nx,
                  out.bits().begin() + static_cast<std::ptrdiff_t>(out.index(g.lo[0], g.lo[1] + y, g.lo[2] + z)));
    }
  }
  return out;
}

// Sliding any/all filter of half-width r along one axis; samples past the
// ends of a line are background.
void filter_lines(SubGrid& g, int axis, int r, bool dilate) {
  const std::int64_t n = g.dims[axis];
  const std::int64_t stride = axis == 0 ? 1 : axis == 1 ? g.dims.nx : g.dims.nx * g.dims.ny;
  const int a1 = axis == 0 ? 1 : 0;
  const int a2 = axis == 2 ? 1 : 2;
  std::vector<std::uint8_t> line(static_cast<std::size_t>(n));
  std::vector<std::int64_t> prefix(static_cast<std::size_t>(n) + 1);
  for (std::int64_t j = 0; j < g.dims[a2]; ++j) {
    for (std::int64_t i = 0; i < g.dims[a1]; ++i) {
      Extent3 c{0, 0, 0};
      c[a1] = i;
      c[a2] = j;
      const std::size_t base = g.index(c[0], c[1], c[2]);
      prefix[0] = 0;
      for (std::int64_t k = 0; k < n; ++k) {
        line[static_cast<std::size_t>(k)] = g.v[base + static_cast<std::size_t>(k * stride)];
        prefix[static_cast<std::size_t>(k) + 1] = prefix[static_cast<std::size_t>(k)] + line[static_cast<std::size_t>(k)];
      }
      for (std::int64_t k = 0; k < n; ++k) {
        const std::int64_t from = k - r;
        const std::int64_t to = k + r;  // inclusive
        const std::int64_t cf = std::max<std::int64_t>(from, 0);
        const std::int64_t ct = std::min<std::int64_t>(to, n - 1);
        const std::int64_t ones = prefix[static_cast<std::size_t>(ct) + 1] - prefix[static_cast<std::size_t>(cf)];
        std::uint8_t out;
        if (dilate) {
          out = ones > 0 ? 1 : 0;
        } else {
          out = (from >= 0 && to < n && ones == 2 * r + 1) ? 1 : 0;
        }
        g.v[base + static_cast<std::size_t>(k * stride)] = out;
      }
    }
  }
}

void cross_step(SubGrid& g, bool dilate) {
  const std::vector<std::uint8_t> src = g.v;
  const Dims& d = g.dims;
  for (std::int64_t z = 0; z < d.nz; ++z) {
    for (std::int64_t y = 0; y < d.ny; ++y) {
      for (std::int64_t x = 0; x < d.nx; ++x) {
        auto at = [&](std::int64_t xx, std::int64_t yy, std::int64_t zz) -> std::uint8_t {
          if (!d.contains(xx, yy, zz)) return 0;
          return src[g.index(xx, yy, zz)];
        };
        const std::uint8_t c = at(x, y, z);
        const std::array<std::uint8_t, 6> nb{at(x - 1, y, z), at(x + 1, y, z), at(x, y - 1, z),
                                             at(x, y + 1, z), at(x, y, z - 1), at(x, y, z + 1)};
        std::uint8_t out;
        if (dilate) {
          out = c;
          for (auto b : nb) out |= b;
        } else {
          out = c;
          for (auto b : nb) out &= b;
        }
        g.v[g.index(x, y, z)] = out;
      }
    }
  }
}

void check_radius(const StructuringElement& se) {
  if (se.radius < 1) throw Error(Errc::InvalidArgument, "structuring element radius must be >= 1");
}

Mask morph(const Mask& mask, const StructuringElement& se, bool dilate) {
  check_radius(se);
  const BoundingBox box = bounding_box(mask);
  if (!box.valid) return Mask(mask.dims(), mask.spacing());
  // Dilation can only reach r voxels past the foreground box; erosion never
  // leaves it.
  SubGrid g = extract(mask, dilate ? box.grown(se.radius, mask.dims()) : box);
  if (se.shape == StructuringShape::Cube) {
    for (int axis = 0; axis < 3; ++axis) filter_lines(g, axis, se.radius, dilate);
  } else {
    for (int step = 0; step < se.radius; ++step) cross_step(g, dilate);
  }
  return insert(g, mask);
}

}  // namespace

ComponentLabels label_components(const Mask& mask, Connectivity connectivity) {
  const Dims& d = mask.dims();
  ComponentLabels out;
  out.labels.assign(d.voxel_count(), 0);

  std::vector<Extent3> offsets;
  for (std::int64_t dz = -1; dz <= 1; ++dz) {
    for (std::int64_t dy = -1; dy <= 1; ++dy) {
      for (std::int64_t dx = -1; dx <= 1; ++dx) {
        const auto manhattan = std::abs(dx) + std::abs(dy) + std::abs(dz);
        if (manhattan == 0) continue;
        if (connectivity == Connectivity::Six && manhattan != 1) continue;
        offsets.push_back({dx, dy, dz});
      }
    }
  }

  const auto bits = mask.bits();
  std::deque<std::size_t> queue;
  std::uint32_t next_id = 0;
  for (std::size_t seed = 0; seed < bits.size(); ++seed) {
    if (!bits[seed] || out.labels[seed] != 0) continue;
    const std::uint32_t id = ++next_id;
    std::size_t size = 0;
    out.labels[seed] = id;
    queue.push_back(seed);
    while (!queue.empty()) {
      const std::size_t cur = queue.front();
      queue.pop_front();
      ++size;
      const VoxelIndex p = unravel(d, cur);
      for (const auto& o : offsets) {
        const std::int64_t x = p.x + o[0], y = p.y + o[1], z = p.z + o[2];
        if (!d.contains(x, y, z)) continue;
        const std::size_t nb = mask.index(x, y, z);
        if (bits[nb] && out.labels[nb] == 0) {
          out.labels[nb] = id;
          queue.push_back(nb);
        }
      }
    }
    out.sizes.push_back(size);
  }
  return out;
}

std::size_t component_count(const Mask& mask, Connectivity connectivity) {
  return label_components(mask, connectivity).sizes.size();
}

Mask largest_component(const Mask& mask, Connectivity connectivity) {
  const BoundingBox box = bounding_box(mask);
  if (!box.valid) return Mask(mask.dims(), mask.spacing());
  // Label inside the foreground box only; sub-box linear order agrees with
  // full-grid linear order, so the tie rule carries over.
  const SubGrid g = extract(mask, box);
  const Mask local(g.dims, mask.spacing(), g.v);
  const ComponentLabels cl = label_components(local, connectivity);
  std::uint32_t best = 0;
  std::size_t best_size = 0;
  for (std::size_t i = 0; i < cl.sizes.size(); ++i) {
    if (cl.sizes[i] > best_size) {
      best_size = cl.sizes[i];
      best = static_cast<std::uint32_t>(i + 1);
    }
  }
  SubGrid kept = g;
  for (std::size_t i = 0; i < kept.v.size(); ++i) kept.v[i] = cl.labels[i] == best ? 1 : 0;
  return insert(kept, mask);
}

Mask dilate(const Mask& mask, const StructuringElement& se) { return morph(mask, se, true); }

Mask erode(const Mask& mask, const StructuringElement& se) { return morph(mask, se, false); }

// The dilation is computed on a grid padded by the radius so the following
// erosion never sees the artificial border; closing stays extensive.
Mask closing(const Mask& mask, const StructuringElement& se) {
  if (se.radius < 1) throw Error(Errc::InvalidArgument, "structuring element radius must be >= 1");
  const Dims& d = mask.dims();
  const std::int64_t r = se.radius;
  const Dims pd{d.nx + 2 * r, d.ny + 2 * r, d.nz + 2 * r};
  Mask padded(pd, mask.spacing());
  for (std::int64_t z = 0; z < d.nz; ++z) {
    for (std::int64_t y = 0; y < d.ny; ++y) {
      std::copy_n(mask.bits().begin() + static_cast<std::ptrdiff_t>(mask.index(0, y, z)), d.nx,
                  padded.bits().begin() + static_cast<std::ptrdiff_t>(padded.index(r, y + r, z + r)));
    }
  }
  const Mask closed = erode(dilate(padded, se), se);
  Mask out(d, mask.spacing());
  for (std::int64_t z = 0; z < d.nz; ++z) {
    for (std::int64_t y = 0; y < d.ny; ++y) {
      std::copy_n(closed.bits().begin() + static_cast<std::ptrdiff_t>(closed.index(r, y + r, z + r)), d.nx,
                  out.bits().begin() + static_cast<std::ptrdiff_t>(out.index(0, y, z)));
    }
  }
  return out;
}

Mask opening(const Mask& mask, const StructuringElement& se) { return dilate(erode(mask, se), se); }

Mask smooth_surface(const Mask& mask, int iterations) {
  if (iterations < 1) throw Error(Errc::InvalidArgument, "smoothing iterations must be >= 1");
  Mask current = mask;
  const Dims& full = mask.dims();
  for (int it = 0; it < iterations; ++it) {
    const BoundingBox box = bounding_box(current);
    if (!box.valid) break;
    SubGrid g = extract(current, box.grown(1, full));
    const std::vector<std::uint8_t> before = g.v;

    // 3x3x3 foreground counts via three separable 3-tap sums.
    std::vector<std::uint8_t> sums(g.v.begin(), g.v.end());
    for (int axis = 0; axis < 3; ++axis) {
      const std::vector<std::uint8_t> src = sums;
      const std::int64_t stride = axis == 0 ? 1 : axis == 1 ? g.dims.nx : g.dims.nx * g.dims.ny;
      for (std::int64_t z = 0; z < g.dims.nz; ++z) {
        for (std::int64_t y = 0; y < g.dims.ny; ++y) {
          for (std::int64_t x = 0; x < g.dims.nx; ++x) {
            const Extent3 c{x, y, z};
            const std::size_t i = g.index(x, y, z);
            std::uint8_t s = src[i];
            if (c[axis] > 0) s = static_cast<std::uint8_t>(s + src[i - static_cast<std::size_t>(stride)]);
            if (c[axis] + 1 < g.dims[axis]) s = static_cast<std::uint8_t>(s + src[i + static_cast<std::size_t>(stride)]);
            sums[i] = s;
          }
        }
      }
    }

    auto in_grid = [&](int axis, std::int64_t k) -> int {
      return 1 + (k > 0 ? 1 : 0) + (k + 1 < full[axis] ? 1 : 0);
    };
    for (std::int64_t z = 0; z < g.dims.nz; ++z) {
      const int cz = in_grid(2, g.lo[2] + z);
      for (std::int64_t y = 0; y < g.dims.ny; ++y) {
        const int cy = in_grid(1, g.lo[1] + y);
        for (std::int64_t x = 0; x < g.dims.nx; ++x) {
          const int n = in_grid(0, g.lo[0] + x) * cy * cz;
          const std::size_t i = g.index(x, y, z);
          const int fg = sums[i];
          if (2 * fg > n) {
            g.v[i] = 1;
          } else if (2 * fg < n) {
            g.v[i] = 0;
          } else {
            g.v[i] = before[i];
          }
        }
      }
    }
    current = insert(g, current);
  }
  return current;
}

}  // namespace segbench
