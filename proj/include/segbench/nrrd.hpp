#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "segbench/grid.hpp"

namespace segbench {

// Attached-header NRRD subset: 3-D grids, uint8/uint16/float samples,
// raw or gzip encoding, little-endian payloads, geometry from `spacings:`
// or diagonal `space directions:`. Unrecognised fields are ignored.

enum class Encoding { Raw, Gzip };

struct NrrdReadOptions {
  /// Overrides mask detection. Unset: a file is a Mask iff its type is 8-bit
  /// and every sample is 0 or 1. true: any nonzero sample becomes foreground.
  std::optional<bool> as_mask;
};

using Grid = std::variant<Volume, Mask>;

/// Parsed header fields, exposed for tooling and tests.
struct NrrdHeader {
  int version = 0;
  ScalarType type = ScalarType::UInt8;
  Dims dims{};
  Spacing spacing{};
  Encoding encoding = Encoding::Raw;
};

Grid decode_nrrd(std::string_view bytes, const NrrdReadOptions& options = {});
NrrdHeader decode_nrrd_header(std::string_view bytes);

std::string encode_nrrd(const Volume& volume, Encoding encoding = Encoding::Raw);
std::string encode_nrrd(const Mask& mask, Encoding encoding = Encoding::Raw);

Grid read_nrrd(const std::filesystem::path& path, const NrrdReadOptions& options = {});
Volume read_volume(const std::filesystem::path& path);
Mask read_mask(const std::filesystem::path& path);

void write_nrrd(const Volume& volume, const std::filesystem::path& path, Encoding encoding = Encoding::Raw);
void write_nrrd(const Mask& mask, const std::filesystem::path& path, Encoding encoding = Encoding::Raw);

std::string format_shortest(double value);

}  // namespace segbench
