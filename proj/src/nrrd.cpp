#include "segbench/nrrd.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <vector>

namespace segbench {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

double parse_double(std::string_view token, std::string_view field) {
  token = trim(token);
  if (token == "nan" || token == "NaN") return std::nan("");
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw Error(Errc::ParseFailure, "bad number '" + std::string(token) + "' in field " + std::string(field));
  }
  return value;
}

std::int64_t parse_int(std::string_view token, std::string_view field) {
  token = trim(token);
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw Error(Errc::ParseFailure, "bad integer '" + std::string(token) + "' in field " + std::string(field));
  }
  return value;
}

std::optional<ScalarType> parse_type(std::string_view t) {
  static const std::map<std::string_view, ScalarType> names{
      {"uchar", ScalarType::UInt8},           {"unsigned char", ScalarType::UInt8},
      {"uint8", ScalarType::UInt8},           {"uint8_t", ScalarType::UInt8},
      {"ushort", ScalarType::UInt16},         {"unsigned short", ScalarType::UInt16},
      {"unsigned short int", ScalarType::UInt16}, {"uint16", ScalarType::UInt16},
      {"uint16_t", ScalarType::UInt16},       {"float", ScalarType::Float32},
  };
  auto it = names.find(t);
  if (it == names.end()) return std::nullopt;
  return it->second;
}

std::string_view type_name(ScalarType t) {
  switch (t) {
    case ScalarType::UInt8: return "uint8";
    case ScalarType::UInt16: return "uint16";
    case ScalarType::Float32: return "float";
  }
  return "uint8";
}

// "(a,b,c) (d,e,f) (g,h,i)" -> diagonal magnitudes; rejects off-diagonal terms.
Spacing parse_space_directions(std::string_view value) {
  std::vector<std::array<double, 3>> vectors;
  std::size_t i = 0;
  while (i < value.size()) {
    const auto open = value.find('(', i);
    if (open == std::string_view::npos) break;
    const auto close = value.find(')', open);
    if (close == std::string_view::npos) throw Error(Errc::ParseFailure, "unterminated space direction");
    std::string_view inner = value.substr(open + 1, close - open - 1);
    std::array<double, 3> v{};
    int k = 0;
    std::size_t start = 0;
    while (start <= inner.size()) {
      auto comma = inner.find(',', start);
      if (comma == std::string_view::npos) comma = inner.size();
      if (k >= 3) throw Error(Errc::UnsupportedFormat, "space direction with more than 3 components");
      v[k++] = parse_double(inner.substr(start, comma - start), "space directions");
      start = comma + 1;
    }
    if (k != 3) throw Error(Errc::UnsupportedFormat, "space direction must have 3 components");
    vectors.push_back(v);
    i = close + 1;
  }
  if (vectors.size() != 3) throw Error(Errc::UnsupportedFormat, "expected 3 space direction vectors");
  std::array<double, 3> diag{};
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      if (a != b && vectors[a][b] != 0.0) {
        throw Error(Errc::UnsupportedFormat, "non-diagonal space directions are not supported");
      }
    }
    diag[a] = std::abs(vectors[a][a]);
  }
  return {diag[0], diag[1], diag[2]};
}

struct ParsedHeader {
  NrrdHeader header;
  std::size_t payload_offset = 0;
};

ParsedHeader parse_header(std::string_view bytes) {
  if (bytes.size() < 8 || bytes.substr(0, 7) != "NRRD000" || bytes[7] < '1' || bytes[7] > '5') {
    throw Error(Errc::BadMagic, "missing NRRD000N magic");
  }
  ParsedHeader out;
  out.header.version = bytes[7] - '0';

  std::size_t pos = bytes.find('\n');
  if (pos == std::string_view::npos) throw Error(Errc::MissingHeaderField, "header has no fields");
  ++pos;

  std::map<std::string, std::string, std::less<>> fields;
  bool terminated = false;
  while (pos < bytes.size()) {
    const auto eol = bytes.find('\n', pos);
    const std::string_view raw_line =
        bytes.substr(pos, (eol == std::string_view::npos ? bytes.size() : eol) - pos);
    pos = eol == std::string_view::npos ? bytes.size() : eol + 1;
    const std::string_view line = trim(raw_line);
    if (line.empty()) {
      terminated = true;
      break;
    }
    if (line.front() == '#') continue;
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) continue;
    if (colon + 1 < line.size() && line[colon + 1] == '=') continue;  // key/value pair
    std::string key(trim(line.substr(0, colon)));
    std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
    fields[key] = std::string(trim(line.substr(colon + 1)));
  }
  if (!terminated) throw Error(Errc::MissingHeaderField, "header is not terminated by a blank line");
  out.payload_offset = pos;

  auto require = [&](std::string_view key) -> const std::string& {
    auto it = fields.find(key);
    if (it == fields.end()) throw Error(Errc::MissingHeaderField, std::string(key));
    return it->second;
  };

  const auto type = parse_type(require("type"));
  if (!type) throw Error(Errc::UnsupportedFormat, "sample type '" + fields["type"] + "'");
  out.header.type = *type;

  if (parse_int(require("dimension"), "dimension") != 3) {
    throw Error(Errc::UnsupportedFormat, "only 3-D grids are supported");
  }
  const auto sizes = split_ws(require("sizes"));
  if (sizes.size() != 3) throw Error(Errc::DimensionMismatch, "sizes must list 3 values");
  out.header.dims = {parse_int(sizes[0], "sizes"), parse_int(sizes[1], "sizes"), parse_int(sizes[2], "sizes")};
  if (out.header.dims.nx <= 0 || out.header.dims.ny <= 0 || out.header.dims.nz <= 0) {
    throw Error(Errc::DimensionMismatch, "sizes must be positive");
  }

  std::string encoding = require("encoding");
  if (encoding == "raw") {
    out.header.encoding = Encoding::Raw;
  } else if (encoding == "gzip" || encoding == "gz") {
    out.header.encoding = Encoding::Gzip;
  } else {
    throw Error(Errc::UnsupportedEncoding, encoding);
  }

  if (fields.contains("data file") || fields.contains("datafile")) {
    throw Error(Errc::UnsupportedFormat, "detached headers are not supported");
  }
  if (auto it = fields.find("endian"); it != fields.end() && it->second == "big" && scalar_size(*type) > 1) {
    throw Error(Errc::UnsupportedFormat, "big-endian payloads are not supported");
  }

  if (auto it = fields.find("spacings"); it != fields.end()) {
    const auto parts = split_ws(it->second);
    if (parts.size() != 3) throw Error(Errc::DimensionMismatch, "spacings must list 3 values");
    out.header.spacing = {parse_double(parts[0], "spacings"), parse_double(parts[1], "spacings"),
                          parse_double(parts[2], "spacings")};
  } else if (auto sd = fields.find("space directions"); sd != fields.end()) {
    out.header.spacing = parse_space_directions(sd->second);
  }
  for (int a = 0; a < 3; ++a) {
    const double s = out.header.spacing[a];
    if (!std::isfinite(s) || s <= 0.0) throw Error(Errc::NonPositiveSpacing, "spacing must be positive");
  }
  return out;
}

std::string gunzip(std::string_view compressed, std::size_t expected) {
  std::string out(expected, '\0');
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 32) != Z_OK) throw Error(Errc::IoFailure, "inflateInit2 failed");
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(compressed.data()));
  zs.avail_in = static_cast<uInt>(compressed.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(expected);
  const int rc = inflate(&zs, Z_FINISH);
  const std::size_t produced = expected - zs.avail_out;
  inflateEnd(&zs);
  if (rc == Z_STREAM_END && produced == expected) return out;
  if (rc == Z_STREAM_END || rc == Z_BUF_ERROR || rc == Z_OK) {
    throw Error(Errc::DimensionMismatch, "gzip payload size differs from header-implied size");
  }
  throw Error(Errc::IoFailure, "corrupt gzip payload");
}

std::string gzip(std::string_view raw) {
  z_stream zs{};
  if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, 15 + 16, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
    throw Error(Errc::IoFailure, "deflateInit2 failed");
  }
  std::string out;
  out.resize(deflateBound(&zs, static_cast<uLong>(raw.size())) + 64);
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(raw.data()));
  zs.avail_in = static_cast<uInt>(raw.size());
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = deflate(&zs, Z_FINISH);
  const std::size_t produced = zs.total_out;
  deflateEnd(&zs);
  if (rc != Z_STREAM_END) throw Error(Errc::IoFailure, "deflate failed");
  out.resize(produced);
  return out;
}

template <typename T>
T load_le(const char* p) {
  T value;
  std::memcpy(&value, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    auto* b = reinterpret_cast<unsigned char*>(&value);
    std::reverse(b, b + sizeof(T));
  }
  return value;
}

template <typename T>
void store_le(char* p, T value) {
  if constexpr (std::endian::native == std::endian::big && sizeof(T) > 1) {
    auto* b = reinterpret_cast<unsigned char*>(&value);
    std::reverse(b, b + sizeof(T));
  }
  std::memcpy(p, &value, sizeof(T));
}

std::string header_text(ScalarType type, const Dims& d, const Spacing& s, Encoding encoding) {
  std::ostringstream h;
  h << "NRRD0004\n";
  h << "# Complete NRRD file format specification at:\n";
  h << "# http://teem.sourceforge.net/nrrd/format.html\n";
  h << "type: " << type_name(type) << "\n";
  h << "dimension: 3\n";
  h << "sizes: " << d.nx << ' ' << d.ny << ' ' << d.nz << "\n";
  h << "spacings: " << format_shortest(s.sx) << ' ' << format_shortest(s.sy) << ' ' << format_shortest(s.sz)
    << "\n";
  h << "endian: little\n";
  h << "encoding: " << (encoding == Encoding::Gzip ? "gzip" : "raw") << "\n";
  h << "\n";
  return h.str();
}

std::string finish(std::string header, std::string payload, Encoding encoding) {
  if (encoding == Encoding::Gzip) payload = gzip(payload);
  header += payload;
  return header;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoFailure, "cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(Errc::IoFailure, "read error on " + path.string());
  return bytes;
}

void spit(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoFailure, "cannot create " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) throw Error(Errc::IoFailure, "write error on " + path.string());
}

}  // namespace

std::string format_shortest(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

NrrdHeader decode_nrrd_header(std::string_view bytes) { return parse_header(bytes).header; }

Grid decode_nrrd(std::string_view bytes, const NrrdReadOptions& options) {
  const ParsedHeader parsed = parse_header(bytes);
  const NrrdHeader& h = parsed.header;
  const std::size_t count = h.dims.voxel_count();
  const std::size_t elem = scalar_size(h.type);
  const std::size_t expected = count * elem;

  std::string_view payload = bytes.substr(parsed.payload_offset);
  std::string inflated;
  if (h.encoding == Encoding::Gzip) {
    inflated = gunzip(payload, expected);
    payload = inflated;
  }
  if (payload.size() != expected) {
    throw Error(Errc::DimensionMismatch, "payload has " + std::to_string(payload.size()) + " bytes, header implies " +
                                             std::to_string(expected));
  }

  std::vector<float> samples(count);
  const char* p = payload.data();
  switch (h.type) {
    case ScalarType::UInt8:
      for (std::size_t i = 0; i < count; ++i) samples[i] = static_cast<unsigned char>(p[i]);
      break;
    case ScalarType::UInt16:
      for (std::size_t i = 0; i < count; ++i) samples[i] = load_le<std::uint16_t>(p + 2 * i);
      break;
    case ScalarType::Float32:
      for (std::size_t i = 0; i < count; ++i) samples[i] = load_le<float>(p + 4 * i);
      break;
  }

  bool as_mask = false;
  if (options.as_mask) {
    as_mask = *options.as_mask;
  } else if (h.type == ScalarType::UInt8) {
    as_mask = std::all_of(samples.begin(), samples.end(), [](float v) { return v == 0.0f || v == 1.0f; });
  }
  if (as_mask) {
    std::vector<std::uint8_t> bits(count);
    for (std::size_t i = 0; i < count; ++i) bits[i] = samples[i] != 0.0f ? 1 : 0;
    return Mask(h.dims, h.spacing, std::move(bits));
  }
  return Volume(h.dims, h.spacing, h.type, std::move(samples));
}

std::string encode_nrrd(const Volume& volume, Encoding encoding) {
  const auto data = volume.data();
  const std::size_t elem = scalar_size(volume.type());
  std::string payload(data.size() * elem, '\0');
  char* p = payload.data();
  switch (volume.type()) {
    case ScalarType::UInt8:
      for (std::size_t i = 0; i < data.size(); ++i) {
        p[i] = static_cast<char>(static_cast<unsigned char>(std::clamp(std::nearbyint(data[i]), 0.0f, 255.0f)));
      }
      break;
    case ScalarType::UInt16:
      for (std::size_t i = 0; i < data.size(); ++i) {
        store_le<std::uint16_t>(p + 2 * i,
                                static_cast<std::uint16_t>(std::clamp(std::nearbyint(data[i]), 0.0f, 65535.0f)));
      }
      break;
    case ScalarType::Float32:
      for (std::size_t i = 0; i < data.size(); ++i) store_le<float>(p + 4 * i, data[i]);
      break;
  }
  return finish(header_text(volume.type(), volume.dims(), volume.spacing(), encoding), std::move(payload), encoding);
}

std::string encode_nrrd(const Mask& mask, Encoding encoding) {
  const auto bits = mask.bits();
  std::string payload(bits.begin(), bits.end());
  return finish(header_text(ScalarType::UInt8, mask.dims(), mask.spacing(), encoding), std::move(payload), encoding);
}

Grid read_nrrd(const std::filesystem::path& path, const NrrdReadOptions& options) {
  return decode_nrrd(slurp(path), options);
}

Volume read_volume(const std::filesystem::path& path) {
  return std::get<Volume>(read_nrrd(path, NrrdReadOptions{.as_mask = false}));
}

Mask read_mask(const std::filesystem::path& path) {
  return std::get<Mask>(read_nrrd(path, NrrdReadOptions{.as_mask = true}));
}

void write_nrrd(const Volume& volume, const std::filesystem::path& path, Encoding encoding) {
  spit(path, encode_nrrd(volume, encoding));
}

void write_nrrd(const Mask& mask, const std::filesystem::path& path, Encoding encoding) {
  spit(path, encode_nrrd(mask, encoding));
}

}  // namespace segbench
