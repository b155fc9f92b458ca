#include <filesystem>
#include <random>

#include "doctest.h"
#include "segbench/grid.hpp"
#include "segbench/nrrd.hpp"

using namespace segbench;

namespace {

std::string header(const std::string& body) { return "NRRD0004\n" + body + "\n"; }

std::string raw_u16(std::size_t n, std::uint16_t value) {
  std::string s(n * 2, '\0');
  for (std::size_t i = 0; i < n; ++i) {
    s[2 * i] = static_cast<char>(value & 0xff);
    s[2 * i + 1] = static_cast<char>(value >> 8);
  }
  return s;
}

}  // namespace

TEST_CASE("addressing is x-fastest") {
  Volume v({3, 4, 5}, {1, 1, 1});
  for (std::int64_t z = 0; z < 5; ++z)
    for (std::int64_t y = 0; y < 4; ++y)
      for (std::int64_t x = 0; x < 3; ++x) v.at(x, y, z) = static_cast<float>(x + 10 * y + 100 * z);
  const auto d = v.data();
  CHECK(d[1] == 1.0f);
  CHECK(d[3] == 10.0f);
  CHECK(d[12] == 100.0f);
  CHECK(d[2 + 3 * 3 + 4 * 12] == 432.0f);
  const VoxelIndex p = unravel(v.dims(), 2 + 3 * 3 + 4 * 12);
  CHECK(p == VoxelIndex{2, 3, 4});
}

TEST_CASE("geometry validation") {
  CHECK_THROWS_AS(validate_geometry({0, 1, 1}, {1, 1, 1}), Error);
  try {
    validate_geometry({1, 1, 1}, {1, -1, 1});
    FAIL("expected NonPositiveSpacing");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NonPositiveSpacing);
  }
  CHECK_THROWS_AS(Volume({2, 2, 2}, {1, 1, 1}, ScalarType::Float32, std::vector<float>(7)), Error);
}

TEST_CASE("downsample") {
  Volume v({4, 4, 4}, {0.5, 0.5, 0.5});
  for (auto& s : v.data()) s = 7.0f;
  CHECK(downsample(v, {1, 1, 1}) == v);
  const Volume half = downsample(v, {2, 2, 2});
  CHECK(half.dims() == Dims{2, 2, 2});
  CHECK(half.spacing() == Spacing{1, 1, 1});
  for (float s : half.data()) CHECK(s == 7.0f);

  Volume pair({2, 1, 1}, {1, 1, 1}, ScalarType::Float32, {10.0f, 30.0f});
  const Volume one = downsample(pair, {2, 1, 1});
  REQUIRE(one.dims() == Dims{1, 1, 1});
  CHECK(one.data()[0] == 20.0f);

  Volume odd({5, 1, 1}, {1, 1, 1}, ScalarType::Float32, {1, 2, 3, 4, 5});
  const Volume o = downsample(odd, {2, 1, 1});
  REQUIRE(o.dims().nx == 3);
  CHECK(o.data()[2] == 5.0f);

  try {
    downsample(pair, {3, 1, 1});
    FAIL("expected FactorExceedsDim");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::FactorExceedsDim);
  }
}

TEST_CASE("read the challenge geometry from a 16-bit header") {
  const std::size_t n = 576u * 576u * 88u;
  const std::string file =
      header("type: unsigned short\ndimension: 3\nsizes: 576 576 88\nspacings: 0.625 0.625 0.625\nendian: little\nencoding: raw\n") +
      raw_u16(n, 513);
  const Grid g = decode_nrrd(file);
  REQUIRE(std::holds_alternative<Volume>(g));
  const Volume& v = std::get<Volume>(g);
  CHECK(v.dims() == Dims{576, 576, 88});
  CHECK(v.spacing() == Spacing{0.625, 0.625, 0.625});
  CHECK(v.type() == ScalarType::UInt16);
  CHECK(v.data()[n - 1] == 513.0f);
}

TEST_CASE("minimal grid") {
  const std::string file = header("type: uint16\ndimension: 3\nsizes: 1 1 1\nencoding: raw\n") + raw_u16(1, 0);
  const Grid g = decode_nrrd(file);
  REQUIRE(std::holds_alternative<Volume>(g));
  CHECK(std::get<Volume>(g).data()[0] == 0.0f);
  CHECK(std::get<Volume>(g).spacing() == Spacing{1, 1, 1});
}

TEST_CASE("space directions give the spacing") {
  const std::string file =
      header("type: uchar\ndimension: 3\nsizes: 2 1 1\nspace: left-posterior-superior\n"
             "space directions: (0.625,0,0) (0,-0.625,0) (0,0,2.5)\nencoding: raw\n") +
      std::string("\x00\x01", 2);
  const Grid g = decode_nrrd(file);
  REQUIRE(std::holds_alternative<Mask>(g));
  CHECK(std::get<Mask>(g).spacing() == Spacing{0.625, 0.625, 2.5});
}

TEST_CASE("header errors") {
  auto code_of = [](const std::string& text) {
    try {
      decode_nrrd(text);
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::InvalidArgument;
  };
  CHECK(code_of("NRRX0004\n") == Errc::BadMagic);
  CHECK(code_of(header("type: uchar\ndimension: 3\nsizes: 1 1 1\nencoding: bzip2\n") + "x") == Errc::UnsupportedEncoding);
  CHECK(code_of(header("type: uchar\ndimension: 3\nencoding: raw\n") + "x") == Errc::MissingHeaderField);
  CHECK(code_of(header("dimension: 3\nsizes: 1 1 1\nencoding: raw\n") + "x") == Errc::MissingHeaderField);
  CHECK(code_of(header("type: uchar\ndimension: 3\nsizes: 2 2 2\nencoding: raw\n") + "xyz") == Errc::DimensionMismatch);
  CHECK(code_of(header("type: uchar\ndimension: 3\nsizes: 1 1 1\nspacings: 1 0 1\nencoding: raw\n") + "x") ==
        Errc::NonPositiveSpacing);
  CHECK(code_of(header("type: ushort\ndimension: 3\nsizes: 1 1 1\nendian: big\nencoding: raw\n") + "xx") ==
        Errc::UnsupportedFormat);
}

TEST_CASE("mask detection and override") {
  Mask m({2, 2, 1}, {1, 1, 1}, {0, 1, 1, 0});
  const std::string bytes = encode_nrrd(m);
  CHECK(std::holds_alternative<Mask>(decode_nrrd(bytes)));
  CHECK(std::holds_alternative<Volume>(decode_nrrd(bytes, {false})));

  Volume v({2, 1, 1}, {1, 1, 1}, ScalarType::UInt8, {0.0f, 5.0f});
  const std::string vb = encode_nrrd(v);
  CHECK(std::holds_alternative<Volume>(decode_nrrd(vb)));
  const Grid forced = decode_nrrd(vb, {true});
  REQUIRE(std::holds_alternative<Mask>(forced));
  CHECK(std::get<Mask>(forced).count() == 1);
}

TEST_CASE("empty mask payload is all zero bytes") {
  const Mask m({4, 4, 4}, {1, 1, 1});
  const std::string bytes = encode_nrrd(m);
  const auto blank = bytes.find("\n\n");
  REQUIRE(blank != std::string::npos);
  const std::string payload = bytes.substr(blank + 2);
  CHECK(payload == std::string(64, '\0'));
}

TEST_CASE("written headers carry the literal spacing triple") {
  const Volume v({2, 2, 2}, {0.625, 0.625, 0.625});
  const std::string bytes = encode_nrrd(v, Encoding::Gzip);
  CHECK(bytes.find("spacings: 0.625 0.625 0.625\n") != std::string::npos);
  CHECK(bytes.find("sizes: 2 2 2\n") != std::string::npos);
  CHECK(bytes.find("encoding: gzip\n") != std::string::npos);
  CHECK(bytes.find("endian: little\n") != std::string::npos);
}

TEST_CASE("file round trip across encodings") {
  std::mt19937_64 rng(11);
  Mask m({32, 32, 8}, {0.7, 0.8, 1.9});
  std::bernoulli_distribution on(0.3);
  for (auto& b : m.bits()) b = on(rng) ? 1 : 0;
  const auto dir = std::filesystem::temp_directory_path() / "segbench_io_test";
  std::filesystem::create_directories(dir);
  for (Encoding e : {Encoding::Raw, Encoding::Gzip}) {
    const auto p = dir / (e == Encoding::Raw ? "m_raw.nrrd" : "m_gz.nrrd");
    write_nrrd(m, p, e);
    CHECK(read_mask(p) == m);
  }
  CHECK(read_mask(dir / "m_raw.nrrd") == read_mask(dir / "m_gz.nrrd"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("gzip payload of the wrong size") {
  const Volume small({2, 2, 2}, {1, 1, 1}, ScalarType::UInt8);
  std::string bytes = encode_nrrd(small, Encoding::Gzip);
  const auto pos = bytes.find("sizes: 2 2 2");
  bytes.replace(pos, 12, "sizes: 2 2 3");
  try {
    decode_nrrd(bytes);
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::DimensionMismatch);
  }
}
