#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <algorithm>
#include <cstring>
#include <string>
#include <vector>

#include "segbench/metrics.hpp"
#include "segbench/morphology.hpp"
#include "segbench/nrrd.hpp"
#include "segbench/phantom.hpp"
#include "segbench/preprocess.hpp"
#include "segbench/quality.hpp"
#include "segbench/stats.hpp"

namespace py = pybind11;
using namespace pybind11::literals;
using namespace segbench;

namespace {

std::string type_name(ScalarType t) {
  switch (t) {
    case ScalarType::UInt8: return "uint8";
    case ScalarType::UInt16: return "uint16";
    case ScalarType::Float32: return "float32";
  }
  return "float32";
}

ScalarType parse_type(const std::string& s) {
  if (s == "uint8") return ScalarType::UInt8;
  if (s == "uint16") return ScalarType::UInt16;
  if (s == "float32") return ScalarType::Float32;
  throw Error(Errc::InvalidArgument, "unknown scalar type '" + s + "'");
}

Spacing to_spacing(const std::array<double, 3>& s) { return {s[0], s[1], s[2]}; }
py::tuple from_spacing(const Spacing& s) { return py::make_tuple(s.sx, s.sy, s.sz); }

// Arrays are (nz, ny, nx), matching the x-fastest storage order.
Dims dims_of(const py::buffer_info& info) {
  if (info.ndim != 3) throw Error(Errc::DimensionMismatch, "expected a 3-D array");
  return {info.shape[2], info.shape[1], info.shape[0]};
}

std::vector<py::ssize_t> shape_of(const Dims& d) { return {d.nz, d.ny, d.nx}; }

Volume volume_from(py::array_t<float, py::array::c_style | py::array::forcecast> a, std::array<double, 3> spacing,
                   const std::string& type) {
  const auto info = a.request();
  const Dims d = dims_of(info);
  const float* p = static_cast<const float*>(info.ptr);
  return Volume(d, to_spacing(spacing), parse_type(type), std::vector<float>(p, p + d.voxel_count()));
}

Mask mask_from(py::array a, std::array<double, 3> spacing) {
  auto bools = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>::ensure(
      a.attr("astype")("bool"));
  const auto info = bools.request();
  const Dims d = dims_of(info);
  const auto* p = static_cast<const std::uint8_t*>(info.ptr);
  return Mask(d, to_spacing(spacing), std::vector<std::uint8_t>(p, p + d.voxel_count()));
}

py::array_t<float> volume_array(const Volume& v) {
  py::array_t<float> out(shape_of(v.dims()));
  std::memcpy(out.mutable_data(), v.data().data(), v.data().size_bytes());
  return out;
}

py::array_t<bool> mask_array(const Mask& m) {
  py::array_t<bool> out(shape_of(m.dims()));
  std::copy(m.bits().begin(), m.bits().end(), out.mutable_data());
  return out;
}

py::object to_python(const Grid& g) {
  if (const auto* v = std::get_if<Volume>(&g)) return py::cast(*v);
  return py::cast(std::get<Mask>(g));
}

Encoding parse_encoding(const std::string& s) {
  if (s == "raw") return Encoding::Raw;
  if (s == "gzip") return Encoding::Gzip;
  throw Error(Errc::InvalidArgument, "encoding must be 'raw' or 'gzip'");
}

HausdorffMode parse_mode(const std::string& s) {
  if (s == "symmetric") return HausdorffMode::Symmetric;
  if (s == "directed") return HausdorffMode::Directed;
  throw Error(Errc::InvalidArgument, "mode must be 'symmetric' or 'directed'");
}

StructuringElement element(const std::string& shape, int radius) {
  if (shape == "cross") return {StructuringShape::Cross, radius};
  if (shape == "cube") return {StructuringShape::Cube, radius};
  throw Error(Errc::InvalidArgument, "shape must be 'cross' or 'cube'");
}

Connectivity connectivity(int n) {
  if (n == 6) return Connectivity::Six;
  if (n == 26) return Connectivity::TwentySix;
  throw Error(Errc::InvalidArgument, "connectivity must be 6 or 26");
}

py::object optional_value(const std::optional<double>& v) { return v ? py::object(py::float_(*v)) : py::object(py::none()); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Left-atrium segmentation benchmark core";

  static py::handle error = py::exception<Error>(m, "Error", PyExc_RuntimeError).release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object instance = py::reinterpret_borrow<py::object>(error)(e.what());
      instance.attr("code") = std::string(to_string(e.code()));
      PyErr_SetObject(error.ptr(), instance.ptr());
    }
  });

  py::class_<Volume>(m, "Volume")
      .def(py::init(&volume_from), "array"_a, "spacing"_a = std::array<double, 3>{1, 1, 1}, "type"_a = "float32")
      .def_property_readonly("shape", [](const Volume& v) { return py::tuple(py::cast(shape_of(v.dims()))); })
      .def_property_readonly("spacing", [](const Volume& v) { return from_spacing(v.spacing()); })
      .def_property_readonly("type", [](const Volume& v) { return type_name(v.type()); })
      .def("to_numpy", &volume_array)
      .def("__eq__", [](const Volume& a, const Volume& b) { return a == b; });

  py::class_<Mask>(m, "Mask")
      .def(py::init(&mask_from), "array"_a, "spacing"_a = std::array<double, 3>{1, 1, 1})
      .def_property_readonly("shape", [](const Mask& k) { return py::tuple(py::cast(shape_of(k.dims()))); })
      .def_property_readonly("spacing", [](const Mask& k) { return from_spacing(k.spacing()); })
      .def("count", &Mask::count)
      .def("to_numpy", &mask_array)
      .def("__eq__", [](const Mask& a, const Mask& b) { return a == b; });

  m.def("read_nrrd", [](const std::filesystem::path& p) { return to_python(read_nrrd(p)); }, "path"_a);
  m.def("read_volume", &read_volume, "path"_a);
  m.def("read_mask", &read_mask, "path"_a);
  m.def(
      "write_nrrd",
      [](const Volume& v, const std::filesystem::path& p, const std::string& enc) {
        write_nrrd(v, p, parse_encoding(enc));
      },
      "grid"_a, "path"_a, "encoding"_a = "raw");
  m.def(
      "write_nrrd",
      [](const Mask& k, const std::filesystem::path& p, const std::string& enc) {
        write_nrrd(k, p, parse_encoding(enc));
      },
      "grid"_a, "path"_a, "encoding"_a = "raw");

  m.def("dice", &dice, "a"_a, "b"_a);
  m.def("iou", &iou, "a"_a, "b"_a);
  m.def(
      "hausdorff_mm",
      [](const Mask& a, const Mask& b, const std::string& mode) { return hausdorff_mm(a, b, parse_mode(mode)); },
      "a"_a, "b"_a, "mode"_a = "symmetric");
  m.def("stsd_mm", &stsd_mm, "a"_a, "b"_a);
  m.def(
      "evaluate_case",
      [](const Mask& prediction, const Mask& truth) {
        const CaseMetrics c = evaluate_case(prediction, truth);
        py::dict d;
        d["dice"] = c.dice;
        d["iou"] = c.iou;
        d["sensitivity"] = c.sensitivity;
        d["specificity"] = c.specificity;
        d["hd_mm"] = optional_value(c.hd_mm);
        d["stsd_mm"] = optional_value(c.stsd_mm);
        d["diameter_pred_mm"] = c.diameter_pred_mm;
        d["diameter_true_mm"] = c.diameter_true_mm;
        d["diameter_err_pct"] = c.diameter_err_pct;
        d["volume_pred_cm3"] = c.volume_pred_cm3;
        d["volume_true_cm3"] = c.volume_true_cm3;
        d["volume_err_pct"] = c.volume_err_pct;
        return d;
      },
      "prediction"_a, "truth"_a);

  m.def(
      "assess_quality",
      [](const Volume& scan, const Mask& atrium, int margin) {
        const QualityReport r = assess_quality(scan, atrium, margin);
        py::dict d;
        d["snr"] = r.snr;
        d["cr"] = r.cr;
        d["het"] = r.het;
        d["band"] = std::string(to_string(r.band));
        return d;
      },
      "scan"_a, "atrium"_a, "margin"_a = kDefaultQualityMargin);

  m.def("normalize_intensity", &normalize_intensity, "volume"_a);
  m.def(
      "clahe_slicewise",
      [](const Volume& v, int tiles_x, int tiles_y, double clip_limit, int bins) {
        return clahe_slicewise(v, ClaheParams{tiles_x, tiles_y, clip_limit, bins});
      },
      "volume"_a, "tiles_x"_a = 8, "tiles_y"_a = 8, "clip_limit"_a = 2.0, "bins"_a = 256);

  m.def(
      "largest_component", [](const Mask& k, int conn) { return largest_component(k, connectivity(conn)); },
      "mask"_a, "connectivity"_a = 26);
  m.def(
      "dilate", [](const Mask& k, int r, const std::string& s) { return dilate(k, element(s, r)); }, "mask"_a,
      "radius"_a = 1, "shape"_a = "cross");
  m.def(
      "erode", [](const Mask& k, int r, const std::string& s) { return erode(k, element(s, r)); }, "mask"_a,
      "radius"_a = 1, "shape"_a = "cross");

  m.def(
      "generate_phantom",
      [](std::array<std::int64_t, 3> size, std::array<double, 3> spacing, std::uint64_t seed, unsigned jobs) {
        PhantomSpec spec = default_phantom_spec({size[0], size[1], size[2]}, to_spacing(spacing));
        spec.seed = seed;
        return generate(spec, jobs);
      },
      "size"_a = std::array<std::int64_t, 3>{576, 576, 88},
      "spacing"_a = std::array<double, 3>{0.625, 0.625, 0.625}, "seed"_a = 0, "jobs"_a = 1,
      "Default phantom as (volume, mask); size is (nx, ny, nz).");

  m.def(
      "welch_ttest",
      [](const std::vector<double>& xs, const std::vector<double>& ys) {
        const WelchResult r = welch_test(xs, ys);
        return py::dict("t"_a = r.t, "df"_a = r.df, "p"_a = r.p);
      },
      "xs"_a, "ys"_a);
  m.def(
      "correlate", [](const std::vector<double>& xs, const std::vector<double>& ys) { return correlate(xs, ys); },
      "xs"_a, "ys"_a);
}
