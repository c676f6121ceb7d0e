#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "commands.hpp"
#include "geobridge/error.hpp"
#include "geobridge/evalmetrics.hpp"
#include "geobridge/gates.hpp"
#include "geobridge/gbem.hpp"
#include "geobridge/geodesy.hpp"
#include "geobridge/image_io.hpp"
#include "geobridge/objective.hpp"
#include "geobridge/pipeline.hpp"
#include "geobridge/toy.hpp"

namespace py = pybind11;
using namespace geobridge;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

View parse_view(const std::string& name) {
  for (std::size_t v = 0; v < kViewCount; ++v) {
    if (view_name(static_cast<View>(v)) == name) return static_cast<View>(v);
  }
  throw Error(Errc::InvalidArgument, "unknown view '" + name + "'");
}

/// HxW grayscale or HxWx3 RGB; RGB goes through the library's luma.
GrayImage gray_from_array(const U8Array& a) {
  const auto h = static_cast<int>(a.shape(0)), w = a.ndim() > 1 ? static_cast<int>(a.shape(1)) : 0;
  const std::vector<std::uint8_t> data(a.data(), a.data() + a.size());
  if (a.ndim() == 2) return GrayImage(w, h, data);
  if (a.ndim() == 3 && a.shape(2) == 3) return to_grayscale(RgbImage(w, h, data));
  throw Error(Errc::InvalidArgument, "expected an HxW or HxWx3 uint8 array");
}

GroundFootprint footprint(const std::array<double, 4>& f) {
  return GroundFootprint(GeoPoint(f[0], f[1]), f[2], f[3]);
}

EmbeddingBatch raw_batch(View v, const Matrix& raw) {
  std::vector<std::uint64_t> ids(static_cast<std::size_t>(raw.rows()));
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = i;
  return EmbeddingBatch::from_raw(v, std::move(ids), raw);
}

GateThresholds thresholds_from(const std::optional<py::dict>& d) {
  GateThresholds t;
  if (!d) return t;
  std::ostringstream text;
  for (const auto& [k, v] : *d) text << py::str(k).cast<std::string>() << '=' << py::repr(v).cast<std::string>() << '\n';
  return parse_thresholds(text.str());
}

}  // namespace

PYBIND11_MODULE(_geobridge, m) {
  m.doc() = "Native core of the geobridge package";

  static py::exception<Error> error_type(m, "GeoBridgeError", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object inst = py::reinterpret_borrow<py::object>(error_type)(e.what());
      inst.attr("code") = std::string(errc_name(e.code()));
      PyErr_SetObject(error_type.ptr(), inst.ptr());
    }
  });

  m.attr("EARTH_RADIUS_M") = kEarthRadiusM;
  m.attr("TOOL_VERSION") = std::string(kToolVersion);

  m.def("haversine_distance",
        [](std::pair<double, double> a, std::pair<double, double> b) {
          return haversine_distance(GeoPoint(a.first, a.second), GeoPoint(b.first, b.second));
        },
        py::arg("a"), py::arg("b"), "Great-circle distance in meters between (lat, lon) pairs.");
  m.def("overlap_ratio",
        [](const std::array<double, 4>& a, const std::array<double, 4>& b) {
          return overlap_ratio(footprint(a), footprint(b));
        },
        py::arg("a"), py::arg("b"), "Overlap of two (lat, lon, width_m, height_m) footprints over the smaller area.");
  m.def("pixel_to_geo",
        [](const std::array<double, 6>& t, double col, double row) {
          const auto g = pixel_to_geo(AffineGeoTransform::from_array(t), col, row);
          return std::make_pair(g.lat(), g.lon());
        },
        py::arg("transform"), py::arg("col"), py::arg("row"));
  m.def("geo_to_pixel",
        [](const std::array<double, 6>& t, double lat, double lon) {
          const auto p = geo_to_pixel(AffineGeoTransform::from_array(t), GeoPoint(lat, lon));
          return std::make_pair(p.col, p.row);
        },
        py::arg("transform"), py::arg("lat"), py::arg("lon"));

  m.def("load_image",
        [](const std::filesystem::path& path) {
          const RgbImage img = load_image(path);
          U8Array out({img.height(), img.width(), 3});
          std::copy(img.data().begin(), img.data().end(), out.mutable_data());
          return out;
        },
        py::arg("path"), "Decode a PNG or JPEG to an HxWx3 uint8 array.");
  m.def("laplacian_variance", [](const U8Array& a) { return laplacian_variance(gray_from_array(a)); },
        py::arg("image"));
  m.def("_gate_report_json",
        [](const U8Array& a, const std::optional<py::dict>& thresholds, const std::string& id) {
          return gate_report_json(gate_cascade(gray_from_array(a), thresholds_from(thresholds)), id);
        },
        py::arg("image"), py::arg("thresholds") = py::none(), py::arg("id") = "image");

  m.def("infonce",
        [](const Matrix& scores, std::optional<std::vector<std::size_t>> targets) {
          return targets ? infonce(scores, *targets) : infonce_identity(scores);
        },
        py::arg("scores"), py::arg("targets") = py::none(),
        "Mean InfoNCE over rows; targets default to the diagonal.");
  m.def("total_loss",
        [](const Matrix& d, const Matrix& p, const Matrix& s, const Matrix& t, double tau, bool symmetric) {
          LossOptions o;
          o.symmetric = symmetric;
          const auto r = total_loss(raw_batch(View::Drone, d), raw_batch(View::Panorama, p),
                                    raw_batch(View::Satellite, s), raw_batch(View::Text, t),
                                    Temperature::from_tau(tau), o);
          py::dict pairs;
          for (std::size_t k = 0; k < kLossPairCount; ++k) {
            pairs[py::str(std::string(loss_pair_name(static_cast<LossPair>(k))))] = r.pair[k];
          }
          py::dict out;
          out["pairs"] = pairs;
          out["image"] = r.image;
          out["text"] = r.text;
          out["total"] = r.total;
          return out;
        },
        py::arg("drone"), py::arg("panorama"), py::arg("satellite"), py::arg("text"),
        py::arg("tau") = Temperature::kInitialTau, py::arg("symmetric") = false,
        "Rows are normalized before scoring; row i of every view is one instance.");

  m.def("train_toy",
        [](std::size_t batch, std::size_t dim, double lr, std::size_t steps, std::uint64_t seed,
           bool learn_temperature, double noise, std::size_t probe) {
          TrainConfig c;
          c.batch = batch;
          c.dim = dim;
          c.learning_rate = lr;
          c.steps = steps;
          c.seed = seed;
          c.learn_temperature = learn_temperature;
          c.noise = noise;
          c.validate();
          TrainResult r;
          DirectionRecall recall{};
          {
            py::gil_scoped_release release;
            r = train_toy(c);
            recall = cross_view_recall_at_1(r.encoders, toy_probe(c, probe));
          }
          py::list trace;
          for (const auto& row : r.trace) {
            py::dict d;
            d["step"] = row.step;
            d["L_img"] = row.image;
            d["L_text"] = row.text;
            d["L_total"] = row.total;
            d["tau"] = row.tau;
            trace.append(d);
          }
          py::dict rec;
          for (std::size_t q = 0; q < 3; ++q) {
            for (std::size_t g = 0; g < 3; ++g) {
              if (q == g) continue;
              rec[py::str(std::string(view_name(static_cast<View>(q))) + "->" +
                          std::string(view_name(static_cast<View>(g))))] = recall[q][g];
            }
          }
          py::dict out;
          out["trace"] = trace;
          out["recall_at_1"] = rec;
          return out;
        },
        py::kw_only(), py::arg("batch") = 32, py::arg("dim") = 16, py::arg("lr") = 0.25,
        py::arg("steps") = 200, py::arg("seed") = 17, py::arg("learn_temperature") = true,
        py::arg("noise") = 0.1, py::arg("probe") = 100);

  m.def("write_gbem",
        [](const std::filesystem::path& path, const std::string& view, std::vector<std::uint64_t> ids,
           const Matrix& rows) { write_gbem(path, EmbeddingBatch(parse_view(view), std::move(ids), rows)); },
        py::arg("path"), py::arg("view"), py::arg("ids"), py::arg("rows"),
        "Rows must already be unit norm.");
  m.def("read_gbem",
        [](const std::filesystem::path& path) {
          const auto b = read_gbem(path);
          return py::make_tuple(std::string(view_name(b.view())),
                                py::array_t<std::uint64_t>(static_cast<py::ssize_t>(b.size()), b.ids().data()),
                                b.matrix());
        },
        py::arg("path"), "Returns (view, ids, rows).");

  m.def("_evaluate_json",
        [](const std::vector<std::vector<std::size_t>>& rankings, const std::vector<std::size_t>& truth,
           std::vector<std::size_t> k_list) {
          if (rankings.size() != truth.size()) {
            throw Error(Errc::InvalidArgument, "rankings and ground_truth differ in length");
          }
          std::vector<QueryJudgment> js;
          std::size_t n = 0;
          for (std::size_t i = 0; i < rankings.size(); ++i) {
            js.push_back({"q" + std::to_string(i), rankings[i], truth[i], std::nullopt});
            n = std::max(n, rankings[i].size());
          }
          Gallery gallery(n);
          for (std::size_t i = 0; i < n; ++i) gallery[i].id = std::to_string(i);
          MetricConfig cfg;
          cfg.k_list = std::move(k_list);
          cfg.geo_metrics = false;
          return metric_report_json(aggregate(js, gallery, cfg)).dump();
        },
        py::arg("rankings"), py::arg("ground_truth"), py::arg("k_list"));

  m.def("run_cli",
        [](const std::vector<std::string>& args) {
          std::ostringstream out, err;
          int code = 0;
          {
            py::gil_scoped_release release;
            code = cli::run(args, out, err);
          }
          return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Run one CLI command in-process; returns (exit_code, stdout, stderr).");
}
