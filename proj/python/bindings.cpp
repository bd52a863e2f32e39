#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "pouta/checkpoint.hpp"
#include "pouta/config.hpp"
#include "pouta/errors.hpp"
#include "pouta/fixture.hpp"
#include "pouta/inference.hpp"
#include "pouta/io.hpp"
#include "pouta/metrics.hpp"
#include "pouta/model.hpp"
#include "pouta/synthesis.hpp"
#include "pouta/training.hpp"

namespace py = pybind11;
using namespace pouta;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using ByteArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

Image to_image(const FloatArray& a) {
  if (a.ndim() != 3) throw ArgumentError("expected an H x W x C float array");
  Image img(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)), static_cast<int>(a.shape(2)));
  std::copy(a.data(), a.data() + a.size(), img.data.begin());
  return img;
}

Mask to_mask(const ByteArray& a) {
  if (a.ndim() != 2) throw ArgumentError("expected an H x W mask");
  Mask m(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  for (py::ssize_t i = 0; i < a.size(); ++i) m.data[static_cast<std::size_t>(i)] = a.data()[i] != 0 ? 1 : 0;
  return m;
}

ScalarField to_field(const FloatArray& a) {
  if (a.ndim() != 2) throw ArgumentError("expected an H x W heatmap");
  ScalarField f(static_cast<int>(a.shape(0)), static_cast<int>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), f.data.begin());
  return f;
}

FloatArray from_image(const Image& img) {
  FloatArray out({img.height, img.width, img.channels});
  std::copy(img.data.begin(), img.data.end(), out.mutable_data());
  return out;
}

FloatArray from_field(const ScalarField& f) {
  FloatArray out({f.height, f.width});
  std::copy(f.data.begin(), f.data.end(), out.mutable_data());
  return out;
}

ByteArray from_mask(const Mask& m) {
  ByteArray out({m.height, m.width});
  std::copy(m.data.begin(), m.data.end(), out.mutable_data());
  return out;
}

TrainConfig config_with(const std::map<std::string, std::string>& overrides) {
  TrainConfig c;
  apply_overrides(c, overrides);
  return c;
}

py::dict report_dict(const MetricsReport& r) {
  py::dict d;
  d["category"] = r.category;
  d["n_images"] = r.n_images;
  d["image_auroc"] = r.image_auroc;
  d["pixel_auroc"] = r.has_pixel_metrics ? py::cast(r.pixel_auroc) : py::none();
  d["pixel_ap"] = r.has_pixel_metrics ? py::cast(r.pixel_ap) : py::none();
  d["mean_latency_ms"] = r.mean_latency_ms;
  return d;
}

}  // namespace

PYBIND11_MODULE(_pouta, m) {
  m.doc() = "Bindings for the pouta C++ core";

  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<CheckpointError>(m, "CheckpointError", PyExc_OSError);
  py::register_exception<UndefinedMetricError>(m, "UndefinedMetricError", PyExc_ValueError);
  py::register_exception<ContractError>(m, "ContractError", PyExc_RuntimeError);

  m.def("perlin_mask", [](int h, int w, int min_exp, int max_exp, double threshold, std::uint64_t seed) {
        return from_mask(generate_perlin_mask(h, w, {min_exp, max_exp}, threshold, seed));
      },
      py::arg("height"), py::arg("width"), py::arg("min_exponent") = 0, py::arg("max_exponent") = 5,
      py::arg("threshold") = 0.5, py::arg("seed") = 0, "Binary Perlin-noise mask (H x W uint8).");

  m.def("synthesize_anomaly", [](const FloatArray& original, const FloatArray& augmented, const ByteArray& mask,
                                 double opacity) {
        return from_image(synthesize_anomaly(to_image(original), to_image(augmented), to_mask(mask), opacity));
      },
      py::arg("original"), py::arg("augmented"), py::arg("mask"), py::arg("opacity"));

  m.def("image_score", [](const FloatArray& heatmap) { return image_score(to_field(heatmap)); }, py::arg("heatmap"),
        "Maximum of the 21 x 21 mean-filtered heatmap.");

  m.def("auroc", [](const std::vector<double>& s, const std::vector<std::uint8_t>& l) { return auroc(s, l); },
        py::arg("scores"), py::arg("labels"));
  m.def("average_precision",
        [](const std::vector<double>& s, const std::vector<std::uint8_t>& l) { return average_precision(s, l); },
        py::arg("scores"), py::arg("labels"));

  m.def("default_config", [] { return to_map(TrainConfig{}); }, "Every config key with its default value.");
  m.def("lr_at_epoch", [](int epoch, const std::map<std::string, std::string>& overrides) {
        return lr_at_epoch(epoch, config_with(overrides));
      },
      py::arg("epoch"), py::arg("overrides") = std::map<std::string, std::string>{});
  m.def("few_shot_subset", [](std::size_t n, std::size_t k, std::uint64_t seed) { return few_shot_subset(n, k, seed); },
        py::arg("pool_size"), py::arg("k"), py::arg("seed"));
  m.def("parameter_count", [](const std::map<std::string, std::string>& overrides) {
        return parameter_count(*build_variant(config_with(overrides)));
      },
      py::arg("overrides") = std::map<std::string, std::string>{});

  m.def("write_toy_fixture", [](const std::filesystem::path& root, std::uint64_t seed, int size, int train_count,
                                int test_normal, int test_anomalous) {
        ToyFixtureOptions o;
        o.seed = seed;
        o.size = size;
        o.train_count = train_count;
        o.test_normal = test_normal;
        o.test_anomalous = test_anomalous;
        const auto f = write_toy_fixture(root, o);
        py::dict d;
        d["dataset_root"] = f.dataset_root;
        d["texture_dir"] = f.texture_dir;
        d["category"] = f.category;
        return d;
      },
      py::arg("root"), py::arg("seed") = 0, py::arg("size") = 64, py::arg("train_count") = 32,
      py::arg("test_normal") = 8, py::arg("test_anomalous") = 8);

  m.def("train", [](const std::filesystem::path& data_root, const std::string& category,
                    const std::filesystem::path& texture_dir, const std::filesystem::path& out,
                    const std::map<std::string, std::string>& overrides) {
        TrainOptions opt;
        opt.checkpoint_path = out;
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train(config_with(overrides), data_root, category, texture_dir, opt);
        }
        py::dict d;
        d["final_loss"] = r.final_loss;
        d["steps"] = r.steps.size();
        d["mss_evaluations"] = r.mss_evaluations;
        return d;
      },
      py::arg("data_root"), py::arg("category"), py::arg("texture_dir"), py::arg("out"),
      py::arg("overrides") = std::map<std::string, std::string>{});

  m.def("evaluate", [](const std::filesystem::path& checkpoint, const std::filesystem::path& data_root,
                       const std::string& category) {
        const Detector detector(load_checkpoint(checkpoint));
        MetricsReport r;
        {
          py::gil_scoped_release release;
          r = evaluate_category(detector, load_dataset(data_root, category, Split::test));
        }
        return report_dict(r);
      },
      py::arg("checkpoint"), py::arg("data_root"), py::arg("category"));

  py::class_<Detector>(m, "Detector")
      .def(py::init([](const std::filesystem::path& path) { return Detector(load_checkpoint(path)); }),
           py::arg("checkpoint"))
      .def_property_readonly("variant", [](const Detector& d) { return to_string(d.variant()); })
      .def_property_readonly("image_size", &Detector::image_size)
      .def("score", [](const Detector& d, const std::filesystem::path& image) {
            ScoreReport r;
            {
              py::gil_scoped_release release;
              r = infer(d, image);
            }
            py::dict out;
            out["image_score"] = r.image_score;
            out["latency_ms"] = r.latency_ms;
            out["heatmap"] = from_field(r.heatmap);
            out["source_path"] = r.source_path;
            return out;
          },
          py::arg("image"));
}
