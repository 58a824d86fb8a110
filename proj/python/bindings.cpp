#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "eyessl/augment.hpp"
#include "eyessl/config.hpp"
#include "eyessl/data.hpp"
#include "eyessl/engine.hpp"
#include "eyessl/errors.hpp"
#include "eyessl/evaluation.hpp"
#include "eyessl/losses.hpp"
#include "eyessl/network.hpp"

namespace py = pybind11;
using namespace eyessl;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using ByteArray = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

// (H, W) or (C, H, W) array to a C x H x W tensor.
template <typename T>
Tensor<T> to_tensor(const py::array_t<T, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2 && a.ndim() != 3) throw ShapeError("expected a 2-D or 3-D array");
  const int c = a.ndim() == 3 ? static_cast<int>(a.shape(0)) : 1;
  const int h = static_cast<int>(a.shape(a.ndim() - 2));
  const int w = static_cast<int>(a.shape(a.ndim() - 1));
  Tensor<T> t(c, h, w);
  std::copy(a.data(), a.data() + t.size(), t.data());
  return t;
}

template <typename T>
py::array_t<T> to_array(const Tensor<T>& t, bool squeeze = false) {
  std::vector<py::ssize_t> shape;
  if (!(squeeze && t.channels() == 1)) shape.push_back(t.channels());
  shape.push_back(t.height());
  shape.push_back(t.width());
  py::array_t<T> a(shape);
  std::copy(t.data(), t.data() + t.size(), a.mutable_data());
  return a;
}

EyeImage to_image(const FloatArray& a) {
  if (a.ndim() != 2) throw ShapeError("expected an (H, W) image");
  return make_image(to_tensor<float>(a), "array");
}

LabelMask to_mask(const ByteArray& a, int num_classes) {
  if (a.ndim() != 2) throw ShapeError("expected an (H, W) mask");
  LabelMask m{to_tensor<std::uint8_t>(a), num_classes};
  m.validate();
  return m;
}

SoftPrediction to_prediction(const FloatArray& a) {
  if (a.ndim() != 3) throw ShapeError("expected a (P, H, W) prediction");
  return SoftPrediction{to_tensor<float>(a)};
}

SpatialTransform make_transform(double angle, int shift_y, int shift_x) {
  return {angle, shift_y, shift_x, true};
}

std::string config_value(const TrainConfig& cfg, const std::string& key) {
  std::istringstream in(serialize_config(cfg));
  std::string line;
  const std::string prefix = key + ": ";
  while (std::getline(in, line)) {
    if (line.rfind(prefix, 0) == 0) return line.substr(prefix.size());
  }
  throw ConfigError(key, "unknown key");
}

py::list iou_list(const ClassIoU& v) {
  py::list out;
  for (const auto& x : v) out.append(x ? py::cast(*x) : py::none());
  return out;
}

}  // namespace

PYBIND11_MODULE(_eyessl, m) {
  m.doc() = "Semi-supervised eye segmentation core";

  auto base = py::register_exception<Error>(m, "Error");
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<ParameterError>(m, "ParameterError", base.ptr());
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<IoError>(m, "IoError", base.ptr());
  py::register_exception<NumericError>(m, "NumericError", base.ptr());

  py::class_<TrainConfig>(m, "Config")
      .def(py::init<>())
      .def_static("parse", &parse_config, py::arg("text"))
      .def_static("load", &load_config, py::arg("path"))
      .def("set", [](TrainConfig& c, const std::string& key, const std::string& value) { apply_override(c, key, value); },
           py::arg("key"), py::arg("value"))
      .def("get", &config_value, py::arg("key"))
      .def("validate", &TrainConfig::validate)
      .def("hash", &config_hash)
      .def("to_text", &serialize_config)
      .def("__eq__", [](const TrainConfig& a, const TrainConfig& b) { return a == b; })
      .def("__copy__", [](const TrainConfig& c) { return c; });
  m.def("config_keys", &config_keys);

  m.def(
      "generate_synthetic",
      [](int n, std::uint64_t seed, int height, int width, int subjects, const std::string& prefix) {
        RandomStream rng(seed);
        py::list out;
        for (const LabeledItem& it : generate_synthetic(n, rng, {height, width, subjects, prefix})) {
          out.append(py::make_tuple(to_array(it.image.pixels, true), to_array(it.mask.classes, true),
                                    it.image.frame_id));
        }
        return out;
      },
      py::arg("n"), py::arg("seed") = 0, py::arg("height") = 240, py::arg("width") = 320,
      py::arg("subjects") = 1, py::arg("prefix") = "S");

  m.def(
      "gamma_correct", [](const FloatArray& img, double gamma) { return to_array(gamma_correct(to_image(img), gamma).pixels, true); },
      py::arg("image"), py::arg("gamma"));
  m.def(
      "clahe",
      [](const FloatArray& img, double clip, int grid) { return to_array(clahe(to_image(img), clip, grid).pixels, true); },
      py::arg("image"), py::arg("clip"), py::arg("grid"));
  m.def(
      "apply_spatial",
      [](const FloatArray& x, double angle, int shift_y, int shift_x) {
        return to_array(apply_spatial(to_tensor<float>(x), make_transform(angle, shift_y, shift_x)), x.ndim() == 2);
      },
      py::arg("x"), py::arg("angle_deg") = 0.0, py::arg("shift_y") = 0, py::arg("shift_x") = 0);
  m.def(
      "invert_spatial",
      [](const FloatArray& probs, double angle, int shift_y, int shift_x) {
        auto [back, valid] = invert_spatial(to_prediction(probs), make_transform(angle, shift_y, shift_x));
        return py::make_tuple(to_array(back.probs), to_array(valid, true));
      },
      py::arg("probs"), py::arg("angle_deg") = 0.0, py::arg("shift_y") = 0, py::arg("shift_x") = 0);

  m.def(
      "iou", [](const ByteArray& pred, const ByteArray& target, int p) { return iou_list(iou(to_mask(pred, p), to_mask(target, p))); },
      py::arg("pred"), py::arg("target"), py::arg("num_classes") = kDefaultNumClasses);
  m.def(
      "mean_iou",
      [](const ByteArray& pred, const ByteArray& target, int p, bool background) {
        return mean_iou(iou(to_mask(pred, p), to_mask(target, p)), background);
      },
      py::arg("pred"), py::arg("target"), py::arg("num_classes") = kDefaultNumClasses,
      py::arg("include_background") = true);

  m.def(
      "signed_distance", [](const ByteArray& mask, int p) { return to_array(signed_distance(to_mask(mask, p))); },
      py::arg("mask"), py::arg("num_classes") = kDefaultNumClasses);
  m.def(
      "boundary_weight_map",
      [](const ByteArray& mask, int radius, double w, int p) {
        return to_array(boundary_weight_map(to_mask(mask, p), radius, w), true);
      },
      py::arg("mask"), py::arg("radius") = 1, py::arg("weight") = 1.0, py::arg("num_classes") = kDefaultNumClasses);
  m.def(
      "cross_entropy",
      [](const FloatArray& probs, const ByteArray& mask) {
        const SoftPrediction pred = to_prediction(probs);
        return cross_entropy(pred, to_mask(mask, pred.num_classes()));
      },
      py::arg("probs"), py::arg("mask"));
  m.def(
      "supervised_loss",
      [](const FloatArray& probs, const ByteArray& mask, const TrainConfig& cfg) {
        const SoftPrediction pred = to_prediction(probs);
        return supervised_loss(pred, to_mask(mask, pred.num_classes()), cfg);
      },
      py::arg("probs"), py::arg("mask"), py::arg("config"));
  m.def(
      "consistency_loss",
      [](const FloatArray& pred, const FloatArray& guess, std::optional<FloatArray> validity) {
        std::optional<Tensor<float>> v;
        if (validity) v = to_tensor<float>(*validity);
        return consistency_loss(to_prediction(pred), to_prediction(guess), v ? &*v : nullptr);
      },
      py::arg("pred"), py::arg("guess"), py::arg("validity") = py::none());
  m.def(
      "schedule",
      [](int epoch, const TrainConfig& cfg) {
        const LossWeights w = schedule(epoch, cfg);
        return py::make_tuple(w.lambda_u, w.lambda_ss);
      },
      py::arg("epoch"), py::arg("config"));

  py::class_<Model>(m, "Model")
      .def(py::init([](const TrainConfig& cfg, std::uint64_t seed) {
             RandomStream rng(seed);
             return init_params(model_spec_from_config(cfg), rng);
           }),
           py::arg("config"), py::arg("seed") = 0)
      .def_static("load", [](const std::filesystem::path& p) { return load_checkpoint(p); }, py::arg("path"))
      .def("save", [](const Model& model, const std::filesystem::path& p, const TrainConfig& cfg) { save_checkpoint(p, model, cfg); },
           py::arg("path"), py::arg("config"))
      .def("forward", [](const Model& model, const FloatArray& img) { return to_array(forward(model, to_image(img)).probs); },
           py::arg("image"))
      .def("predict",
           [](const Model& model, const FloatArray& img) {
             return to_array(argmax(forward(model, to_image(img))).classes, true);
           },
           py::arg("image"))
      .def_property_readonly("num_params", &Model::num_params)
      .def_property_readonly("input_shape", [](const Model& model) {
        return py::make_tuple(model.spec().height, model.spec().width);
      });

  m.def(
      "_train",
      [](const TrainConfig& cfg, std::optional<std::filesystem::path> checkpoint, std::optional<int> max_steps) {
        py::gil_scoped_release release;
        const ExperimentData data = prepare_data(cfg);
        TrainOptions options;
        options.checkpoint_path = checkpoint;
        options.max_steps_per_epoch = max_steps;
        TrainResult result = train(data.pool, data.validation, cfg, options);
        return std::make_pair(std::move(result.model), history_to_jsonl(result.history));
      },
      py::arg("config"), py::arg("checkpoint") = py::none(), py::arg("max_steps") = py::none());

  m.def(
      "render_report",
      [](const std::vector<std::filesystem::path>& histories, const std::string& format) {
        std::vector<History> hs;
        for (const auto& p : histories) hs.push_back(read_history(p));
        ReportFormat f = ReportFormat::kTable;
        if (format == "csv") {
          f = ReportFormat::kCsv;
        } else if (format == "plot") {
          f = ReportFormat::kPlotData;
        } else if (format != "table") {
          throw ParameterError("format must be table|csv|plot");
        }
        return render_report(hs, f);
      },
      py::arg("histories"), py::arg("format") = "table");
}
