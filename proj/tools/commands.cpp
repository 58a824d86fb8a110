#include "commands.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>

#include <json.hpp>

#include "eyessl/data.hpp"
#include "eyessl/engine.hpp"
#include "eyessl/errors.hpp"
#include "eyessl/evaluation.hpp"
#include "eyessl/image_io.hpp"
#include "eyessl/log.hpp"
#include "eyessl/network.hpp"

namespace fs = std::filesystem;

namespace eyessl::cli {
namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << text;
  if (!out) throw IoError(path.string(), "write failed");
}

std::string iou_text(const std::optional<double>& v) {
  if (!v) return "undefined";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *v);
  return buf;
}

struct InputImage {
  fs::path path;
  std::string name;  // relative path under a directory input, '/' -> '_'
};

std::vector<InputImage> expand_inputs(const std::vector<std::string>& inputs) {
  std::vector<InputImage> files;
  for (const std::string& in : inputs) {
    const fs::path p(in);
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::recursive_directory_iterator(p)) {
        if (e.is_regular_file() && e.path().extension() == ".png") found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      for (const fs::path& f : found) {
        std::string name = fs::relative(f, p).replace_extension().generic_string();
        std::replace(name.begin(), name.end(), '/', '_');
        files.push_back({f, name});
      }
    } else if (fs::is_regular_file(p)) {
      files.push_back({p, p.stem().string()});
    } else {
      throw IoError(in, "no such file or directory");
    }
  }
  return files;
}

}  // namespace

TrainConfig resolve_config(const ConfigFlags& flags) {
  TrainConfig cfg = flags.config_path.empty() ? TrainConfig{} : load_config(flags.config_path);
  for (const std::string& o : flags.overrides) apply_override(cfg, o);
  if (flags.method) cfg.method = parse_method(*flags.method);
  if (flags.k) cfg.k = *flags.k;
  if (flags.seed) cfg.seed = *flags.seed;
  if (flags.data_root) {
    cfg.data_source = DataSource::kDirectory;
    cfg.data_root = *flags.data_root;
  }
  try {
    cfg.validate();
  } catch (const ValidationError& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

fs::path output_root(const std::string& out_flag) {
  if (!out_flag.empty()) return out_flag;
  if (const char* env = std::getenv("EYESSL_OUT"); env && *env) return env;
  return "runs";
}

std::string run_dir_name(const TrainConfig& cfg) {
  TrainConfig unseeded = cfg;
  unseeded.seed = 0;
  return config_hash(unseeded) + "-seed" + std::to_string(cfg.seed);
}

int cmd_train(const TrainArgs& args) {
  const TrainConfig cfg = resolve_config(args.config);
  const ExperimentData data = prepare_data(cfg);

  const fs::path run = output_root(args.out) / run_dir_name(cfg);
  fs::create_directories(run);
  write_text(run / "config.txt", serialize_config(cfg));
  if (data.split) {
    write_text(run / "manifest.json", split_manifest(data.pool, *data.split, data.validation) + "\n");
  } else {
    nlohmann::json m;
    m["seed"] = cfg.seed;
    m["k"] = data.pool.k();
    m["m"] = data.pool.m();
    m["validation"] = data.validation.size();
    write_text(run / "manifest.json", m.dump(2) + "\n");
  }

  TrainOptions options;
  options.checkpoint_path = run / "checkpoint.bin";
  options.max_steps_per_epoch = args.max_steps;
  if (args.quiet) {
    set_log_sink([](LogLevel level, const std::string& message) {
      if (level == LogLevel::kWarning) std::fprintf(stderr, "[warn] %s\n", message.c_str());
    });
  }
  const TrainResult result = train(data.pool, data.validation, cfg, options);
  write_history(run / "history.jsonl", result.history);

  const auto best = result.history.best_index();
  if (best) {
    std::printf("best epoch %d  val mIoU %.4f\n", result.history.epochs[*best].epoch,
                result.history.epochs[*best].val_miou);
  }
  std::printf("%s\n", run.string().c_str());
  return kExitOk;
}

int cmd_evaluate(const EvaluateArgs& args) {
  const fs::path run(args.run_dir);
  TrainConfig cfg = load_config(run / "config.txt");
  if (args.data_root) {
    cfg.data_source = DataSource::kDirectory;
    cfg.data_root = *args.data_root;
  }
  if (args.per_image) cfg.iou_aggregation = IouAggregation::kPerImage;
  const fs::path ckpt = args.checkpoint.empty() ? run / "checkpoint.bin" : fs::path(args.checkpoint);
  const Model model = load_checkpoint(ckpt);
  const ExperimentData data = prepare_data(cfg);
  const IoUReport report = evaluate(model, data.validation, EvalOptions::from_config(cfg));

  std::printf("images %zu\n", report.n_images);
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    std::printf("%-10s %s\n", class_name(static_cast<int>(c)).c_str(), iou_text(report.per_class[c]).c_str());
  }
  std::printf("mean       %.4f\n", report.mean);
  return kExitOk;
}

int cmd_predict(const PredictArgs& args) {
  const Model model = load_checkpoint(args.checkpoint);
  const ModelSpec& spec = model.spec();
  const fs::path out = args.out.empty() ? fs::path("predictions") : fs::path(args.out);
  fs::create_directories(out);
  int written = 0;
  for (const InputImage& in : expand_inputs(args.inputs)) {
    const Tensor<std::uint8_t> sized = resize(read_gray8(in.path), spec.height, spec.width, Interpolation::kBilinear);
    Tensor<float> pixels(1, spec.height, spec.width);
    for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = sized[i] / 255.0f;
    const EyeImage image = make_image(std::move(pixels), in.name);
    const LabelMask mask = argmax(forward(model, image));
    write_gray8(out / (in.name + "_mask.png"), mask.classes);
    write_rgb8(out / (in.name + "_overlay.png"), overlay_rgb(image, mask));
    ++written;
  }
  std::printf("%d images -> %s\n", written, out.string().c_str());
  return kExitOk;
}

int cmd_gen_synthetic(const GenerateArgs& args) {
  if (args.out.empty()) throw UsageError("gen-synthetic: --out is required");
  const fs::path out(args.out);
  const RandomStream root(args.seed);
  RandomStream train_rng = root.derive(1);
  RandomStream val_rng = root.derive(2);
  DatasetPool train_pool;
  train_pool.labeled = generate_synthetic(args.train, train_rng, {args.height, args.width, args.subjects, "S"});
  write_dataset(out / "train", train_pool);
  if (args.validation > 0) {
    DatasetPool val_pool;
    val_pool.labeled =
        generate_synthetic(args.validation, val_rng, {args.height, args.width, args.validation_subjects, "V"});
    write_dataset(out / "validation", val_pool);
  }
  std::printf("%d train, %d validation frames -> %s\n", args.train, args.validation, out.string().c_str());
  return kExitOk;
}

int cmd_report(const ReportArgs& args) {
  ReportFormat format;
  if (args.format == "table") {
    format = ReportFormat::kTable;
  } else if (args.format == "csv") {
    format = ReportFormat::kCsv;
  } else if (args.format == "plot") {
    format = ReportFormat::kPlotData;
  } else {
    throw UsageError("report: --format must be table|csv|plot");
  }
  std::vector<History> histories;
  for (const std::string& r : args.runs) {
    const fs::path p(r);
    histories.push_back(read_history(fs::is_directory(p) ? p / "history.jsonl" : p));
  }
  std::cout << render_report(histories, format);
  if (!args.out.empty()) {
    fs::create_directories(args.out);
    write_reports(histories, args.out);
  }
  return kExitOk;
}

}  // namespace eyessl::cli
