#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eyessl/config.hpp"
#include "eyessl/network.hpp"
#include "eyessl/types.hpp"

namespace eyessl {

using ClassIoU = std::vector<std::optional<double>>;  // nullopt: empty union

struct IoUReport {
  ClassIoU per_class;
  double mean = 0.0;  // over defined classes
  std::size_t n_images = 0;
};

struct EvalOptions {
  IouAggregation aggregation = IouAggregation::kGlobal;
  bool include_background = true;

  static EvalOptions from_config(const TrainConfig& cfg) {
    return {cfg.iou_aggregation, cfg.iou_include_background};
  }
};

/// Per-class |pred=c and target=c| / |pred=c or target=c|.
ClassIoU iou(const LabelMask& pred, const LabelMask& target);

/// Mean of the defined entries (skipping class 0 unless include_background).
double mean_iou(const ClassIoU& per_class, bool include_background = true);

// Per-class pixel counts accumulated over a dataset.
struct IoUCounts {
  std::vector<std::uint64_t> intersection;
  std::vector<std::uint64_t> union_;

  explicit IoUCounts(int num_classes) : intersection(num_classes, 0), union_(num_classes, 0) {}
  void add(const LabelMask& pred, const LabelMask& target);
  ClassIoU per_class() const;
};

IoUReport evaluate_predictions(std::span<const LabelMask> preds, std::span<const LabelMask> targets,
                               const EvalOptions& options = {});
/// Hard argmax of the model output over `dataset`, then aggregation.
IoUReport evaluate(const Model& model, std::span<const LabeledItem> dataset, const EvalOptions& options = {});

// ---------------------------------------------------------------------------
// Training history and reports.

struct EpochRecord {
  int epoch = 0;
  double l_sup = 0.0;
  std::optional<double> l_u;
  std::optional<double> l_ss;
  double lambda_u = 0.0;
  double lambda_ss = 0.0;
  double val_miou = 0.0;
  ClassIoU val_iou;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct RunInfo {
  Method method = Method::kSL;
  int k = 0;
  SplitMode subject_mode = SplitMode::kMultiSubject;
  std::uint64_t seed = 0;

  friend bool operator==(const RunInfo&, const RunInfo&) = default;
};

struct History {
  RunInfo info;
  std::vector<EpochRecord> epochs;

  /// Index of the first epoch with the highest val_miou.
  std::optional<std::size_t> best_index() const;
  friend bool operator==(const History&, const History&) = default;
};

// Line-delimited JSON: one object per epoch carrying the run fields and the
// epoch fields; per-class IoU is keyed by class name (null when undefined).
std::string history_to_jsonl(const History& history);
History history_from_jsonl(const std::string& text, const std::string& source = "<memory>");
void write_history(const std::filesystem::path& path, const History& history);
History read_history(const std::filesystem::path& path);

enum class ReportFormat { kTable, kCsv, kPlotData };

/// Method x k comparison (best validation mIoU, percent, mean over seeds),
/// percent-change rows against SL, and pupil (iris) columns.
std::string render_report(std::span<const History> histories, ReportFormat format);
/// Writes report.txt, report.csv and plot.csv into `out_dir`.
void write_reports(std::span<const History> histories, const std::filesystem::path& out_dir);

/// Class-coloured translucent overlay, 3 x H x W RGB.
Tensor<std::uint8_t> overlay_rgb(const EyeImage& image, const LabelMask& pred);
void overlay_masks(const EyeImage& image, const LabelMask& pred, const std::filesystem::path& path);

struct Rgb {
  std::uint8_t r, g, b;
};
Rgb class_color(int c);
inline constexpr double kOverlayAlpha = 0.4;

}  // namespace eyessl
