#include "eyessl/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "eyessl/errors.hpp"
#include "eyessl/image_io.hpp"

namespace eyessl {
namespace {

void check_pair(const LabelMask& pred, const LabelMask& target) {
  if (!pred.classes.same_shape(target.classes)) throw ShapeError("iou: prediction and target shapes differ");
}

std::string pct(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * fraction);
  return buf;
}

std::string pct_change(double from, double to) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * (to - from) / from);
  return buf;
}

struct Summary {
  RunInfo info;
  double best_miou = 0.0;
  ClassIoU best_iou;
};

Summary summarize(const History& h) {
  Summary s{h.info, 0.0, {}};
  if (auto best = h.best_index()) {
    s.best_miou = h.epochs[*best].val_miou;
    s.best_iou = h.epochs[*best].val_iou;
  }
  return s;
}

struct ColumnKey {
  int k;
  SplitMode mode;
  auto operator<=>(const ColumnKey&) const = default;
};

std::string column_label(const ColumnKey& key) {
  return std::to_string(key.k) + (key.mode == SplitMode::kSingleSubject ? " (single)" : "");
}

std::optional<double> mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

ClassIoU iou(const LabelMask& pred, const LabelMask& target) {
  check_pair(pred, target);
  IoUCounts counts(std::max(pred.num_classes, target.num_classes));
  counts.add(pred, target);
  return counts.per_class();
}

double mean_iou(const ClassIoU& per_class, bool include_background) {
  double sum = 0.0;
  int defined = 0;
  for (std::size_t c = include_background ? 0 : 1; c < per_class.size(); ++c) {
    if (per_class[c]) {
      sum += *per_class[c];
      ++defined;
    }
  }
  return defined == 0 ? 0.0 : sum / defined;
}

void IoUCounts::add(const LabelMask& pred, const LabelMask& target) {
  check_pair(pred, target);
  const std::size_t n = pred.classes.plane_size();
  const std::size_t p = intersection.size();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t a = pred.classes[i];
    const std::size_t b = target.classes[i];
    if (a >= p || b >= p) throw ShapeError("iou: class index exceeds class count");
    if (a == b) {
      ++intersection[a];
      ++union_[a];
    } else {
      ++union_[a];
      ++union_[b];
    }
  }
}

ClassIoU IoUCounts::per_class() const {
  ClassIoU out(intersection.size());
  for (std::size_t c = 0; c < out.size(); ++c) {
    if (union_[c] > 0) out[c] = static_cast<double>(intersection[c]) / static_cast<double>(union_[c]);
  }
  return out;
}

IoUReport evaluate_predictions(std::span<const LabelMask> preds, std::span<const LabelMask> targets,
                               const EvalOptions& options) {
  if (preds.size() != targets.size()) throw ShapeError("evaluate: prediction/target count mismatch");
  if (preds.empty()) throw ValidationError("evaluate: empty dataset");
  const int p = targets.front().num_classes;
  IoUReport report;
  report.n_images = preds.size();
  if (options.aggregation == IouAggregation::kGlobal) {
    IoUCounts counts(p);
    for (std::size_t i = 0; i < preds.size(); ++i) counts.add(preds[i], targets[i]);
    report.per_class = counts.per_class();
    report.mean = mean_iou(report.per_class, options.include_background);
    return report;
  }
  std::vector<double> sums(p, 0.0);
  std::vector<int> defined(p, 0);
  double mean_sum = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    IoUCounts counts(p);
    counts.add(preds[i], targets[i]);
    const ClassIoU per = counts.per_class();
    for (int c = 0; c < p; ++c) {
      if (per[c]) {
        sums[c] += *per[c];
        ++defined[c];
      }
    }
    mean_sum += mean_iou(per, options.include_background);
  }
  report.per_class.resize(p);
  for (int c = 0; c < p; ++c) {
    if (defined[c] > 0) report.per_class[c] = sums[c] / defined[c];
  }
  report.mean = mean_sum / static_cast<double>(preds.size());
  return report;
}

IoUReport evaluate(const Model& model, std::span<const LabeledItem> dataset, const EvalOptions& options) {
  if (dataset.empty()) throw ValidationError("evaluate: empty dataset");
  std::vector<LabelMask> preds;
  std::vector<LabelMask> targets;
  preds.reserve(dataset.size());
  targets.reserve(dataset.size());
  for (const LabeledItem& item : dataset) {
    preds.push_back(argmax(forward(model, item.image)));
    targets.push_back(item.mask);
  }
  return evaluate_predictions(preds, targets, options);
}

std::optional<std::size_t> History::best_index() const {
  if (epochs.empty()) return std::nullopt;
  std::size_t best = 0;
  for (std::size_t i = 1; i < epochs.size(); ++i) {
    if (epochs[i].val_miou > epochs[best].val_miou) best = i;
  }
  return best;
}

std::string history_to_jsonl(const History& history) {
  std::string out;
  for (const EpochRecord& r : history.epochs) {
    nlohmann::ordered_json j;
    j["method"] = to_string(history.info.method);
    j["k"] = history.info.k;
    j["subject_mode"] = to_string(history.info.subject_mode);
    j["seed"] = history.info.seed;
    j["epoch"] = r.epoch;
    j["l_sup"] = r.l_sup;
    j["l_u"] = r.l_u ? nlohmann::ordered_json(*r.l_u) : nlohmann::ordered_json(nullptr);
    j["l_ss"] = r.l_ss ? nlohmann::ordered_json(*r.l_ss) : nlohmann::ordered_json(nullptr);
    j["lambda_u"] = r.lambda_u;
    j["lambda_ss"] = r.lambda_ss;
    j["val_miou"] = r.val_miou;
    nlohmann::ordered_json per = nlohmann::ordered_json::object();
    for (std::size_t c = 0; c < r.val_iou.size(); ++c) {
      per[class_name(static_cast<int>(c))] =
          r.val_iou[c] ? nlohmann::ordered_json(*r.val_iou[c]) : nlohmann::ordered_json(nullptr);
    }
    j["val_iou"] = per;
    out += j.dump() + "\n";
  }
  return out;
}

History history_from_jsonl(const std::string& text, const std::string& source) {
  History h;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      RunInfo info{parse_method(j.at("method").get<std::string>()), j.at("k").get<int>(),
                   parse_split_mode(j.at("subject_mode").get<std::string>()),
                   j.at("seed").get<std::uint64_t>()};
      if (h.epochs.empty()) {
        h.info = info;
      } else if (!(info == h.info)) {
        throw IoError(source, "line " + std::to_string(line_no) + ": run fields change mid-file");
      }
      EpochRecord r;
      r.epoch = j.at("epoch").get<int>();
      r.l_sup = j.at("l_sup").get<double>();
      if (!j.at("l_u").is_null()) r.l_u = j.at("l_u").get<double>();
      if (!j.at("l_ss").is_null()) r.l_ss = j.at("l_ss").get<double>();
      r.lambda_u = j.at("lambda_u").get<double>();
      r.lambda_ss = j.at("lambda_ss").get<double>();
      r.val_miou = j.at("val_miou").get<double>();
      const auto& per = j.at("val_iou");
      for (int c = 0; c < static_cast<int>(per.size()); ++c) {
        const auto& v = per.at(class_name(c));
        r.val_iou.push_back(v.is_null() ? std::nullopt : std::optional<double>(v.get<double>()));
      }
      h.epochs.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw IoError(source, "line " + std::to_string(line_no) + ": malformed history record (" + e.what() + ")");
    } catch (const ConfigError& e) {
      throw IoError(source, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (h.epochs.empty()) throw IoError(source, "history has no records");
  return h;
}

void write_history(const std::filesystem::path& path, const History& history) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << history_to_jsonl(history);
}

History read_history(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open history");
  std::ostringstream ss;
  ss << in.rdbuf();
  return history_from_jsonl(ss.str(), path.string());
}

std::string render_report(std::span<const History> histories, ReportFormat format) {
  if (histories.empty()) throw ValidationError("render_report: no histories");
  std::vector<Summary> runs;
  std::size_t num_classes = 0;
  for (const History& h : histories) {
    runs.push_back(summarize(h));
    if (runs.size() == 1) {
      num_classes = runs.back().best_iou.size();
    } else if (runs.back().best_iou.size() != num_classes) {
      throw ShapeError("render_report: histories disagree on the class count");
    }
  }

  const std::vector<Method> methods{Method::kSL, Method::kSSL_D, Method::kSSL_SS};
  std::map<ColumnKey, std::map<Method, std::vector<double>>> cells;
  std::map<ColumnKey, std::map<Method, std::vector<std::vector<std::optional<double>>>>> class_cells;
  for (const Summary& s : runs) {
    const ColumnKey key{s.info.k, s.info.subject_mode};
    cells[key][s.info.method].push_back(s.best_miou);
    class_cells[key][s.info.method].push_back(s.best_iou);
  }
  auto mean_cell = [&](const ColumnKey& key, Method m) -> std::optional<double> {
    auto col = cells.find(key);
    if (col == cells.end()) return std::nullopt;
    auto it = col->second.find(m);
    return it == col->second.end() ? std::nullopt : mean_of(it->second);
  };
  auto class_mean = [&](const ColumnKey& key, Method m, int c) -> std::optional<double> {
    auto col = class_cells.find(key);
    if (col == class_cells.end()) return std::nullopt;
    auto it = col->second.find(m);
    if (it == col->second.end()) return std::nullopt;
    std::vector<double> v;
    for (const auto& per : it->second) {
      if (c < static_cast<int>(per.size()) && per[c]) v.push_back(*per[c]);
    }
    return mean_of(v);
  };
  std::vector<Method> present;
  for (Method m : methods) {
    for (const auto& [key, by_method] : cells) {
      if (by_method.count(m)) {
        present.push_back(m);
        break;
      }
    }
  }

  std::ostringstream out;
  if (format == ReportFormat::kCsv) {
    out << "method,k_labeled,subject_mode,seed,class,iou\n";
    for (const Summary& s : runs) {
      const std::string prefix = to_string(s.info.method) + "," + std::to_string(s.info.k) + "," +
                                 to_string(s.info.subject_mode) + "," + std::to_string(s.info.seed) + ",";
      for (std::size_t c = 0; c < s.best_iou.size(); ++c) {
        if (s.best_iou[c]) out << prefix << class_name(static_cast<int>(c)) << "," << pct(*s.best_iou[c]) << "\n";
      }
      out << prefix << "mean," << pct(s.best_miou) << "\n";
    }
    return out.str();
  }
  if (format == ReportFormat::kPlotData) {
    out << "k,method,mean_iou\n";
    for (const auto& [key, by_method] : cells) {
      for (Method m : methods) {
        if (auto v = mean_cell(key, m)) out << key.k << "," << to_string(m) << "," << pct(*v) << "\n";
      }
    }
    return out.str();
  }

  // Plain-text table.
  const std::size_t label_width = 16;
  const std::size_t cell_width = 16;
  auto pad = [](std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
  };
  auto emit_row = [&](const std::string& label, const std::vector<std::string>& values) {
    out << pad(label, label_width);
    for (const auto& v : values) out << "| " << pad(v, cell_width);
    out << "\n";
  };
  std::vector<std::string> header;
  for (const auto& entry : cells) header.push_back(column_label(entry.first));

  out << "Best validation mIoU (%), mean over seeds\n";
  emit_row("X_l", header);
  for (Method m : present) {
    std::vector<std::string> row;
    for (const auto& entry : cells) {
      auto v = mean_cell(entry.first, m);
      row.push_back(v ? pct(*v) : "-");
    }
    emit_row(to_string(m), row);
  }
  if (std::find(present.begin(), present.end(), Method::kSL) != present.end()) {
    for (Method m : {Method::kSSL_D, Method::kSSL_SS}) {
      if (std::find(present.begin(), present.end(), m) == present.end()) continue;
      std::vector<std::string> row;
      for (const auto& entry : cells) {
        auto base = mean_cell(entry.first, Method::kSL);
        auto v = mean_cell(entry.first, m);
        row.push_back(base && v && *base > 0.0 ? pct_change(*base, *v) : "-");
      }
      emit_row("% " + to_string(m) + " vs SL", row);
    }
  }

  const int pupil = static_cast<int>(EyeClass::kPupil);
  const int iris = static_cast<int>(EyeClass::kIris);
  if (static_cast<int>(num_classes) > pupil) {
    out << "\nPupil (iris) IoU (%), mean over seeds\n";
    emit_row("X_l", header);
    for (Method m : present) {
      std::vector<std::string> row;
      for (const auto& entry : cells) {
        auto pu = class_mean(entry.first, m, pupil);
        auto ir = class_mean(entry.first, m, iris);
        if (!pu && !ir) {
          row.push_back("-");
        } else {
          row.push_back((pu ? pct(*pu) : "-") + " (" + (ir ? pct(*ir) : "-") + ")");
        }
      }
      emit_row(to_string(m), row);
    }
  }
  return out.str();
}

void write_reports(std::span<const History> histories, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const std::pair<ReportFormat, const char*> outputs[] = {
      {ReportFormat::kTable, "report.txt"}, {ReportFormat::kCsv, "report.csv"}, {ReportFormat::kPlotData, "plot.csv"}};
  for (const auto& [fmt, name] : outputs) {
    std::ofstream out(out_dir / name);
    if (!out) throw IoError((out_dir / name).string(), "cannot open for writing");
    out << render_report(histories, fmt);
  }
}

Rgb class_color(int c) {
  switch (c) {
    case 0: return {40, 40, 160};
    case 1: return {0, 200, 0};
    case 2: return {230, 200, 0};
    case 3: return {220, 0, 0};
    default: return {200, 0, 200};
  }
}

Tensor<std::uint8_t> overlay_rgb(const EyeImage& image, const LabelMask& pred) {
  if (!pred.classes.same_plane_shape(image.height(), image.width())) {
    throw ShapeError("overlay: image and mask shapes differ");
  }
  Tensor<std::uint8_t> out(3, image.height(), image.width());
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      const double gray = 255.0 * image.pixels(0, y, x);
      const Rgb col = class_color(pred.at(y, x));
      const std::uint8_t rgb[3] = {col.r, col.g, col.b};
      for (int ch = 0; ch < 3; ++ch) {
        const double v = (1.0 - kOverlayAlpha) * gray + kOverlayAlpha * rgb[ch];
        out(ch, y, x) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return out;
}

void overlay_masks(const EyeImage& image, const LabelMask& pred, const std::filesystem::path& path) {
  write_rgb8(path, overlay_rgb(image, pred));
}

}  // namespace eyessl
