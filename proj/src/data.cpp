#include "eyessl/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>

#include <json.hpp>

#include "eyessl/errors.hpp"
#include "eyessl/image_io.hpp"
#include "eyessl/network.hpp"

namespace eyessl {
namespace fs = std::filesystem;

namespace {

struct FrameFile {
  std::optional<std::string> subject;
  std::string stem;
  fs::path image;
};

std::vector<FrameFile> list_frames(const fs::path& images_dir) {
  std::vector<FrameFile> frames;
  for (const auto& entry : fs::recursive_directory_iterator(images_dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".png") continue;
    const fs::path rel = fs::relative(entry.path(), images_dir);
    FrameFile f;
    f.image = entry.path();
    f.stem = rel.stem().string();
    if (rel.has_parent_path()) f.subject = rel.parent_path().generic_string();
    frames.push_back(std::move(f));
  }
  std::sort(frames.begin(), frames.end(), [](const FrameFile& a, const FrameFile& b) {
    return std::tie(a.subject, a.stem) < std::tie(b.subject, b.stem);
  });
  return frames;
}

std::string frame_key(const std::optional<std::string>& subject, const std::string& stem) {
  return subject ? *subject + "/" + stem : stem;
}

template <typename T>
void shuffle(std::vector<T>& v, RandomStream& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.index(i)]);
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

Tensor<std::uint8_t> to_gray8(const EyeImage& image) {
  Tensor<std::uint8_t> out(1, image.height(), image.width());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(std::lround(std::clamp(image.pixels[i], 0.0f, 1.0f) * 255.0f));
  }
  return out;
}

DatasetPool ingest_directory(const fs::path& dir, const IngestOptions& options) {
  const fs::path images_dir = dir / "images";
  const fs::path labels_dir = dir / "labels";
  if (!fs::is_directory(images_dir)) throw IoError(images_dir.string(), "missing images directory");
  DatasetPool pool;
  for (const FrameFile& f : list_frames(images_dir)) {
    const Tensor<std::uint8_t> raw = read_gray8(f.image);
    const Tensor<std::uint8_t> sized = resize(raw, options.height, options.width, Interpolation::kBilinear);
    Tensor<float> pixels(1, options.height, options.width);
    for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = sized[i] / 255.0f;
    EyeImage image = make_image(std::move(pixels), frame_key(f.subject, f.stem), f.subject);

    const fs::path label_path = labels_dir / fs::relative(f.image, images_dir);
    if (!fs::exists(label_path)) {
      pool.unlabeled.push_back(std::move(image));
      continue;
    }
    const Tensor<std::uint8_t> raw_mask = read_gray8(label_path);
    if (!raw_mask.same_plane_shape(raw.height(), raw.width())) {
      throw IoError(label_path.string(), "label size differs from its image");
    }
    LabelMask mask{resize(raw_mask, options.height, options.width, Interpolation::kNearest), options.num_classes};
    try {
      mask.validate();
    } catch (const ValidationError& e) {
      throw ValidationError(label_path.string() + ": " + e.what());
    }
    pool.labeled.push_back({std::move(image), std::move(mask)});
  }
  return pool;
}

IngestedData ingest(const fs::path& root, const IngestOptions& options) {
  if (!fs::is_directory(root)) throw IoError(root.string(), "dataset root does not exist");
  IngestedData data;
  if (fs::is_directory(root / "train")) {
    data.train = ingest_directory(root / "train", options);
    if (fs::is_directory(root / "validation")) {
      DatasetPool val = ingest_directory(root / "validation", options);
      if (!val.unlabeled.empty()) {
        throw ValidationError((root / "validation").string() + ": every validation frame needs a label");
      }
      data.validation = std::move(val.labeled);
    }
  } else {
    data.train = ingest_directory(root, options);
  }
  return data;
}

void write_dataset(const fs::path& dir, const DatasetPool& pool) {
  auto rel = [](const EyeImage& img) {
    // frame_id already carries "<subject>/" when a subject is known.
    return fs::path(img.frame_id + ".png");
  };
  for (const LabeledItem& item : pool.labeled) {
    write_gray8(dir / "images" / rel(item.image), to_gray8(item.image));
    write_gray8(dir / "labels" / rel(item.image), item.mask.classes);
  }
  for (const EyeImage& img : pool.unlabeled) write_gray8(dir / "images" / rel(img), to_gray8(img));
}

DatasetPool make_split(const DatasetPool& pool, const SplitSpec& spec) {
  if (spec.k < 1) throw ValidationError("split: k must be >= 1");
  if (static_cast<std::size_t>(spec.k) > pool.labeled.size()) {
    throw ValidationError("split: k=" + std::to_string(spec.k) + " exceeds the " +
                          std::to_string(pool.labeled.size()) + " labeled frames available");
  }
  RandomStream rng(spec.seed);

  std::vector<std::string> subjects;
  std::map<std::string, std::vector<std::size_t>> frames_of;
  for (std::size_t i = 0; i < pool.labeled.size(); ++i) {
    const std::string s = pool.labeled[i].image.subject_id.value_or("");
    if (!frames_of.count(s)) subjects.push_back(s);
    frames_of[s].push_back(i);
  }

  std::vector<std::size_t> chosen;
  if (spec.mode == SplitMode::kSingleSubject) {
    std::string subject;
    if (spec.subject) {
      if (!frames_of.count(*spec.subject)) throw ValidationError("split: unknown subject '" + *spec.subject + "'");
      subject = *spec.subject;
    } else {
      std::vector<std::string> eligible;
      for (const auto& s : subjects) {
        if (frames_of[s].size() >= static_cast<std::size_t>(spec.k)) eligible.push_back(s);
      }
      if (eligible.empty()) throw ValidationError("split: no subject has k=" + std::to_string(spec.k) + " frames");
      subject = eligible[rng.index(eligible.size())];
    }
    std::vector<std::size_t> frames = frames_of[subject];
    if (frames.size() < static_cast<std::size_t>(spec.k)) {
      throw ValidationError("split: subject '" + subject + "' has only " + std::to_string(frames.size()) +
                            " frames, k=" + std::to_string(spec.k));
    }
    shuffle(frames, rng);
    chosen.assign(frames.begin(), frames.begin() + spec.k);
  } else {
    std::vector<std::string> order = subjects;
    shuffle(order, rng);
    std::map<std::string, std::vector<std::size_t>> remaining;
    for (const auto& s : order) {
      remaining[s] = frames_of[s];
      shuffle(remaining[s], rng);
    }
    auto take = [&](const std::string& s) {
      auto& frames = remaining[s];
      if (frames.empty()) return false;
      chosen.push_back(frames.back());
      frames.pop_back();
      return true;
    };
    const int per_subject = spec.k / static_cast<int>(order.size());
    for (const auto& s : order) {
      for (int i = 0; i < per_subject; ++i) take(s);
    }
    // Remainder (and any shortfall from small subjects): one frame per
    // subject in the shuffled order, cycling until k frames are chosen.
    while (chosen.size() < static_cast<std::size_t>(spec.k)) {
      bool progressed = false;
      for (const auto& s : order) {
        if (chosen.size() == static_cast<std::size_t>(spec.k)) break;
        progressed |= take(s);
      }
      if (!progressed) break;
    }
  }
  std::sort(chosen.begin(), chosen.end());

  DatasetPool out;
  std::vector<bool> is_chosen(pool.labeled.size(), false);
  for (std::size_t i : chosen) {
    is_chosen[i] = true;
    out.labeled.push_back(pool.labeled[i]);
  }
  for (std::size_t i = 0; i < pool.labeled.size(); ++i) {
    if (!is_chosen[i]) out.unlabeled.push_back(pool.labeled[i].image);
  }
  out.unlabeled.insert(out.unlabeled.end(), pool.unlabeled.begin(), pool.unlabeled.end());
  return out;
}

std::string split_manifest(const DatasetPool& split, const SplitSpec& spec, std::span<const LabeledItem> validation) {
  nlohmann::ordered_json j;
  j["seed"] = spec.seed;
  j["mode"] = to_string(spec.mode);
  j["subject"] = spec.subject ? nlohmann::ordered_json(*spec.subject) : nlohmann::ordered_json(nullptr);
  j["k"] = spec.k;
  auto& labeled = j["labeled"] = nlohmann::ordered_json::array();
  for (const auto& item : split.labeled) labeled.push_back(item.image.frame_id);
  auto& unlabeled = j["unlabeled"] = nlohmann::ordered_json::array();
  for (const auto& img : split.unlabeled) unlabeled.push_back(img.frame_id);
  auto& val = j["validation"] = nlohmann::ordered_json::array();
  for (const auto& item : validation) val.push_back(item.image.frame_id);
  return j.dump(2) + "\n";
}

bool Ellipse::contains(double x, double y) const {
  const double dx = x - cx;
  const double dy = y - cy;
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  const double u = (c * dx + s * dy) / ax;
  const double v = (-s * dx + c * dy) / ay;
  return u * u + v * v <= 1.0;
}

bool Ellipse::encloses(const Ellipse& inner, int samples) const {
  const double c = std::cos(inner.angle);
  const double s = std::sin(inner.angle);
  for (int i = 0; i < samples; ++i) {
    const double t = 2.0 * std::numbers::pi * i / samples;
    const double u = inner.ax * std::cos(t);
    const double v = inner.ay * std::sin(t);
    if (!contains(inner.cx + c * u - s * v, inner.cy + s * u + c * v)) return false;
  }
  return true;
}

LabeledItem render_eye(const SyntheticEyeParams& p, const std::string& frame_id, const std::string& subject_id,
                       RandomStream& rng) {
  const int h = p.height;
  const int w = p.width;
  const double lid_top = p.sclera.cy - p.sclera.ay + p.eyelid * 2.0 * p.sclera.ay;
  auto lid_y = [&](double x) {
    const double u = (x - p.sclera.cx) / p.sclera.ax;
    return lid_top + 0.35 * p.sclera.ay * u * u;
  };
  auto classify = [&](double x, double y) -> int {
    if (y < lid_y(x)) return 0;
    if (p.pupil.contains(x, y)) return 3;
    if (p.iris.contains(x, y)) return 2;
    if (p.sclera.contains(x, y)) return 1;
    return 0;
  };
  auto level = [&](int cls, double x, double y) {
    switch (cls) {
      case 3: return p.pupil_level;
      case 2: {
        const double ang = std::atan2(y - p.iris.cy, x - p.iris.cx);
        return p.iris_level + 0.04 * std::sin(9.0 * ang);
      }
      case 1: return p.sclera_level;
      default: return p.skin_level;
    }
  };

  Tensor<float> pixels(1, h, w);
  LabelMask mask = make_mask(h, w);
  const double gx = p.iris.cx - 0.3 * p.pupil.ax;
  const double gy = p.iris.cy - 0.3 * p.pupil.ay;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      mask.classes(0, y, x) = static_cast<std::uint8_t>(classify(x, y));
      double v = 0.0;
      for (int sy = 0; sy < 2; ++sy) {
        for (int sx = 0; sx < 2; ++sx) {
          const double px = x - 0.25 + 0.5 * sx;
          const double py = y - 0.25 + 0.5 * sy;
          v += 0.25 * level(classify(px, py), px, py);
        }
      }
      v += p.shading * (x - w / 2.0) / w;
      if (p.glint && mask.at(y, x) != 0) {
        const double d2 = (x - gx) * (x - gx) + (y - gy) * (y - gy);
        v = std::max(v, std::exp(-d2 / 2.0));
      }
      v = std::pow(clamp01(p.exposure * v), p.contrast_gamma);
      pixels(0, y, x) = static_cast<float>(clamp01(v + rng.normal(0.0, p.noise)));
    }
  }
  return {make_image(std::move(pixels), frame_id, subject_id), std::move(mask)};
}

std::vector<LabeledItem> generate_synthetic(int n, RandomStream& rng, const SyntheticSpec& spec) {
  if (n < 1) throw ParameterError("generate_synthetic: n must be >= 1");
  if (spec.num_subjects < 1) throw ParameterError("generate_synthetic: need at least one subject");
  const double h = spec.height;
  const double w = spec.width;
  std::vector<LabeledItem> out;
  out.reserve(n);
  for (int s = 0; s < spec.num_subjects; ++s) {
    const int frames = n / spec.num_subjects + (s < n % spec.num_subjects ? 1 : 0);
    if (frames == 0) continue;
    char sid[32];
    std::snprintf(sid, sizeof(sid), "%s%02d", spec.subject_prefix.c_str(), s);

    // Subject-level geometry and photometry.
    SyntheticEyeParams base;
    base.height = spec.height;
    base.width = spec.width;
    base.sclera = {w / 2.0 + rng.uniform(-0.06, 0.06) * w, h / 2.0 + rng.uniform(-0.06, 0.06) * h,
                   rng.uniform(0.30, 0.40) * w, rng.uniform(0.20, 0.27) * h, rng.uniform(-0.12, 0.12)};
    const double iris_r = rng.uniform(0.62, 0.80) * base.sclera.ay;
    const double iris_aspect = rng.uniform(0.88, 1.0);
    const double pupil_ratio = rng.uniform(0.32, 0.50);
    base.skin_level = rng.uniform(0.40, 0.75);
    base.sclera_level = std::min(0.97, base.skin_level + rng.uniform(0.08, 0.28));
    base.iris_level = rng.uniform(0.18, 0.50);
    base.pupil_level = rng.uniform(0.02, 0.14);
    base.exposure = rng.uniform(0.85, 1.1);
    base.contrast_gamma = std::exp(rng.uniform(std::log(0.55), std::log(1.8)));
    base.shading = rng.uniform(-0.15, 0.15);

    for (int f = 0; f < frames; ++f) {
      SyntheticEyeParams p = base;
      const double shift_x = rng.uniform(-0.04, 0.04) * w;
      const double shift_y = rng.uniform(-0.04, 0.04) * h;
      p.sclera.cx += shift_x;
      p.sclera.cy += shift_y;
      const double r = iris_r * rng.uniform(0.96, 1.04);
      p.iris = {0, 0, r * iris_aspect, r, rng.uniform(-0.2, 0.2)};
      double gaze_x = rng.uniform(-0.55, 0.55) * (p.sclera.ax - r);
      double gaze_y = rng.uniform(-0.4, 0.4) * (p.sclera.ay - r);
      for (int attempt = 0; attempt < 40; ++attempt) {
        p.iris.cx = p.sclera.cx + gaze_x;
        p.iris.cy = p.sclera.cy + gaze_y;
        if (p.sclera.encloses(p.iris)) break;
        gaze_x *= 0.8;
        gaze_y *= 0.8;
      }
      if (!p.sclera.encloses(p.iris)) {
        p.iris.cx = p.sclera.cx;
        p.iris.cy = p.sclera.cy;
        p.iris.ax = p.iris.ay = 0.9 * std::min(p.sclera.ax, p.sclera.ay);
      }
      const double pr = pupil_ratio * rng.uniform(0.85, 1.15) * p.iris.ay;
      p.pupil = {p.iris.cx + rng.uniform(-0.08, 0.08) * p.iris.ax, p.iris.cy + rng.uniform(-0.08, 0.08) * p.iris.ay,
                 pr, pr * rng.uniform(0.92, 1.0), 0.0};
      if (!p.iris.encloses(p.pupil)) {
        p.pupil.cx = p.iris.cx;
        p.pupil.cy = p.iris.cy;
        p.pupil.ax = p.pupil.ay = 0.5 * std::min(p.iris.ax, p.iris.ay);
      }
      p.eyelid = rng.bernoulli(0.7) ? rng.uniform(0.0, 0.3) : rng.uniform(0.3, 0.5);
      p.noise = rng.uniform(0.01, 0.04);
      p.skin_level = clamp01(base.skin_level + rng.uniform(-0.03, 0.03));
      p.glint = rng.bernoulli(0.8);

      char fid[64];
      std::snprintf(fid, sizeof(fid), "%s/f%03d", sid, f);
      out.push_back(render_eye(p, fid, sid, rng));
    }
  }
  return out;
}

ExperimentData prepare_data(const TrainConfig& cfg) {
  const ModelSpec spec = model_spec_from_config(cfg);
  ExperimentData data;
  if (cfg.data_source == DataSource::kSynthetic) {
    const RandomStream root = RandomStream(cfg.seed).derive(0xDA7A);
    RandomStream train_rng = root.derive(1);
    RandomStream val_rng = root.derive(2);
    data.pool.labeled =
        generate_synthetic(cfg.synthetic_train, train_rng, {spec.height, spec.width, cfg.synthetic_subjects, "S"});
    data.validation = generate_synthetic(cfg.synthetic_val, val_rng,
                                         {spec.height, spec.width, cfg.synthetic_val_subjects, "V"});
  } else {
    if (!fs::is_directory(cfg.data_root)) {
      throw ConfigError("data_root", "'" + cfg.data_root + "' is not a directory");
    }
    IngestedData in = ingest(cfg.data_root, {spec.height, spec.width, cfg.num_classes});
    if (in.validation.empty()) {
      throw ConfigError("data_root", "'" + cfg.data_root + "' has no validation/ split");
    }
    data.pool = std::move(in.train);
    data.validation = std::move(in.validation);
  }
  if (cfg.k) {
    SplitSpec split{*cfg.k, cfg.split_mode, std::nullopt, cfg.seed};
    if (!cfg.split_subject.empty()) split.subject = cfg.split_subject;
    data.pool = make_split(data.pool, split);
    data.split = split;
  }
  return data;
}

}  // namespace eyessl
