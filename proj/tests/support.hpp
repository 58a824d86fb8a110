#pragma once

#include <filesystem>
#include <string>

#include "eyessl/log.hpp"
#include "eyessl/random.hpp"
#include "eyessl/types.hpp"

namespace eyessl::testing {

inline EyeImage random_image(int h, int w, RandomStream& rng, const std::string& id = "img") {
  Tensor<float> px(1, h, w);
  for (float& v : px.values()) v = static_cast<float>(rng.uniform());
  return make_image(std::move(px), id);
}

inline LabelMask random_mask(int h, int w, int classes, RandomStream& rng) {
  LabelMask m = make_mask(h, w, classes);
  for (auto& v : m.classes.values()) v = static_cast<std::uint8_t>(rng.index(classes));
  return m;
}

inline SoftPrediction random_prediction(int classes, int h, int w, RandomStream& rng) {
  SoftPrediction p{Tensor<float>(classes, h, w)};
  const std::size_t n = p.probs.plane_size();
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int c = 0; c < classes; ++c) sum += p.probs[c * n + i] = static_cast<float>(rng.uniform(0.05, 1.0));
    for (int c = 0; c < classes; ++c) p.probs[c * n + i] = static_cast<float>(p.probs[c * n + i] / sum);
  }
  return p;
}

// Fresh, empty scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("eyessl_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Silences log output for the lifetime of the object, optionally counting warnings.
class QuietLog {
 public:
  QuietLog() {
    previous_ = set_log_sink([this](LogLevel level, const std::string&) {
      if (level == LogLevel::kWarning) ++warnings;
    });
  }
  ~QuietLog() { set_log_sink(previous_); }
  int warnings = 0;

 private:
  LogSink previous_;
};

}  // namespace eyessl::testing
