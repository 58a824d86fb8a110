#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "eyessl/tensor.hpp"

namespace eyessl {

inline constexpr int kDefaultNumClasses = 4;

// Channel order of every P-channel grid in the library.
enum class EyeClass : std::uint8_t { kBackground = 0, kSclera = 1, kIris = 2, kPupil = 3 };

std::string class_name(int c);

/// Single-channel near-IR eye image with intensities in [0, 1].
struct EyeImage {
  Tensor<float> pixels;
  std::optional<std::string> subject_id;
  std::string frame_id;

  int height() const { return pixels.height(); }
  int width() const { return pixels.width(); }

  /// Throws ValidationError when the image is not 1 x H x W with H, W >= 8
  /// and all values in [0, 1].
  void validate() const;
};

/// Hard per-pixel class indices.
struct LabelMask {
  Tensor<std::uint8_t> classes;
  int num_classes = kDefaultNumClasses;

  int height() const { return classes.height(); }
  int width() const { return classes.width(); }
  std::uint8_t at(int y, int x) const { return classes(0, y, x); }
  void validate() const;
};

/// P x H x W per-pixel probability simplex.
struct SoftPrediction {
  Tensor<float> probs;

  int num_classes() const { return probs.channels(); }
  int height() const { return probs.height(); }
  int width() const { return probs.width(); }

  /// Checks range and per-pixel channel sums; pixels where `support` (if
  /// given) is <= 0.99 are skipped.
  void validate(double tolerance = 1e-5, const Tensor<float>* support = nullptr) const;
};

struct LabeledItem {
  EyeImage image;
  LabelMask mask;
};

struct DatasetPool {
  std::vector<LabeledItem> labeled;
  std::vector<EyeImage> unlabeled;

  std::size_t k() const { return labeled.size(); }
  std::size_t m() const { return unlabeled.size(); }
};

EyeImage make_image(Tensor<float> pixels, std::string frame_id,
                    std::optional<std::string> subject_id = std::nullopt);
LabelMask make_mask(int height, int width, int num_classes = kDefaultNumClasses);

SoftPrediction one_hot(const LabelMask& mask);
LabelMask argmax(const SoftPrediction& pred);

}  // namespace eyessl
