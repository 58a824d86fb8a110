#include "eyessl/types.hpp"

#include <cmath>

#include "eyessl/errors.hpp"

namespace eyessl {

std::string class_name(int c) {
  switch (c) {
    case 0: return "background";
    case 1: return "sclera";
    case 2: return "iris";
    case 3: return "pupil";
    default: return "class" + std::to_string(c);
  }
}

void EyeImage::validate() const {
  if (pixels.channels() != 1) {
    throw ValidationError("image " + frame_id + ": expected 1 channel, got " +
                          std::to_string(pixels.channels()));
  }
  if (pixels.height() < 8 || pixels.width() < 8) {
    throw ValidationError("image " + frame_id + ": spatial size below 8x8");
  }
  for (float v : pixels.values()) {
    if (!(v >= 0.0f && v <= 1.0f)) {
      throw ValidationError("image " + frame_id + ": pixel value outside [0,1]");
    }
  }
}

void LabelMask::validate() const {
  if (classes.channels() != 1) throw ValidationError("mask: expected 1 channel");
  if (num_classes < 1 || num_classes > 255) throw ValidationError("mask: bad class count");
  for (std::uint8_t v : classes.values()) {
    if (v >= num_classes) {
      throw ValidationError("mask: class index " + std::to_string(v) + " >= P=" +
                            std::to_string(num_classes));
    }
  }
}

void SoftPrediction::validate(double tolerance, const Tensor<float>* support) const {
  const std::size_t n = probs.plane_size();
  for (std::size_t i = 0; i < n; ++i) {
    if (support != nullptr && (*support)[i] <= 0.99f) continue;
    double sum = 0.0;
    for (int c = 0; c < probs.channels(); ++c) {
      const float v = probs[c * n + i];
      if (!(v >= -tolerance && v <= 1.0 + tolerance)) {
        throw ValidationError("prediction value outside [0,1]");
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > tolerance) {
      throw ValidationError("prediction channels do not sum to 1 at pixel " + std::to_string(i));
    }
  }
}

EyeImage make_image(Tensor<float> pixels, std::string frame_id,
                    std::optional<std::string> subject_id) {
  EyeImage img{std::move(pixels), std::move(subject_id), std::move(frame_id)};
  img.validate();
  return img;
}

LabelMask make_mask(int height, int width, int num_classes) {
  return LabelMask{Tensor<std::uint8_t>(1, height, width, 0), num_classes};
}

SoftPrediction one_hot(const LabelMask& mask) {
  SoftPrediction out{Tensor<float>(mask.num_classes, mask.height(), mask.width(), 0.0f)};
  const std::size_t n = mask.classes.plane_size();
  for (std::size_t i = 0; i < n; ++i) out.probs[mask.classes[i] * n + i] = 1.0f;
  return out;
}

LabelMask argmax(const SoftPrediction& pred) {
  LabelMask out = make_mask(pred.height(), pred.width(), pred.num_classes());
  const std::size_t n = pred.probs.plane_size();
  for (std::size_t i = 0; i < n; ++i) {
    int best = 0;
    for (int c = 1; c < pred.num_classes(); ++c) {
      if (pred.probs[c * n + i] > pred.probs[best * n + i]) best = c;
    }
    out.classes[i] = static_cast<std::uint8_t>(best);
  }
  return out;
}

}  // namespace eyessl
