#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "eyessl/config.hpp"
#include "eyessl/random.hpp"
#include "eyessl/tensor.hpp"
#include "eyessl/types.hpp"

namespace eyessl {

struct ModelSpec {
  int depth = 5;           // encoder/decoder levels
  int base_channels = 32;  // channels at full resolution, doubled per level
  int num_classes = kDefaultNumClasses;
  int height = 240;
  int width = 320;

  static ModelSpec full(int num_classes = kDefaultNumClasses) { return {5, 32, num_classes, 240, 320}; }
  static ModelSpec desk(int num_classes = kDefaultNumClasses) { return {3, 8, num_classes, 64, 96}; }

  /// Spatial size must be divisible by 2^(depth-1).
  void validate() const;
  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

ModelSpec model_spec_from_config(const TrainConfig& cfg);

// Encoder-decoder segmentation network: per level two 3x3 conv + ReLU, 2x2 max
// pooling between encoder levels, nearest upsampling and skip concatenation
// in the decoder, a 1x1 head and a softmax over classes. Backward is written
// by hand; T = double exists for finite-difference checks.
template <typename T>
class SegmentationNet {
 public:
  struct ConvLayer {
    int in_channels;
    int out_channels;
    int kernel;  // 3 or 1
    bool relu;
    std::size_t weight_offset;
    std::size_t bias_offset;
  };

  // Activations retained by forward_trace for backward.
  struct Trace {
    std::vector<Tensor<T>> conv_inputs;
    std::vector<Tensor<T>> conv_outputs;
    std::vector<std::vector<int>> pool_argmax;
    Tensor<T> probs;
  };

  explicit SegmentationNet(const ModelSpec& spec);

  const ModelSpec& spec() const { return spec_; }
  const std::vector<ConvLayer>& layers() const { return layers_; }
  std::size_t num_params() const { return params_.size(); }
  std::span<T> params() { return params_; }
  std::span<const T> params() const { return params_; }

  /// image: 1 x H x W; returns P x H x W probabilities.
  Tensor<T> forward(const Tensor<T>& image) const;
  Trace forward_trace(const Tensor<T>& image) const;
  /// Accumulates dLoss/dparams into `grad` given dLoss/dprobs.
  void backward(const Trace& trace, const Tensor<T>& grad_probs, std::span<T> grad) const;

  template <typename U>
  SegmentationNet<U> cast() const {
    SegmentationNet<U> out(spec_);
    for (std::size_t i = 0; i < params_.size(); ++i) out.params()[i] = static_cast<U>(params_[i]);
    return out;
  }

 private:
  Tensor<T> run(const Tensor<T>& image, Trace* trace) const;

  ModelSpec spec_;
  std::vector<ConvLayer> layers_;
  std::vector<T> params_;
};

extern template class SegmentationNet<float>;
extern template class SegmentationNet<double>;

using Model = SegmentationNet<float>;

/// He-normal weights (std sqrt(2 / fan_in)), zero biases.
Model init_params(const ModelSpec& spec, RandomStream& rng);

SoftPrediction forward(const Model& model, const EyeImage& image);
std::vector<SoftPrediction> forward(const Model& model, std::span<const EyeImage> batch);

struct Checkpoint {
  ModelSpec spec;
  std::string config_hash;
  std::string config_text;
  std::vector<float> params;
};

// Binary layout: 8-byte magic "EYSSLCK1", u32 metadata length, JSON metadata
// (spec, config hash, config text, parameter count), then the parameters as
// little-endian float32.
void save_checkpoint(const std::filesystem::path& path, const Model& model, const TrainConfig& cfg);
Checkpoint read_checkpoint(const std::filesystem::path& path);
/// Reads and verifies the stored hash against `expected` (when given) and
/// against the embedded config text.
Model load_checkpoint(const std::filesystem::path& path,
                      const std::optional<TrainConfig>& expected = std::nullopt);

}  // namespace eyessl
