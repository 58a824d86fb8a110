#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace eyessl {

enum class Method { kSL, kSSL_D, kSSL_SS };
enum class ModelPreset { kFull, kDesk };
enum class DataSource { kSynthetic, kDirectory };
enum class SplitMode { kMultiSubject, kSingleSubject };
enum class IouAggregation { kGlobal, kPerImage };

std::string to_string(Method m);
std::string to_string(ModelPreset p);
std::string to_string(DataSource s);
std::string to_string(SplitMode m);
std::string to_string(IouAggregation a);
Method parse_method(std::string_view text);
SplitMode parse_split_mode(std::string_view text);

struct AugmentConfig {
  // Domain-specific (photometric) augmentation grids.
  std::vector<double> gamma_values{0.8, 0.85, 0.9, 0.95, 1.0, 1.05, 1.1, 1.15, 1.2};
  std::vector<double> clahe_clips{1.0, 1.2, 1.5, 1.5, 1.5, 2.0};
  std::vector<int> clahe_grids{2, 4, 8, 8, 8, 16};
  double p_clahe = 1.0;
  double p_gamma = 1.0;

  // Spatial transform T.
  double p_transform = 0.5;
  double p_rotate = 0.5;
  double p_translate = 0.8;
  double max_rotation_deg = 5.0;
  int max_shift_px = 20;

  // Baseline augmentations applied to every sampled item.
  double p_flip = 0.5;
  double p_blur = 0.2;
  double blur_sigma_min = 0.5;
  double blur_sigma_max = 1.5;
  double p_lines = 0.2;

  friend bool operator==(const AugmentConfig&, const AugmentConfig&) = default;
};

struct TrainConfig {
  Method method = Method::kSSL_SS;

  // L_sup = L_CEL * (lambda1 + lambda2 * L_BAL) + lambda3 * L_SL
  double lambda1 = 1.0;
  double lambda2 = 20.0;
  double lambda3 = 1.0;
  int boundary_radius = 1;
  double boundary_weight = 1.0;

  // Unsupervised weight ramps (per epoch) and optional saturation.
  double slope_u = 0.02;
  double slope_ss = 0.002;
  std::optional<double> schedule_cap_u;
  std::optional<double> schedule_cap_ss;
  double sharpen_temperature = 1.0;  // 1 disables sharpening

  int A = 2;
  int batch_labeled = 4;
  int batch_unlabeled = 4;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int epochs = 250;
  std::uint64_t seed = 0;

  int num_classes = 4;
  ModelPreset preset = ModelPreset::kFull;
  std::optional<int> depth;
  std::optional<int> base_channels;
  std::optional<int> height;
  std::optional<int> width;

  AugmentConfig augment;

  DataSource data_source = DataSource::kSynthetic;
  std::string data_root;
  int synthetic_train = 504;
  int synthetic_subjects = 42;
  int synthetic_val = 96;
  int synthetic_val_subjects = 8;
  std::optional<int> k;  // labeled count for the split; absent keeps every label
  SplitMode split_mode = SplitMode::kMultiSubject;
  std::string split_subject;

  IouAggregation iou_aggregation = IouAggregation::kGlobal;
  bool iou_include_background = true;

  /// Throws ValidationError naming the first violated invariant.
  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

// Flat "key: value" text, one entry per line, '#' starts a comment. Keys not
// listed in config_keys() are rejected.
TrainConfig parse_config(std::string_view text);
TrainConfig load_config(const std::filesystem::path& path);
void apply_override(TrainConfig& cfg, std::string_view key, std::string_view value);
// "key=value" form used by the CLI's --set flag.
void apply_override(TrainConfig& cfg, std::string_view assignment);

std::string serialize_config(const TrainConfig& cfg);
std::string config_hash(const TrainConfig& cfg);  // 16 hex digits
std::vector<std::string> config_keys();

}  // namespace eyessl
