#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "eyessl/augment.hpp"
#include "eyessl/config.hpp"
#include "eyessl/evaluation.hpp"
#include "eyessl/losses.hpp"
#include "eyessl/network.hpp"
#include "eyessl/random.hpp"
#include "eyessl/types.hpp"

namespace eyessl {

// Guessed targets for a set of unlabeled items. Everything here is a plain
// value computed from forward passes; nothing feeds back into gradients.
struct GuessedBatch {
  std::vector<std::vector<EyeImage>> copies;             // [item][copy], photometric copies
  std::vector<SoftPrediction> guessed;                   // one per item
  std::vector<std::vector<SpatialTransform>> transforms; // [item][copy], inverse-transform guesses only
  std::vector<ValidityMask> validity;                    // one per item
};

struct MixedBatch {
  std::vector<LabeledItem> labeled;
  std::vector<EyeImage> unlabeled;
  // True when the unlabeled slot was drawn from the labeled pool. Its mask is
  // never copied into the batch.
  std::vector<bool> unlabeled_from_labeled;
};

// Photometric copies for every item: all copies of all items draw their
// parameters before any spatial transform is drawn.
std::vector<std::vector<EyeImage>> make_domain_copies(std::span<const EyeImage> items, int A, RandomStream& rng,
                                                      const AugmentConfig& aug = {});

/// Per-pixel mean of the predictions, then optional sharpening (temperature 1
/// leaves the mean untouched).
SoftPrediction average_predictions(std::span<const SoftPrediction> preds, double temperature = 1.0);

/// Mean of the model outputs on A photometric copies of each item.
GuessedBatch guess_labels_D(const Model& model, std::span<const EyeImage> items, int A, RandomStream& rng,
                            const AugmentConfig& aug = {}, double temperature = 1.0);
GuessedBatch guess_labels_D(const Model& model, const EyeImage& item, int A, RandomStream& rng,
                            const AugmentConfig& aug = {}, double temperature = 1.0);

/// Mean over copies of T^-1(f(T(copy))), with per-item validity the mean of
/// the per-copy validities.
GuessedBatch guess_labels_SS(const Model& model, std::span<const EyeImage> items, int A, RandomStream& rng,
                             const AugmentConfig& aug = {}, double temperature = 1.0);
GuessedBatch guess_labels_SS(const Model& model, const EyeImage& item, int A, RandomStream& rng,
                             const AugmentConfig& aug = {}, double temperature = 1.0);

/// Inverse-transform guess for one item from its copies and per-copy transforms.
std::pair<SoftPrediction, ValidityMask> guess_from_transforms(const Model& model, std::span<const EyeImage> copies,
                                                              std::span<const SpatialTransform> transforms,
                                                              double temperature = 1.0);

/// Labeled slots: uniform with replacement from pool.labeled. Unlabeled slots:
/// uniform over labeled images followed by unlabeled images. Every item then
/// gets basic_augment.
MixedBatch assemble_batch(const DatasetPool& pool, const TrainConfig& cfg, RandomStream& rng);

class Adam {
 public:
  Adam(std::size_t num_params, double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
       double epsilon = 1e-8);
  explicit Adam(std::size_t num_params, const TrainConfig& cfg);

  void step(std::span<float> params, std::span<const float> grad);
  long steps() const { return t_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<float> m_, v_;
};

struct StepReport {
  double l_sup = 0.0;
  std::optional<double> l_u;
  std::optional<double> l_ss;
  double total = 0.0;
  LossWeights weights;
};

/// Loss values of one step plus their gradient accumulated into `grad`.
/// `guess_model` (default: `model`) produces the guessed labels.
StepReport compute_step_gradients(const Model& model, const MixedBatch& batch, int epoch, const TrainConfig& cfg,
                                  RandomStream& rng, std::span<float> grad, const Model* guess_model = nullptr);

/// compute_step_gradients followed by one Adam update. Throws NumericError
/// naming the loss term that became non-finite.
StepReport train_step(Model& model, Adam& optimizer, const MixedBatch& batch, int epoch, const TrainConfig& cfg,
                      RandomStream& rng, const Model* guess_model = nullptr);

/// ceil((k + m) / (batch_labeled + batch_unlabeled)).
int steps_per_epoch(const DatasetPool& pool, const TrainConfig& cfg);

struct TrainOptions {
  std::optional<std::filesystem::path> checkpoint_path;  // best-so-far model
  std::function<void(const EpochRecord&)> on_epoch;
  std::optional<int> max_steps_per_epoch;  // truncates epochs (smoke tests)
};

struct TrainResult {
  Model model;
  History history;
};

/// cfg.epochs epochs over `pool`; validation mIoU selects the returned model.
TrainResult train(const DatasetPool& pool, std::span<const LabeledItem> validation, const TrainConfig& cfg,
                  const TrainOptions& options = {});

}  // namespace eyessl
