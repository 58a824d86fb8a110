#include "eyessl/engine.hpp"

#include <cmath>
#include <cstdio>
#include <unordered_set>

#if defined(__SSE__)
#include <xmmintrin.h>
#endif

#include "eyessl/errors.hpp"
#include "eyessl/log.hpp"

namespace eyessl {
namespace {

void check_finite(double value, const char* term) {
  if (!std::isfinite(value)) throw NumericError(term, "value " + std::to_string(value));
}

void sharpen(SoftPrediction& pred, double temperature) {
  if (temperature == 1.0) return;
  const std::size_t n = pred.probs.plane_size();
  const int p = pred.num_classes();
  const double inv_t = 1.0 / temperature;
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (int c = 0; c < p; ++c) sum += std::pow(pred.probs[c * n + i], inv_t);
    if (sum <= 0.0) continue;
    for (int c = 0; c < p; ++c) {
      pred.probs[c * n + i] = static_cast<float>(std::pow(pred.probs[c * n + i], inv_t) / sum);
    }
  }
}

std::vector<SoftPrediction> forward_all(const Model& model, std::span<const EyeImage> images) {
  return forward(model, images);
}

// Subnormal floats (tiny probabilities and their gradients) slow training
// several-fold; flushing them is deterministic.
class FlushDenormals {
 public:
#if defined(__SSE__)
  FlushDenormals() : saved_(_mm_getcsr()) { _mm_setcsr(saved_ | 0x8040); }
  ~FlushDenormals() { _mm_setcsr(saved_); }

 private:
  unsigned saved_;
#endif
};

}  // namespace

std::vector<std::vector<EyeImage>> make_domain_copies(std::span<const EyeImage> items, int A, RandomStream& rng,
                                                      const AugmentConfig& aug) {
  if (A < 1) throw ParameterError("number of copies A must be >= 1");
  std::vector<std::vector<EyeImage>> copies(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    copies[i].reserve(A);
    for (int a = 0; a < A; ++a) copies[i].push_back(apply_domain_aug(items[i], sample_domain_aug(rng, aug)));
  }
  return copies;
}

SoftPrediction average_predictions(std::span<const SoftPrediction> preds, double temperature) {
  if (preds.empty()) throw ParameterError("average_predictions: no predictions");
  const Tensor<float>& first = preds.front().probs;
  std::vector<double> sum(first.size(), 0.0);
  for (const SoftPrediction& p : preds) {
    if (!p.probs.same_shape(first)) throw ShapeError("average_predictions: shapes differ");
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += p.probs[i];
  }
  SoftPrediction out{Tensor<float>(first.channels(), first.height(), first.width())};
  const double inv = 1.0 / static_cast<double>(preds.size());
  for (std::size_t i = 0; i < sum.size(); ++i) out.probs[i] = static_cast<float>(sum[i] * inv);
  sharpen(out, temperature);
  return out;
}

GuessedBatch guess_labels_D(const Model& model, std::span<const EyeImage> items, int A, RandomStream& rng,
                            const AugmentConfig& aug, double temperature) {
  GuessedBatch out;
  out.copies = make_domain_copies(items, A, rng, aug);
  for (const auto& copies : out.copies) {
    out.guessed.push_back(average_predictions(forward_all(model, copies), temperature));
    out.validity.emplace_back(1, items.front().height(), items.front().width(), 1.0f);
  }
  return out;
}

GuessedBatch guess_labels_D(const Model& model, const EyeImage& item, int A, RandomStream& rng,
                            const AugmentConfig& aug, double temperature) {
  return guess_labels_D(model, std::span<const EyeImage>(&item, 1), A, rng, aug, temperature);
}

std::pair<SoftPrediction, ValidityMask> guess_from_transforms(const Model& model, std::span<const EyeImage> copies,
                                                              std::span<const SpatialTransform> transforms,
                                                              double temperature) {
  if (copies.size() != transforms.size() || copies.empty()) {
    throw ParameterError("guess_from_transforms: need one transform per copy");
  }
  std::vector<SoftPrediction> inverted;
  Tensor<double> validity_sum(1, copies.front().height(), copies.front().width(), 0.0);
  bool any_moved = false;
  for (std::size_t a = 0; a < copies.size(); ++a) {
    any_moved |= !transforms[a].is_identity();
    const SoftPrediction pred = forward(model, apply_spatial(copies[a], transforms[a]));
    auto [back, valid] = invert_spatial(pred, transforms[a]);
    inverted.push_back(std::move(back));
    for (std::size_t i = 0; i < valid.size(); ++i) validity_sum[i] += valid[i];
  }
  ValidityMask validity(1, validity_sum.height(), validity_sum.width());
  for (std::size_t i = 0; i < validity.size(); ++i) {
    validity[i] = static_cast<float>(validity_sum[i] / static_cast<double>(copies.size()));
  }
  SoftPrediction guess = average_predictions(inverted, 1.0);
  if (any_moved) {
    const std::size_t n = guess.probs.plane_size();
    for (std::size_t i = 0; i < n; ++i) {
      if (validity[i] <= kValidThreshold) continue;
      double sum = 0.0;
      for (int c = 0; c < guess.num_classes(); ++c) sum += guess.probs[c * n + i];
      if (sum <= 0.0 || std::abs(sum - 1.0) <= kSimplexSlack) continue;
      for (int c = 0; c < guess.num_classes(); ++c) {
        guess.probs[c * n + i] = static_cast<float>(guess.probs[c * n + i] / sum);
      }
    }
  }
  sharpen(guess, temperature);
  return {std::move(guess), std::move(validity)};
}

GuessedBatch guess_labels_SS(const Model& model, std::span<const EyeImage> items, int A, RandomStream& rng,
                             const AugmentConfig& aug, double temperature) {
  GuessedBatch out;
  out.copies = make_domain_copies(items, A, rng, aug);
  out.transforms.resize(items.size());
  for (auto& ts : out.transforms) {
    for (int a = 0; a < A; ++a) ts.push_back(sample_T(rng, aug));
  }
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto [guess, valid] = guess_from_transforms(model, out.copies[i], out.transforms[i], temperature);
    out.guessed.push_back(std::move(guess));
    out.validity.push_back(std::move(valid));
  }
  return out;
}

GuessedBatch guess_labels_SS(const Model& model, const EyeImage& item, int A, RandomStream& rng,
                             const AugmentConfig& aug, double temperature) {
  return guess_labels_SS(model, std::span<const EyeImage>(&item, 1), A, rng, aug, temperature);
}

MixedBatch assemble_batch(const DatasetPool& pool, const TrainConfig& cfg, RandomStream& rng) {
  if (pool.labeled.empty()) throw ConfigError("k", "the labeled pool is empty");
  MixedBatch batch;
  for (int i = 0; i < cfg.batch_labeled; ++i) {
    const LabeledItem& item = pool.labeled[rng.index(pool.k())];
    auto [img, mask] = basic_augment(item.image, item.mask, rng, cfg.augment);
    batch.labeled.push_back({std::move(img), std::move(*mask)});
  }
  for (int i = 0; i < cfg.batch_unlabeled; ++i) {
    const std::size_t j = rng.index(pool.k() + pool.m());
    const bool from_labeled = j < pool.k();
    const EyeImage& src = from_labeled ? pool.labeled[j].image : pool.unlabeled[j - pool.k()];
    batch.unlabeled.push_back(basic_augment(src, std::nullopt, rng, cfg.augment).first);
    batch.unlabeled_from_labeled.push_back(from_labeled);
  }
  return batch;
}

Adam::Adam(std::size_t num_params, double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon), m_(num_params, 0.0f), v_(num_params, 0.0f) {}

Adam::Adam(std::size_t num_params, const TrainConfig& cfg)
    : Adam(num_params, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon) {}

void Adam::step(std::span<float> params, std::span<const float> grad) {
  if (params.size() != m_.size() || grad.size() != m_.size()) throw ShapeError("Adam: parameter count mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const float b1 = static_cast<float>(beta1_);
  const float b2 = static_cast<float>(beta2_);
  const float step = static_cast<float>(lr_ / c1);
  const float inv_sqrt_c2 = static_cast<float>(1.0 / std::sqrt(c2));
  const float eps = static_cast<float>(eps_);
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = b1 * m_[i] + (1.0f - b1) * grad[i];
    v_[i] = b2 * v_[i] + (1.0f - b2) * grad[i] * grad[i];
    params[i] -= step * m_[i] / (std::sqrt(v_[i]) * inv_sqrt_c2 + eps);
  }
}

StepReport compute_step_gradients(const Model& model, const MixedBatch& batch, int epoch, const TrainConfig& cfg,
                                  RandomStream& rng, std::span<float> grad, const Model* guess_model) {
  if (grad.size() != model.num_params()) throw ShapeError("gradient buffer size differs from parameter count");
  if (batch.labeled.empty()) throw ConfigError("batch_labeled", "a step needs at least one labeled item");
  const Model& guesser = guess_model != nullptr ? *guess_model : model;
  StepReport report;
  report.weights = schedule(epoch, cfg);

  const double sup_scale = 1.0 / static_cast<double>(batch.labeled.size());
  for (const LabeledItem& item : batch.labeled) {
    const auto trace = model.forward_trace(item.image.pixels);
    const SoftPrediction pred{trace.probs};
    Tensor<float> g(pred.num_classes(), pred.height(), pred.width());
    const double l = supervised_loss(pred, make_supervised_target(item.mask, cfg), cfg, &g, sup_scale);
    check_finite(l, "l_sup");
    report.l_sup += l * sup_scale;
    model.backward(trace, g, grad);
  }

  if (cfg.method != Method::kSL && !batch.unlabeled.empty()) {
    const bool with_ss = cfg.method == Method::kSSL_SS;
    const int A = cfg.A;
    const auto copies = make_domain_copies(batch.unlabeled, A, rng, cfg.augment);
    std::vector<std::vector<SpatialTransform>> transforms;
    if (with_ss) {
      transforms.resize(copies.size());
      for (auto& ts : transforms) {
        for (int a = 0; a < A; ++a) ts.push_back(sample_T(rng, cfg.augment));
      }
    }
    const double n_copies = static_cast<double>(copies.size()) * A;
    const double scale_u = report.weights.lambda_u / n_copies;
    const double scale_ss = with_ss ? report.weights.lambda_ss / n_copies : 0.0;
    double l_u = 0.0;
    double l_ss = 0.0;
    for (std::size_t i = 0; i < copies.size(); ++i) {
      std::vector<typename Model::Trace> traces;
      std::vector<SoftPrediction> preds;
      for (const EyeImage& copy : copies[i]) {
        traces.push_back(model.forward_trace(copy.pixels));
        preds.push_back(SoftPrediction{traces.back().probs});
      }
      // The guess is a constant target: it is rebuilt from plain forward
      // values and only the per-copy predictions receive gradient.
      const SoftPrediction guess_u = guess_model != nullptr
                                         ? average_predictions(forward_all(guesser, copies[i]), cfg.sharpen_temperature)
                                         : average_predictions(preds, cfg.sharpen_temperature);
      std::optional<std::pair<SoftPrediction, ValidityMask>> guess_ss;
      if (with_ss) guess_ss = guess_from_transforms(guesser, copies[i], transforms[i], cfg.sharpen_temperature);

      for (int a = 0; a < A; ++a) {
        Tensor<float> g(preds[a].num_classes(), preds[a].height(), preds[a].width());
        l_u += consistency_loss(preds[a], guess_u, nullptr, scale_u != 0.0 ? &g : nullptr, scale_u);
        if (with_ss) {
          l_ss += consistency_loss(preds[a], guess_ss->first, &guess_ss->second, scale_ss != 0.0 ? &g : nullptr,
                                   scale_ss);
        }
        if (scale_u != 0.0 || scale_ss != 0.0) model.backward(traces[a], g, grad);
      }
    }
    report.l_u = l_u / n_copies;
    check_finite(*report.l_u, "l_u");
    if (with_ss) {
      report.l_ss = l_ss / n_copies;
      check_finite(*report.l_ss, "l_ss");
    }
  }
  report.total = total_loss(report.l_sup, report.l_u, report.l_ss, report.weights, cfg.method);
  check_finite(report.total, "total");
  return report;
}

StepReport train_step(Model& model, Adam& optimizer, const MixedBatch& batch, int epoch, const TrainConfig& cfg,
                      RandomStream& rng, const Model* guess_model) {
  std::vector<float> grad(model.num_params(), 0.0f);
  const StepReport report = compute_step_gradients(model, batch, epoch, cfg, rng, grad, guess_model);
  for (float g : grad) {
    if (!std::isfinite(g)) throw NumericError("gradient", "non-finite parameter gradient");
  }
  optimizer.step(model.params(), grad);
  return report;
}

int steps_per_epoch(const DatasetPool& pool, const TrainConfig& cfg) {
  const std::size_t per_step = static_cast<std::size_t>(cfg.batch_labeled + cfg.batch_unlabeled);
  return static_cast<int>((pool.k() + pool.m() + per_step - 1) / per_step);
}

TrainResult train(const DatasetPool& pool, std::span<const LabeledItem> validation, const TrainConfig& cfg,
                  const TrainOptions& options) {
  cfg.validate();
  if (pool.labeled.empty()) throw ConfigError("k", "the labeled pool is empty");
  if (validation.empty()) throw ValidationError("train: the validation set is empty");
  std::unordered_set<std::string> train_ids;
  for (const auto& item : pool.labeled) train_ids.insert(item.image.frame_id);
  for (const auto& img : pool.unlabeled) train_ids.insert(img.frame_id);
  for (const auto& item : validation) {
    if (train_ids.count(item.image.frame_id)) {
      throw ValidationError("train: validation frame '" + item.image.frame_id + "' also appears in training");
    }
  }

  const ModelSpec spec = model_spec_from_config(cfg);
  const EyeImage& probe = pool.labeled.front().image;
  if (!probe.pixels.same_plane_shape(spec.height, spec.width)) {
    throw ShapeError("train: images are " + std::to_string(probe.height()) + "x" + std::to_string(probe.width()) +
                     " but the model expects " + std::to_string(spec.height) + "x" + std::to_string(spec.width));
  }

  const FlushDenormals flush_guard;
  const RandomStream master(cfg.seed);
  RandomStream init_rng = master.derive(1);
  const RandomStream batch_root = master.derive(2);
  const RandomStream guess_root = master.derive(3);

  Model model = init_params(spec, init_rng);
  Adam adam(model.num_params(), cfg);
  Model best = model;
  History history;
  history.info = {cfg.method, static_cast<int>(pool.k()), cfg.split_mode, cfg.seed};

  int steps = steps_per_epoch(pool, cfg);
  if (options.max_steps_per_epoch) steps = std::min(steps, *options.max_steps_per_epoch);
  const EvalOptions eval_options = EvalOptions::from_config(cfg);
  std::uint64_t global_step = 0;
  double best_miou = -1.0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double sum_sup = 0.0, sum_u = 0.0, sum_ss = 0.0;
    for (int s = 0; s < steps; ++s, ++global_step) {
      RandomStream batch_rng = batch_root.derive(global_step);
      RandomStream guess_rng = guess_root.derive(global_step);
      const MixedBatch batch = assemble_batch(pool, cfg, batch_rng);
      const StepReport r = train_step(model, adam, batch, epoch, cfg, guess_rng);
      sum_sup += r.l_sup;
      sum_u += r.l_u.value_or(0.0);
      sum_ss += r.l_ss.value_or(0.0);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.l_sup = sum_sup / steps;
    if (cfg.method != Method::kSL) rec.l_u = sum_u / steps;
    if (cfg.method == Method::kSSL_SS) rec.l_ss = sum_ss / steps;
    const LossWeights w = schedule(epoch, cfg);
    rec.lambda_u = w.lambda_u;
    rec.lambda_ss = w.lambda_ss;
    const IoUReport val = evaluate(model, validation, eval_options);
    rec.val_miou = val.mean;
    rec.val_iou = val.per_class;

    if (rec.val_miou > best_miou) {
      best_miou = rec.val_miou;
      best = model;
      if (options.checkpoint_path) save_checkpoint(*options.checkpoint_path, model, cfg);
    }
    char line[160];
    std::snprintf(line, sizeof(line), "%s epoch %d: l_sup %.4f val mIoU %.4f", to_string(cfg.method).c_str(), epoch,
                  rec.l_sup, rec.val_miou);
    log_info(line);
    history.epochs.push_back(rec);
    if (options.on_epoch) options.on_epoch(rec);
  }
  return {std::move(best), std::move(history)};
}

}  // namespace eyessl
