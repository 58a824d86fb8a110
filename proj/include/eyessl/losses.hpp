#pragma once

#include <optional>

#include "eyessl/augment.hpp"
#include "eyessl/config.hpp"
#include "eyessl/types.hpp"

namespace eyessl {

/// Non-negative per-pixel weights, nonzero only near class boundaries.
using BoundaryWeightMap = Tensor<float>;
/// P x H x W; per class negative inside the region, zero on its inner
/// boundary, positive outside. Normalised by the image diagonal.
using SignedDistanceMap = Tensor<float>;

struct LossWeights {
  double lambda_u = 0.0;
  double lambda_ss = 0.0;
  int epoch = 0;
};

inline constexpr double kProbClamp = 1e-8;

// Every loss below optionally accumulates scale * dLoss/dpred into `grad`
// (same shape as the prediction).

/// Mean over pixels of -w(p) * log pred[target(p), p]; w defaults to 1.
double cross_entropy(const SoftPrediction& pred, const LabelMask& target,
                     const Tensor<float>* weights = nullptr, Tensor<float>* grad = nullptr,
                     double scale = 1.0);

/// w_base where the Chebyshev radius-d neighbourhood holds >= 2 classes.
BoundaryWeightMap boundary_weight_map(const LabelMask& target, int radius, double w_base);

SignedDistanceMap signed_distance(const LabelMask& target);

/// Exact squared Euclidean distance from every pixel to the nearest pixel
/// with `feature` set (infinity when there is none).
std::vector<double> squared_distance_transform(const std::vector<bool>& feature, int height, int width);

double surface_loss(const SoftPrediction& pred, const SignedDistanceMap& sdm,
                    Tensor<float>* grad = nullptr, double scale = 1.0);

// Targets with the derived maps precomputed.
struct SupervisedTarget {
  LabelMask mask;
  BoundaryWeightMap boundary;
  SignedDistanceMap sdm;
};

SupervisedTarget make_supervised_target(const LabelMask& mask, const TrainConfig& cfg);

/// CE with per-pixel weight lambda1 + lambda2 * w(p), plus lambda3 * surface loss.
double supervised_loss(const SoftPrediction& pred, const SupervisedTarget& target, const TrainConfig& cfg,
                       Tensor<float>* grad = nullptr, double scale = 1.0);
double supervised_loss(const SoftPrediction& pred, const LabelMask& target, const TrainConfig& cfg,
                       Tensor<float>* grad = nullptr, double scale = 1.0);

/// Mean squared difference over valid pixels and channels. `guessed` is a
/// constant: only dLoss/dpred is produced. Pixels whose validity is at most
/// kValidThreshold are excluded; an empty support yields 0 and a warning.
double consistency_loss(const SoftPrediction& pred, const SoftPrediction& guessed,
                        const ValidityMask* validity = nullptr, Tensor<float>* grad = nullptr,
                        double scale = 1.0);

LossWeights schedule(int epoch, const TrainConfig& cfg);

double total_loss(double sup, std::optional<double> l_u, std::optional<double> l_ss,
                  const LossWeights& weights, Method method);

}  // namespace eyessl
