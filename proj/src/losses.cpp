#include "eyessl/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "eyessl/errors.hpp"
#include "eyessl/log.hpp"

namespace eyessl {
namespace {

void check_grad(const Tensor<float>* grad, const SoftPrediction& pred) {
  if (grad != nullptr && !grad->same_shape(pred.probs)) throw ShapeError("gradient buffer shape mismatch");
}

// Felzenszwalb-Huttenlocher lower envelope of parabolas, in place on f.
void distance_1d(std::vector<double>& f, std::vector<double>& d, std::vector<int>& v, std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  constexpr double kInf = std::numeric_limits<double>::infinity();
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (std::isinf(f[q])) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    auto intersect = [&](int p) { return ((f[q] + q * q) - (f[p] + p * p)) / (2.0 * (q - p)); };
    double s = intersect(v[k]);
    while (s <= z[k]) {  // z[0] is -inf, so this stops at k == 0
      --k;
      s = intersect(v[k]);
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  if (k < 0) {
    std::fill(d.begin(), d.end(), kInf);
  } else {
    int j = 0;
    for (int q = 0; q < n; ++q) {
      while (z[j + 1] < q) ++j;
      const double diff = q - v[j];
      d[q] = diff * diff + f[v[j]];
    }
  }
  f.swap(d);
}

}  // namespace

double cross_entropy(const SoftPrediction& pred, const LabelMask& target, const Tensor<float>* weights,
                     Tensor<float>* grad, double scale) {
  if (!target.classes.same_plane_shape(pred.height(), pred.width()) ||
      target.num_classes != pred.num_classes()) {
    throw ShapeError("cross_entropy: prediction and target shapes differ");
  }
  if (weights != nullptr && !weights->same_plane_shape(pred.height(), pred.width())) {
    throw ShapeError("cross_entropy: weight map shape differs");
  }
  check_grad(grad, pred);
  const std::size_t n = pred.probs.plane_size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t idx = target.classes[i] * n + i;
    const double w = weights ? (*weights)[i] : 1.0;
    const double p = pred.probs[idx];
    total += -w * std::log(std::max(p, kProbClamp));
    if (grad != nullptr && p > kProbClamp) (*grad)[idx] += static_cast<float>(-scale * w / (p * n));
  }
  return total / static_cast<double>(n);
}

BoundaryWeightMap boundary_weight_map(const LabelMask& target, int radius, double w_base) {
  if (radius < 1) throw ParameterError("boundary radius must be >= 1");
  const int h = target.height();
  const int w = target.width();
  BoundaryWeightMap out(1, h, w, 0.0f);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::uint8_t c = target.at(y, x);
      bool mixed = false;
      for (int yy = std::max(0, y - radius); yy <= std::min(h - 1, y + radius) && !mixed; ++yy) {
        for (int xx = std::max(0, x - radius); xx <= std::min(w - 1, x + radius); ++xx) {
          if (target.at(yy, xx) != c) {
            mixed = true;
            break;
          }
        }
      }
      if (mixed) out(0, y, x) = static_cast<float>(w_base);
    }
  }
  return out;
}

std::vector<double> squared_distance_transform(const std::vector<bool>& feature, int height, int width) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> grid(feature.size());
  for (std::size_t i = 0; i < feature.size(); ++i) grid[i] = feature[i] ? 0.0 : kInf;
  const int longest = std::max(height, width);
  std::vector<double> f, d(longest);
  std::vector<int> v(longest);
  std::vector<double> z(longest + 1);
  for (int x = 0; x < width; ++x) {
    f.resize(height);
    d.resize(height);
    for (int y = 0; y < height; ++y) f[y] = grid[static_cast<std::size_t>(y) * width + x];
    distance_1d(f, d, v, z);
    for (int y = 0; y < height; ++y) grid[static_cast<std::size_t>(y) * width + x] = f[y];
  }
  for (int y = 0; y < height; ++y) {
    f.assign(grid.begin() + static_cast<std::ptrdiff_t>(y) * width,
             grid.begin() + static_cast<std::ptrdiff_t>(y + 1) * width);
    d.resize(width);
    distance_1d(f, d, v, z);
    std::copy(f.begin(), f.end(), grid.begin() + static_cast<std::ptrdiff_t>(y) * width);
  }
  return grid;
}

SignedDistanceMap signed_distance(const LabelMask& target) {
  const int h = target.height();
  const int w = target.width();
  const std::size_t n = target.classes.plane_size();
  const double diag = std::sqrt(static_cast<double>(h) * h + static_cast<double>(w) * w);
  SignedDistanceMap out(target.num_classes, h, w);
  std::vector<bool> inside(n), outside(n);
  for (int c = 0; c < target.num_classes; ++c) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      inside[i] = target.classes[i] == c;
      outside[i] = !inside[i];
      count += inside[i];
    }
    auto plane = out.plane(c);
    if (count == 0) {
      std::fill(plane.begin(), plane.end(), 1.0f);
      continue;
    }
    if (count == n) {
      std::fill(plane.begin(), plane.end(), -1.0f);
      continue;
    }
    const auto to_region = squared_distance_transform(inside, h, w);
    const auto to_outside = squared_distance_transform(outside, h, w);
    for (std::size_t i = 0; i < n; ++i) {
      const double s = inside[i] ? -(std::sqrt(to_outside[i]) - 1.0) : std::sqrt(to_region[i]);
      plane[i] = static_cast<float>(s / diag);
    }
  }
  return out;
}

double surface_loss(const SoftPrediction& pred, const SignedDistanceMap& sdm, Tensor<float>* grad,
                    double scale) {
  if (!pred.probs.same_shape(sdm)) throw ShapeError("surface_loss: prediction and distance map shapes differ");
  check_grad(grad, pred);
  const std::size_t total = pred.probs.size();
  double sum = 0.0;
  for (std::size_t i = 0; i < total; ++i) sum += static_cast<double>(pred.probs[i]) * sdm[i];
  if (grad != nullptr) {
    const double g = scale / static_cast<double>(total);
    for (std::size_t i = 0; i < total; ++i) (*grad)[i] += static_cast<float>(g * sdm[i]);
  }
  return sum / static_cast<double>(total);
}

SupervisedTarget make_supervised_target(const LabelMask& mask, const TrainConfig& cfg) {
  return {mask, boundary_weight_map(mask, cfg.boundary_radius, cfg.boundary_weight), signed_distance(mask)};
}

double supervised_loss(const SoftPrediction& pred, const SupervisedTarget& target, const TrainConfig& cfg,
                       Tensor<float>* grad, double scale) {
  Tensor<float> weights(1, target.mask.height(), target.mask.width());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    weights[i] = static_cast<float>(cfg.lambda1 + cfg.lambda2 * target.boundary[i]);
  }
  double loss = cross_entropy(pred, target.mask, &weights, grad, scale);
  if (cfg.lambda3 != 0.0) loss += cfg.lambda3 * surface_loss(pred, target.sdm, grad, scale * cfg.lambda3);
  return loss;
}

double supervised_loss(const SoftPrediction& pred, const LabelMask& target, const TrainConfig& cfg,
                       Tensor<float>* grad, double scale) {
  return supervised_loss(pred, make_supervised_target(target, cfg), cfg, grad, scale);
}

double consistency_loss(const SoftPrediction& pred, const SoftPrediction& guessed, const ValidityMask* validity,
                        Tensor<float>* grad, double scale) {
  if (!pred.probs.same_shape(guessed.probs)) throw ShapeError("consistency_loss: shapes differ");
  if (validity != nullptr && !validity->same_plane_shape(pred.height(), pred.width())) {
    throw ShapeError("consistency_loss: validity shape differs");
  }
  check_grad(grad, pred);
  const std::size_t n = pred.probs.plane_size();
  const int p = pred.num_classes();
  std::size_t valid = 0;
  for (std::size_t i = 0; i < n; ++i) valid += (validity == nullptr || (*validity)[i] > kValidThreshold);
  if (valid == 0) {
    log_warning("consistency_loss: empty valid support, returning 0");
    return 0.0;
  }
  const double denom = static_cast<double>(valid) * p;
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (validity != nullptr && (*validity)[i] <= kValidThreshold) continue;
    for (int c = 0; c < p; ++c) {
      const double diff = static_cast<double>(pred.probs[c * n + i]) - guessed.probs[c * n + i];
      sum += diff * diff;
      if (grad != nullptr) (*grad)[c * n + i] += static_cast<float>(scale * 2.0 * diff / denom);
    }
  }
  return sum / denom;
}

LossWeights schedule(int epoch, const TrainConfig& cfg) {
  if (epoch < 0) throw ParameterError("epoch must be >= 0");
  LossWeights w;
  w.epoch = epoch;
  w.lambda_u = cfg.slope_u * epoch;
  w.lambda_ss = cfg.slope_ss * epoch;
  if (cfg.schedule_cap_u) w.lambda_u = std::min(w.lambda_u, *cfg.schedule_cap_u);
  if (cfg.schedule_cap_ss) w.lambda_ss = std::min(w.lambda_ss, *cfg.schedule_cap_ss);
  return w;
}

double total_loss(double sup, std::optional<double> l_u, std::optional<double> l_ss, const LossWeights& weights,
                  Method method) {
  switch (method) {
    case Method::kSL:
      return sup;
    case Method::kSSL_D:
      return sup + weights.lambda_u * l_u.value_or(0.0);
    case Method::kSSL_SS:
      return sup + weights.lambda_u * l_u.value_or(0.0) + weights.lambda_ss * l_ss.value_or(0.0);
  }
  return sup;
}

}  // namespace eyessl
