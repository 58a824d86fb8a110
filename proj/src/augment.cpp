#include "eyessl/augment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

#include "eyessl/errors.hpp"

namespace eyessl {
namespace {

struct Point {
  double x;
  double y;
};

// Resamples every channel of `x` at the source coordinates given by `source`.
template <typename SourceFn>
Tensor<float> warp_bilinear(const Tensor<float>& x, SourceFn source) {
  const int h = x.height();
  const int w = x.width();
  Tensor<float> out(x.channels(), h, w, 0.0f);
  for (int y = 0; y < h; ++y) {
    for (int xx = 0; xx < w; ++xx) {
      const Point s = source(xx, y);
      const double fx0 = std::floor(s.x);
      const double fy0 = std::floor(s.y);
      const int x0 = static_cast<int>(fx0);
      const int y0 = static_cast<int>(fy0);
      const double ax = s.x - fx0;
      const double ay = s.y - fy0;
      const std::array<int, 4> sx{x0, x0 + 1, x0, x0 + 1};
      const std::array<int, 4> sy{y0, y0, y0 + 1, y0 + 1};
      const std::array<double, 4> wt{(1 - ax) * (1 - ay), ax * (1 - ay), (1 - ax) * ay, ax * ay};
      for (int c = 0; c < x.channels(); ++c) {
        double acc = 0.0;
        for (int i = 0; i < 4; ++i) {
          if (wt[i] == 0.0 || sx[i] < 0 || sx[i] >= w || sy[i] < 0 || sy[i] >= h) continue;
          acc += wt[i] * x(c, sy[i], sx[i]);
        }
        out(c, y, xx) = static_cast<float>(acc);
      }
    }
  }
  return out;
}

struct Affine {
  double cos_a;
  double sin_a;
  double cx;
  double cy;
  double sx;
  double sy;
};

Affine make_affine(const SpatialTransform& t, int height, int width) {
  const double rad = t.angle_deg * std::numbers::pi / 180.0;
  return {std::cos(rad), std::sin(rad), (width - 1) / 2.0, (height - 1) / 2.0,
          static_cast<double>(t.shift_x), static_cast<double>(t.shift_y)};
}

// Source coordinates for applying T: rotate about the centre, then offset.
Point forward_source(const Affine& a, int x, int y) {
  const double dx = x - a.cx;
  const double dy = y - a.cy;
  return {a.cos_a * dx - a.sin_a * dy + a.cx + a.sx, a.sin_a * dx + a.cos_a * dy + a.cy + a.sy};
}

// Source coordinates for T^-1: remove the offset, then rotate back.
Point inverse_source(const Affine& a, int x, int y) {
  const double dx = x - a.cx - a.sx;
  const double dy = y - a.cy - a.sy;
  return {a.cos_a * dx + a.sin_a * dy + a.cx, -a.sin_a * dx + a.cos_a * dy + a.cy};
}

int quantize8(float v) { return std::clamp(static_cast<int>(std::lround(v * 255.0f)), 0, 255); }

int reflect101(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

}  // namespace

DomainAugParams sample_domain_aug(RandomStream& rng, const AugmentConfig& cfg) {
  DomainAugParams p;
  p.gamma = cfg.gamma_values[rng.index(cfg.gamma_values.size())];
  const std::size_t pair = rng.index(cfg.clahe_clips.size());
  p.clahe_clip = cfg.clahe_clips[pair];
  p.clahe_grid = cfg.clahe_grids[pair];
  p.apply_clahe = rng.bernoulli(cfg.p_clahe);
  p.apply_gamma = rng.bernoulli(cfg.p_gamma);
  return p;
}

EyeImage gamma_correct(const EyeImage& img, double gamma) {
  if (!(gamma > 0.0)) throw ParameterError("gamma must be > 0");
  EyeImage out = img;
  for (float& v : out.pixels.values()) {
    v = std::clamp(static_cast<float>(std::pow(static_cast<double>(v), gamma)), 0.0f, 1.0f);
  }
  return out;
}

EyeImage clahe(const EyeImage& img, double clip, int grid) {
  if (grid < 1) throw ParameterError("CLAHE grid must be >= 1");
  if (!(clip >= 1.0)) throw ParameterError("CLAHE clip must be >= 1");
  const int h = img.height();
  const int w = img.width();
  const int tile_h = (h + grid - 1) / grid;
  const int tile_w = (w + grid - 1) / grid;
  const int tiles_y = (h + tile_h - 1) / tile_h;
  const int tiles_x = (w + tile_w - 1) / tile_w;

  std::vector<int> bins(static_cast<std::size_t>(h) * w);
  for (std::size_t i = 0; i < bins.size(); ++i) bins[i] = quantize8(img.pixels[i]);

  std::vector<std::array<float, 256>> maps(static_cast<std::size_t>(tiles_y) * tiles_x);
  for (int ty = 0; ty < tiles_y; ++ty) {
    for (int tx = 0; tx < tiles_x; ++tx) {
      std::array<double, 256> hist{};
      int n = 0;
      for (int y = ty * tile_h; y < std::min(h, (ty + 1) * tile_h); ++y) {
        for (int x = tx * tile_w; x < std::min(w, (tx + 1) * tile_w); ++x) {
          hist[bins[static_cast<std::size_t>(y) * w + x]] += 1.0;
          ++n;
        }
      }
      auto& map = maps[static_cast<std::size_t>(ty) * tiles_x + tx];
      const auto occupied = std::count_if(hist.begin(), hist.end(), [](double c) { return c > 0; });
      if (occupied <= 1) {
        for (int b = 0; b < 256; ++b) map[b] = static_cast<float>(b / 255.0);
        continue;
      }
      const double limit = clip * n / 256.0;
      double excess = 0.0;
      for (double& c : hist) {
        if (c > limit) {
          excess += c - limit;
          c = limit;
        }
      }
      const double share = excess / 256.0;
      double cdf = 0.0;
      for (int b = 0; b < 256; ++b) {
        cdf += hist[b] + share;
        map[b] = static_cast<float>(std::min(1.0, cdf / n));
      }
    }
  }

  auto axis = [](int p, int tile, int count, int& lo, int& hi, double& frac) {
    const double f = (p + 0.5) / tile - 0.5;
    lo = static_cast<int>(std::floor(f));
    frac = f - lo;
    if (lo < 0) {
      lo = 0;
      frac = 0.0;
    }
    if (lo >= count - 1) {
      lo = count - 1;
      frac = 0.0;
    }
    hi = std::min(lo + 1, count - 1);
  };

  EyeImage out = img;
  for (int y = 0; y < h; ++y) {
    int y0, y1;
    double fy;
    axis(y, tile_h, tiles_y, y0, y1, fy);
    for (int x = 0; x < w; ++x) {
      int x0, x1;
      double fx;
      axis(x, tile_w, tiles_x, x0, x1, fx);
      const int b = bins[static_cast<std::size_t>(y) * w + x];
      const double m00 = maps[static_cast<std::size_t>(y0) * tiles_x + x0][b];
      const double m01 = maps[static_cast<std::size_t>(y0) * tiles_x + x1][b];
      const double m10 = maps[static_cast<std::size_t>(y1) * tiles_x + x0][b];
      const double m11 = maps[static_cast<std::size_t>(y1) * tiles_x + x1][b];
      const double v = (1 - fy) * ((1 - fx) * m00 + fx * m01) + fy * ((1 - fx) * m10 + fx * m11);
      out.pixels(0, y, x) = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return out;
}

EyeImage apply_domain_aug(const EyeImage& img, const DomainAugParams& params) {
  EyeImage out = params.apply_clahe ? clahe(img, params.clahe_clip, params.clahe_grid) : img;
  if (params.apply_gamma) out = gamma_correct(out, params.gamma);
  return out;
}

SpatialTransform sample_T(RandomStream& rng, const AugmentConfig& cfg) {
  SpatialTransform t;
  if (!rng.bernoulli(cfg.p_transform)) return t;
  t.applied = true;
  if (rng.bernoulli(cfg.p_rotate)) {
    t.angle_deg = rng.uniform(-cfg.max_rotation_deg, cfg.max_rotation_deg);
  }
  if (rng.bernoulli(cfg.p_translate)) {
    t.shift_y = rng.uniform_int(-cfg.max_shift_px, cfg.max_shift_px);
    t.shift_x = rng.uniform_int(-cfg.max_shift_px, cfg.max_shift_px);
  }
  return t;
}

Tensor<float> apply_spatial(const Tensor<float>& x, const SpatialTransform& t) {
  if (t.is_identity()) return x;
  const Affine a = make_affine(t, x.height(), x.width());
  return warp_bilinear(x, [&](int px, int py) { return forward_source(a, px, py); });
}

EyeImage apply_spatial(const EyeImage& img, const SpatialTransform& t) {
  EyeImage out = img;
  out.pixels = apply_spatial(img.pixels, t);
  for (float& v : out.pixels.values()) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

LabelMask apply_spatial(const LabelMask& mask, const SpatialTransform& t) {
  if (t.is_identity()) return mask;
  const Affine a = make_affine(t, mask.height(), mask.width());
  LabelMask out = make_mask(mask.height(), mask.width(), mask.num_classes);
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      const Point s = forward_source(a, x, y);
      const int sx = static_cast<int>(std::lround(s.x));
      const int sy = static_cast<int>(std::lround(s.y));
      if (sx >= 0 && sx < mask.width() && sy >= 0 && sy < mask.height()) {
        out.classes(0, y, x) = mask.at(sy, sx);
      }
    }
  }
  return out;
}

ValidityMask validity_mask(int height, int width, const SpatialTransform& t) {
  Tensor<float> ones(1, height, width, 1.0f);
  if (t.is_identity()) return ones;
  const Affine a = make_affine(t, height, width);
  const Tensor<float> moved = warp_bilinear(ones, [&](int x, int y) { return forward_source(a, x, y); });
  return warp_bilinear(moved, [&](int x, int y) { return inverse_source(a, x, y); });
}

std::pair<SoftPrediction, ValidityMask> invert_spatial(const SoftPrediction& y,
                                                       const SpatialTransform& t) {
  if (t.is_identity()) return {y, Tensor<float>(1, y.height(), y.width(), 1.0f)};
  const Affine a = make_affine(t, y.height(), y.width());
  SoftPrediction out{warp_bilinear(y.probs, [&](int x, int yy) { return inverse_source(a, x, yy); })};
  ValidityMask valid = validity_mask(y.height(), y.width(), t);
  const std::size_t n = out.probs.plane_size();
  for (std::size_t i = 0; i < n; ++i) {
    if (valid[i] <= kValidThreshold) continue;
    double sum = 0.0;
    for (int c = 0; c < out.num_classes(); ++c) sum += out.probs[c * n + i];
    if (sum <= 0.0 || std::abs(sum - 1.0) <= kSimplexSlack) continue;
    for (int c = 0; c < out.num_classes(); ++c) {
      out.probs[c * n + i] = static_cast<float>(out.probs[c * n + i] / sum);
    }
  }
  return {std::move(out), std::move(valid)};
}

EyeImage flip_horizontal(const EyeImage& img) {
  EyeImage out = img;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) out.pixels(0, y, x) = img.pixels(0, y, img.width() - 1 - x);
  }
  return out;
}

LabelMask flip_horizontal(const LabelMask& mask) {
  LabelMask out = mask;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) out.classes(0, y, x) = mask.at(y, mask.width() - 1 - x);
  }
  return out;
}

EyeImage gaussian_blur(const EyeImage& img, double sigma) {
  if (!(sigma > 0.0)) throw ParameterError("blur sigma must be > 0");
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += kernel[i + radius];
  }
  for (double& k : kernel) k /= total;

  const int h = img.height();
  const int w = img.width();
  Tensor<float> tmp(1, h, w);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * img.pixels(0, y, reflect101(x + i, w));
      tmp(0, y, x) = static_cast<float>(acc);
    }
  }
  EyeImage out = img;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int i = -radius; i <= radius; ++i) acc += kernel[i + radius] * tmp(0, reflect101(y + i, h), x);
      out.pixels(0, y, x) = std::clamp(static_cast<float>(acc), 0.0f, 1.0f);
    }
  }
  return out;
}

EyeImage draw_reflection_lines(const EyeImage& img, RandomStream& rng) {
  EyeImage out = img;
  const int h = img.height();
  const int w = img.width();
  const int count = rng.uniform_int(1, 3);
  for (int l = 0; l < count; ++l) {
    const double x0 = rng.uniform(0, w - 1);
    const double y0 = rng.uniform(0, h - 1);
    const double x1 = rng.uniform(0, w - 1);
    const double y1 = rng.uniform(0, h - 1);
    const float level = static_cast<float>(rng.uniform(0.7, 1.0));
    const int steps = static_cast<int>(std::ceil(std::max(std::abs(x1 - x0), std::abs(y1 - y0)))) + 1;
    for (int s = 0; s < steps; ++s) {
      const double t = steps == 1 ? 0.0 : static_cast<double>(s) / (steps - 1);
      const int x = static_cast<int>(std::lround(x0 + t * (x1 - x0)));
      const int y = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
      float& px = out.pixels(0, y, x);
      px = std::max(px, level);
    }
  }
  return out;
}

std::pair<EyeImage, std::optional<LabelMask>> basic_augment(const EyeImage& img,
                                                            const std::optional<LabelMask>& mask,
                                                            RandomStream& rng,
                                                            const AugmentConfig& cfg) {
  EyeImage out = img;
  std::optional<LabelMask> out_mask = mask;
  if (rng.bernoulli(cfg.p_flip)) {
    out = flip_horizontal(out);
    if (out_mask) out_mask = flip_horizontal(*out_mask);
  }
  if (rng.bernoulli(cfg.p_blur)) {
    out = gaussian_blur(out, rng.uniform(cfg.blur_sigma_min, cfg.blur_sigma_max));
  }
  if (rng.bernoulli(cfg.p_lines)) out = draw_reflection_lines(out, rng);
  return {std::move(out), std::move(out_mask)};
}

}  // namespace eyessl
