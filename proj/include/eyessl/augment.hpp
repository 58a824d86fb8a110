#pragma once

#include <optional>
#include <utility>

#include "eyessl/config.hpp"
#include "eyessl/random.hpp"
#include "eyessl/types.hpp"

namespace eyessl {

struct DomainAugParams {
  double gamma = 1.0;
  double clahe_clip = 1.0;
  int clahe_grid = 8;
  bool apply_clahe = false;
  bool apply_gamma = false;
};

// Rotation about the image centre followed by translation. `shift_y`/`shift_x`
// are the source offset of the resampling: for a pure translation the output
// pixel p reads the input at p + shift, so the first `shift_x` columns of the
// round-trip validity are empty for positive `shift_x`.
struct SpatialTransform {
  double angle_deg = 0.0;
  int shift_y = 0;
  int shift_x = 0;
  bool applied = false;

  bool is_identity() const { return !applied || (angle_deg == 0.0 && shift_y == 0 && shift_x == 0); }
  SpatialTransform inverse() const { return {-angle_deg, -shift_y, -shift_x, applied}; }
};

/// Valid-support weights in [0,1]: T^-1(T(1)) for the transform that
/// produced a prediction.
using ValidityMask = Tensor<float>;

inline constexpr float kValidThreshold = 0.99f;
// Channel sums within this distance of 1 are float rounding, not lost mass,
// and are left alone so that exact warps stay exact.
inline constexpr double kSimplexSlack = 1e-6;

// Draw order is fixed: gamma index, (clip, grid) index, CLAHE flag, gamma flag.
DomainAugParams sample_domain_aug(RandomStream& rng, const AugmentConfig& cfg = {});

EyeImage gamma_correct(const EyeImage& img, double gamma);

/// Contrast-limited adaptive histogram equalization on the 8-bit quantised
/// image. Tiles are ceil(H/grid) x ceil(W/grid); each tile histogram is clipped
/// at clip * (tile pixels / 256) with the excess spread evenly over all bins,
/// and pixel values are bilinearly interpolated between the mappings of the
/// four nearest tile centres. A tile whose pixels share one intensity maps
/// that intensity to itself.
EyeImage clahe(const EyeImage& img, double clip, int grid);

/// CLAHE (if enabled) followed by gamma (if enabled).
EyeImage apply_domain_aug(const EyeImage& img, const DomainAugParams& params);

SpatialTransform sample_T(RandomStream& rng, const AugmentConfig& cfg = {});

/// Bilinear warp of every channel; samples falling outside the frame read 0.
Tensor<float> apply_spatial(const Tensor<float>& x, const SpatialTransform& t);
EyeImage apply_spatial(const EyeImage& img, const SpatialTransform& t);
/// Nearest-neighbour warp for hard labels; out-of-frame pixels become class 0.
LabelMask apply_spatial(const LabelMask& mask, const SpatialTransform& t);

/// Maps a prediction made on T(x) back onto the frame of x. Channels are
/// renormalised where the validity exceeds kValidThreshold and the channel
/// sum is off by more than kSimplexSlack. An identity
/// transform returns `y` untouched with all-ones validity.
std::pair<SoftPrediction, ValidityMask> invert_spatial(const SoftPrediction& y,
                                                       const SpatialTransform& t);
ValidityMask validity_mask(int height, int width, const SpatialTransform& t);

EyeImage flip_horizontal(const EyeImage& img);
LabelMask flip_horizontal(const LabelMask& mask);
EyeImage gaussian_blur(const EyeImage& img, double sigma);
EyeImage draw_reflection_lines(const EyeImage& img, RandomStream& rng);

/// Baseline augmentation set: flip (mask follows), blur, reflection lines.
std::pair<EyeImage, std::optional<LabelMask>> basic_augment(const EyeImage& img,
                                                            const std::optional<LabelMask>& mask,
                                                            RandomStream& rng,
                                                            const AugmentConfig& cfg = {});

}  // namespace eyessl
