#pragma once

#include <cstdint>
#include <filesystem>

#include "eyessl/tensor.hpp"

namespace eyessl {

/// 8-bit single-channel PNG (colour files are converted to luminance).
Tensor<std::uint8_t> read_gray8(const std::filesystem::path& path);
void write_gray8(const std::filesystem::path& path, const Tensor<std::uint8_t>& image);
/// 3 x H x W RGB planes.
void write_rgb8(const std::filesystem::path& path, const Tensor<std::uint8_t>& image);

enum class Interpolation { kBilinear, kNearest };
Tensor<std::uint8_t> resize(const Tensor<std::uint8_t>& image, int height, int width, Interpolation mode);

}  // namespace eyessl
