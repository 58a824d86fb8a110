#include "eyessl/image_io.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "eyessl/errors.hpp"

namespace eyessl {
namespace {

cv::Mat as_mat(const Tensor<std::uint8_t>& t) {
  cv::Mat m(t.height(), t.width(), CV_8UC1);
  std::copy(t.values().begin(), t.values().end(), m.data);
  return m;
}

Tensor<std::uint8_t> from_mat(const cv::Mat& m) {
  Tensor<std::uint8_t> t(1, m.rows, m.cols);
  for (int y = 0; y < m.rows; ++y) {
    const auto* row = m.ptr<std::uint8_t>(y);
    std::copy(row, row + m.cols, t.data() + static_cast<std::size_t>(y) * m.cols);
  }
  return t;
}

void ensure_parent(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
}

}  // namespace

Tensor<std::uint8_t> read_gray8(const std::filesystem::path& path) {
  cv::Mat raw = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (raw.empty()) throw IoError(path.string(), "unreadable image");
  if (raw.depth() != CV_8U) throw IoError(path.string(), "expected 8-bit samples");
  cv::Mat gray;
  switch (raw.channels()) {
    case 1: gray = raw; break;
    case 3: cv::cvtColor(raw, gray, cv::COLOR_BGR2GRAY); break;
    case 4: cv::cvtColor(raw, gray, cv::COLOR_BGRA2GRAY); break;
    default: throw IoError(path.string(), "unsupported channel count");
  }
  return from_mat(gray);
}

void write_gray8(const std::filesystem::path& path, const Tensor<std::uint8_t>& image) {
  ensure_parent(path);
  if (!cv::imwrite(path.string(), as_mat(image))) throw IoError(path.string(), "cannot write image");
}

void write_rgb8(const std::filesystem::path& path, const Tensor<std::uint8_t>& image) {
  if (image.channels() != 3) throw ShapeError("write_rgb8: expected 3 channels");
  ensure_parent(path);
  cv::Mat bgr(image.height(), image.width(), CV_8UC3);
  for (int y = 0; y < image.height(); ++y) {
    auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < image.width(); ++x) {
      row[x] = cv::Vec3b(image(2, y, x), image(1, y, x), image(0, y, x));
    }
  }
  if (!cv::imwrite(path.string(), bgr)) throw IoError(path.string(), "cannot write image");
}

Tensor<std::uint8_t> resize(const Tensor<std::uint8_t>& image, int height, int width, Interpolation mode) {
  if (image.same_plane_shape(height, width)) return image;
  cv::Mat out;
  cv::resize(as_mat(image), out, cv::Size(width, height), 0, 0,
             mode == Interpolation::kNearest ? cv::INTER_NEAREST : cv::INTER_LINEAR);
  return from_mat(out);
}

}  // namespace eyessl
