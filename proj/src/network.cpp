#include "eyessl/network.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "eyessl/errors.hpp"

namespace eyessl {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

// Rows ordered (channel, ky, kx) to match the weight layout [out][in][ky][kx].
template <typename T>
RowMat<T> im2col3(const Tensor<T>& in) {
  const int h = in.height();
  const int w = in.width();
  const std::size_t n = in.plane_size();
  RowMat<T> col(in.channels() * 9, static_cast<Eigen::Index>(n));
  for (int c = 0; c < in.channels(); ++c) {
    const T* src = in.plane(c).data();
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        T* dst = col.data() + static_cast<std::size_t>((c * 3 + ky) * 3 + kx) * n;
        const int dy = ky - 1;
        const int dx = kx - 1;
        const int x_lo = std::max(0, -dx);
        const int x_hi = std::min(w, w - dx);
        for (int y = 0; y < h; ++y) {
          T* row = dst + static_cast<std::size_t>(y) * w;
          const int sy = y + dy;
          if (sy < 0 || sy >= h) {
            std::fill(row, row + w, T{0});
            continue;
          }
          const T* srow = src + static_cast<std::size_t>(sy) * w + dx;
          for (int x = 0; x < x_lo; ++x) row[x] = T{0};
          for (int x = x_lo; x < x_hi; ++x) row[x] = srow[x];
          for (int x = x_hi; x < w; ++x) row[x] = T{0};
        }
      }
    }
  }
  return col;
}

template <typename T>
Tensor<T> col2im3(const RowMat<T>& col, int channels, int h, int w) {
  Tensor<T> out(channels, h, w, T{0});
  const std::size_t n = out.plane_size();
  for (int c = 0; c < channels; ++c) {
    T* dst = out.plane(c).data();
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const T* src = col.data() + static_cast<std::size_t>((c * 3 + ky) * 3 + kx) * n;
        const int dy = ky - 1;
        const int dx = kx - 1;
        const int x_lo = std::max(0, -dx);
        const int x_hi = std::min(w, w - dx);
        for (int y = 0; y < h; ++y) {
          const int sy = y + dy;
          if (sy < 0 || sy >= h) continue;
          const T* row = src + static_cast<std::size_t>(y) * w;
          T* drow = dst + static_cast<std::size_t>(sy) * w + dx;
          for (int x = x_lo; x < x_hi; ++x) drow[x] += row[x];
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor<T> conv_forward(const Tensor<T>& in, const typename SegmentationNet<T>::ConvLayer& layer,
                       std::span<const T> params) {
  const std::size_t n = in.plane_size();
  const Eigen::Index fan_in = static_cast<Eigen::Index>(layer.in_channels) * layer.kernel * layer.kernel;
  ConstMatMap<T> weights(params.data() + layer.weight_offset, layer.out_channels, fan_in);
  Tensor<T> out(layer.out_channels, in.height(), in.width());
  MatMap<T> out_map(out.data(), layer.out_channels, static_cast<Eigen::Index>(n));
  if (layer.kernel == 3) {
    out_map.noalias() = weights * im2col3(in);
  } else {
    out_map.noalias() = weights * ConstMatMap<T>(in.data(), in.channels(), static_cast<Eigen::Index>(n));
  }
  for (int c = 0; c < layer.out_channels; ++c) {
    const T b = params[layer.bias_offset + c];
    T* p = out.plane(c).data();
    if (layer.relu) {
      for (std::size_t i = 0; i < n; ++i) p[i] = std::max(T{0}, p[i] + b);
    } else {
      for (std::size_t i = 0; i < n; ++i) p[i] += b;
    }
  }
  return out;
}

template <typename T>
Tensor<T> conv_backward(const Tensor<T>& in, const Tensor<T>* out, Tensor<T> grad_out,
                        const typename SegmentationNet<T>::ConvLayer& layer, std::span<const T> params,
                        std::span<T> grad, bool need_input_grad) {
  const std::size_t n = in.plane_size();
  const auto cols = static_cast<Eigen::Index>(n);
  if (layer.relu) {
    const T* o = out->data();
    T* g = grad_out.data();
    for (std::size_t i = 0; i < grad_out.size(); ++i) {
      if (!(o[i] > T{0})) g[i] = T{0};
    }
  }
  const Eigen::Index fan_in = static_cast<Eigen::Index>(layer.in_channels) * layer.kernel * layer.kernel;
  ConstMatMap<T> dz(grad_out.data(), layer.out_channels, cols);
  MatMap<T> dw(grad.data() + layer.weight_offset, layer.out_channels, fan_in);
  // Plain loop: Eigen's vectorized row sum changes order with buffer alignment.
  for (int c = 0; c < layer.out_channels; ++c) {
    const T* row = grad_out.data() + static_cast<std::size_t>(c) * n;
    T sum = 0;
    for (std::size_t i = 0; i < n; ++i) sum += row[i];
    grad[layer.bias_offset + c] += sum;
  }
  ConstMatMap<T> weights(params.data() + layer.weight_offset, layer.out_channels, fan_in);
  if (layer.kernel == 3) {
    const RowMat<T> col = im2col3(in);
    dw.noalias() += dz * col.transpose();
    if (!need_input_grad) return {};
    const RowMat<T> dcol = weights.transpose() * dz;
    return col2im3(dcol, in.channels(), in.height(), in.width());
  }
  ConstMatMap<T> x(in.data(), in.channels(), cols);
  dw.noalias() += dz * x.transpose();
  if (!need_input_grad) return {};
  Tensor<T> dx(in.channels(), in.height(), in.width());
  MatMap<T>(dx.data(), in.channels(), cols).noalias() = weights.transpose() * dz;
  return dx;
}

template <typename T>
Tensor<T> maxpool2(const Tensor<T>& in, std::vector<int>* argmax) {
  const int h = in.height() / 2;
  const int w = in.width() / 2;
  Tensor<T> out(in.channels(), h, w);
  if (argmax) argmax->assign(out.size(), 0);
  std::size_t o = 0;
  for (int c = 0; c < in.channels(); ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x, ++o) {
        int best_y = 2 * y;
        int best_x = 2 * x;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            if (in(c, 2 * y + dy, 2 * x + dx) > in(c, best_y, best_x)) {
              best_y = 2 * y + dy;
              best_x = 2 * x + dx;
            }
          }
        }
        out[o] = in(c, best_y, best_x);
        if (argmax) (*argmax)[o] = best_y * in.width() + best_x;
      }
    }
  }
  return out;
}

template <typename T>
void maxpool2_backward(const Tensor<T>& grad_out, const std::vector<int>& argmax, Tensor<T>& grad_in) {
  const std::size_t plane_out = grad_out.plane_size();
  const std::size_t plane_in = grad_in.plane_size();
  for (int c = 0; c < grad_out.channels(); ++c) {
    for (std::size_t i = 0; i < plane_out; ++i) {
      grad_in[c * plane_in + argmax[c * plane_out + i]] += grad_out[c * plane_out + i];
    }
  }
}

template <typename T>
Tensor<T> upsample_concat(const Tensor<T>& low, const Tensor<T>& skip) {
  Tensor<T> out(low.channels() + skip.channels(), skip.height(), skip.width());
  for (int c = 0; c < low.channels(); ++c) {
    for (int y = 0; y < skip.height(); ++y) {
      for (int x = 0; x < skip.width(); ++x) out(c, y, x) = low(c, y / 2, x / 2);
    }
  }
  std::copy(skip.values().begin(), skip.values().end(),
            out.values().begin() + static_cast<std::ptrdiff_t>(low.channels() * out.plane_size()));
  return out;
}

template <typename T>
void softmax_inplace(Tensor<T>& logits) {
  const std::size_t n = logits.plane_size();
  const int p = logits.channels();
  for (std::size_t i = 0; i < n; ++i) {
    T mx = logits[i];
    for (int c = 1; c < p; ++c) mx = std::max(mx, logits[c * n + i]);
    T sum = 0;
    for (int c = 0; c < p; ++c) {
      const T e = std::exp(logits[c * n + i] - mx);
      logits[c * n + i] = e;
      sum += e;
    }
    for (int c = 0; c < p; ++c) logits[c * n + i] /= sum;
  }
}

}  // namespace

void ModelSpec::validate() const {
  if (depth < 1 || base_channels < 1 || num_classes < 2) {
    throw ShapeError("model spec: depth, base_channels must be >= 1 and num_classes >= 2");
  }
  const int div = 1 << (depth - 1);
  if (height < 8 || width < 8 || height % div != 0 || width % div != 0) {
    throw ShapeError("model spec: input " + std::to_string(height) + "x" + std::to_string(width) +
                     " must be >= 8 and divisible by " + std::to_string(div));
  }
}

ModelSpec model_spec_from_config(const TrainConfig& cfg) {
  ModelSpec s = cfg.preset == ModelPreset::kFull ? ModelSpec::full(cfg.num_classes)
                                                 : ModelSpec::desk(cfg.num_classes);
  if (cfg.depth) s.depth = *cfg.depth;
  if (cfg.base_channels) s.base_channels = *cfg.base_channels;
  if (cfg.height) s.height = *cfg.height;
  if (cfg.width) s.width = *cfg.width;
  s.validate();
  return s;
}

template <typename T>
SegmentationNet<T>::SegmentationNet(const ModelSpec& spec) : spec_(spec) {
  spec_.validate();
  std::size_t offset = 0;
  auto add = [&](int in, int out, int kernel, bool relu) {
    ConvLayer l{in, out, kernel, relu, offset, 0};
    offset += static_cast<std::size_t>(in) * out * kernel * kernel;
    l.bias_offset = offset;
    offset += out;
    layers_.push_back(l);
  };
  auto channels = [&](int level) { return spec_.base_channels << level; };
  int in = 1;
  for (int i = 0; i < spec_.depth; ++i) {
    add(in, channels(i), 3, true);
    add(channels(i), channels(i), 3, true);
    in = channels(i);
  }
  for (int j = spec_.depth - 2; j >= 0; --j) {
    add(channels(j + 1) + channels(j), channels(j), 3, true);
    add(channels(j), channels(j), 3, true);
  }
  add(channels(0), spec_.num_classes, 1, false);
  params_.assign(offset, T{0});
}

template <typename T>
Tensor<T> SegmentationNet<T>::run(const Tensor<T>& image, Trace* trace) const {
  if (image.channels() != 1 || !image.same_plane_shape(spec_.height, spec_.width)) {
    throw ShapeError("forward: expected 1x" + std::to_string(spec_.height) + "x" +
                     std::to_string(spec_.width) + " input, got " + std::to_string(image.channels()) +
                     "x" + std::to_string(image.height()) + "x" + std::to_string(image.width()));
  }
  std::size_t li = 0;
  auto conv = [&](const Tensor<T>& in) {
    const ConvLayer& layer = layers_[li++];
    Tensor<T> out = conv_forward<T>(in, layer, params_);
    if (trace) {
      trace->conv_inputs.push_back(in);
      trace->conv_outputs.push_back(layer.relu ? out : Tensor<T>{});
    }
    return out;
  };

  std::vector<Tensor<T>> skips;
  Tensor<T> x = image;
  for (int i = 0; i < spec_.depth; ++i) {
    x = conv(x);
    x = conv(x);
    if (i < spec_.depth - 1) {
      std::vector<int>* argmax = nullptr;
      if (trace) argmax = &trace->pool_argmax.emplace_back();
      skips.push_back(x);
      x = maxpool2(x, argmax);
    }
  }
  for (int j = spec_.depth - 2; j >= 0; --j) {
    x = upsample_concat(x, skips[j]);
    x = conv(x);
    x = conv(x);
  }
  Tensor<T> probs = conv(x);
  softmax_inplace(probs);
  if (trace) trace->probs = probs;
  return probs;
}

template <typename T>
Tensor<T> SegmentationNet<T>::forward(const Tensor<T>& image) const {
  return run(image, nullptr);
}

template <typename T>
typename SegmentationNet<T>::Trace SegmentationNet<T>::forward_trace(const Tensor<T>& image) const {
  Trace trace;
  run(image, &trace);
  return trace;
}

template <typename T>
void SegmentationNet<T>::backward(const Trace& trace, const Tensor<T>& grad_probs,
                                  std::span<T> grad) const {
  if (!grad_probs.same_shape(trace.probs)) throw ShapeError("backward: gradient shape mismatch");
  if (grad.size() != params_.size()) throw ShapeError("backward: gradient buffer size mismatch");

  // Softmax: dz = p * (dp - sum_c p * dp).
  const std::size_t n = trace.probs.plane_size();
  const int p = trace.probs.channels();
  Tensor<T> d(p, trace.probs.height(), trace.probs.width());
  for (std::size_t i = 0; i < n; ++i) {
    T dot = 0;
    for (int c = 0; c < p; ++c) dot += trace.probs[c * n + i] * grad_probs[c * n + i];
    for (int c = 0; c < p; ++c) d[c * n + i] = trace.probs[c * n + i] * (grad_probs[c * n + i] - dot);
  }

  std::size_t li = layers_.size();
  auto conv_back = [&](Tensor<T> g, bool need_input) {
    --li;
    const Tensor<T>* out = layers_[li].relu ? &trace.conv_outputs[li] : nullptr;
    return conv_backward<T>(trace.conv_inputs[li], out, std::move(g), layers_[li], params_, grad, need_input);
  };

  d = conv_back(std::move(d), true);
  const int depth = spec_.depth;
  std::vector<Tensor<T>> skip_grads(std::max(0, depth - 1));
  for (int j = 0; j <= depth - 2; ++j) {
    d = conv_back(std::move(d), true);
    d = conv_back(std::move(d), true);
    // Split [upsampled, skip] channel blocks.
    const int low_c = spec_.base_channels << (j + 1);
    const int skip_c = d.channels() - low_c;
    Tensor<T> skip(skip_c, d.height(), d.width());
    std::copy(d.values().begin() + static_cast<std::ptrdiff_t>(low_c * d.plane_size()), d.values().end(),
              skip.values().begin());
    skip_grads[j] = std::move(skip);
    Tensor<T> low(low_c, d.height() / 2, d.width() / 2, T{0});
    for (int c = 0; c < low_c; ++c) {
      for (int y = 0; y < d.height(); ++y) {
        for (int x = 0; x < d.width(); ++x) low(c, y / 2, x / 2) += d(c, y, x);
      }
    }
    d = std::move(low);
  }
  for (int i = depth - 1; i >= 0; --i) {
    if (i < depth - 1) {
      Tensor<T> g = std::move(skip_grads[i]);
      maxpool2_backward(d, trace.pool_argmax[i], g);
      d = std::move(g);
    }
    d = conv_back(std::move(d), true);
    d = conv_back(std::move(d), i > 0);
  }
}

template class SegmentationNet<float>;
template class SegmentationNet<double>;

Model init_params(const ModelSpec& spec, RandomStream& rng) {
  Model model(spec);
  auto params = model.params();
  for (const auto& layer : model.layers()) {
    const int fan_in = layer.in_channels * layer.kernel * layer.kernel;
    const double stddev = std::sqrt((layer.relu ? 2.0 : 1.0) / fan_in);
    const std::size_t count = static_cast<std::size_t>(fan_in) * layer.out_channels;
    for (std::size_t i = 0; i < count; ++i) {
      params[layer.weight_offset + i] = static_cast<float>(rng.normal(0.0, stddev));
    }
    for (int c = 0; c < layer.out_channels; ++c) params[layer.bias_offset + c] = 0.0f;
  }
  return model;
}

SoftPrediction forward(const Model& model, const EyeImage& image) {
  return SoftPrediction{model.forward(image.pixels)};
}

std::vector<SoftPrediction> forward(const Model& model, std::span<const EyeImage> batch) {
  std::vector<SoftPrediction> out;
  out.reserve(batch.size());
  for (const EyeImage& img : batch) out.push_back(forward(model, img));
  return out;
}

}  // namespace eyessl
