#include "densepoint/layers.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Core>

#include "densepoint/errors.hpp"

namespace densepoint {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;
using MatrixMap = Eigen::Map<RowMatrix>;

// Unfold image patches: row (c, ky, kx), column (oy, ox).
void im2col(const double* image, int channels, int height, int width, int kernel, int stride,
            int pad, int dilation, int out_h, int out_w, double* col) {
  const std::size_t cols = static_cast<std::size_t>(out_h) * static_cast<std::size_t>(out_w);
  for (int c = 0; c < channels; ++c) {
    const double* plane = image + static_cast<std::size_t>(c) * height * width;
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        double* row = col + (static_cast<std::size_t>(c * kernel + ky) * kernel + kx) * cols;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky * dilation;
          double* dst = row + static_cast<std::size_t>(oy) * out_w;
          if (iy < 0 || iy >= height) {
            std::fill(dst, dst + out_w, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(iy) * width;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx * dilation;
            dst[ox] = (ix >= 0 && ix < width) ? src[ix] : 0.0;
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatter-add patch columns back into the image.
void col2im(const double* col, int channels, int height, int width, int kernel, int stride,
            int pad, int dilation, int out_h, int out_w, double* image) {
  const std::size_t cols = static_cast<std::size_t>(out_h) * static_cast<std::size_t>(out_w);
  std::fill(image, image + static_cast<std::size_t>(channels) * height * width, 0.0);
  for (int c = 0; c < channels; ++c) {
    double* plane = image + static_cast<std::size_t>(c) * height * width;
    for (int ky = 0; ky < kernel; ++ky) {
      for (int kx = 0; kx < kernel; ++kx) {
        const double* row = col + (static_cast<std::size_t>(c * kernel + ky) * kernel + kx) * cols;
        for (int oy = 0; oy < out_h; ++oy) {
          const int iy = oy * stride - pad + ky * dilation;
          if (iy < 0 || iy >= height) {
            continue;
          }
          double* dst = plane + static_cast<std::size_t>(iy) * width;
          const double* src = row + static_cast<std::size_t>(oy) * out_w;
          for (int ox = 0; ox < out_w; ++ox) {
            const int ix = ox * stride - pad + kx * dilation;
            if (ix >= 0 && ix < width) {
              dst[ix] += src[ox];
            }
          }
        }
      }
    }
  }
}

int plane_size(const FeatureShape& s) { return s.height * s.width; }

// Every matrix handed to Eigen lives in one of these per-thread slots. Eigen
// peels unaligned leading elements into scalar code while the vector body
// uses fused multiply-add, so a caller's heap address could otherwise change
// the rounding. Aligned slots make the code path, and the result, depend on
// shapes alone. Reuse also keeps multi-MB patch matrices off the mmap path.
enum Slot { kCol, kDcol, kWeights, kOperand, kProduct, kSlotCount };

double* scratch(Slot slot, std::size_t size) {
  thread_local std::vector<double, Eigen::aligned_allocator<double>> buffers[kSlotCount];
  auto& buf = buffers[slot];
  if (buf.size() < size) {
    buf.resize(size);
  }
  return buf.data();
}

const double* staged(Slot slot, const double* src, std::size_t size) {
  double* dst = scratch(slot, size);
  std::copy(src, src + size, dst);
  return dst;
}

void accumulate(const double* src, std::size_t size, double* dst) {
  for (std::size_t i = 0; i < size; ++i) {
    dst[i] += src[i];
  }
}

// dst[c][i] = src[c][i] + bias[c], or += when src is null.
void add_channel_bias(const double* bias, int channels, std::size_t plane, const double* src,
                      double* dst) {
  for (int c = 0; c < channels; ++c) {
    const std::size_t base = static_cast<std::size_t>(c) * plane;
    for (std::size_t i = 0; i < plane; ++i) {
      dst[base + i] = (src ? src[base + i] : dst[base + i]) + bias[c];
    }
  }
}

void accumulate_channel_sums(const double* g, int channels, std::size_t plane, double* dbias) {
  for (int c = 0; c < channels; ++c) {
    const double* p = g + static_cast<std::size_t>(c) * plane;
    double s = 0.0;
    for (std::size_t i = 0; i < plane; ++i) {
      s += p[i];
    }
    dbias[c] += s;
  }
}

FeatureMap conv_forward(const LayerSpec& l, std::span<const double> params, const FeatureMap& in,
                        const FeatureShape& out_shape) {
  const int patch = l.in_channels * l.kernel * l.kernel;
  const int positions = plane_size(out_shape);
  const std::size_t nw = static_cast<std::size_t>(l.out_channels) * patch;
  double* col = scratch(kCol, static_cast<std::size_t>(patch) * positions);
  im2col(in.data.data(), in.shape.channels, in.shape.height, in.shape.width, l.kernel, l.stride,
         l.padding, l.dilation, out_shape.height, out_shape.width, col);
  const double* w = staged(kWeights, params.data(), nw);
  double* product = scratch(kProduct, static_cast<std::size_t>(l.out_channels) * positions);
  MatrixMap(product, l.out_channels, positions).noalias() =
      ConstMatrixMap(w, l.out_channels, patch) * ConstMatrixMap(col, patch, positions);
  FeatureMap out(out_shape);
  add_channel_bias(params.data() + nw, l.out_channels, static_cast<std::size_t>(positions), product,
                   out.data.data());
  return out;
}

FeatureMap conv_backward(const LayerSpec& l, std::span<const double> params, const FeatureMap& in,
                         const FeatureMap& grad_out, std::span<double> grad_params) {
  const int patch = l.in_channels * l.kernel * l.kernel;
  const int positions = plane_size(grad_out.shape);
  const std::size_t nw = static_cast<std::size_t>(l.out_channels) * patch;
  double* col = scratch(kCol, static_cast<std::size_t>(patch) * positions);
  im2col(in.data.data(), in.shape.channels, in.shape.height, in.shape.width, l.kernel, l.stride,
         l.padding, l.dilation, grad_out.shape.height, grad_out.shape.width, col);
  const ConstMatrixMap dout(staged(kOperand, grad_out.data.data(), grad_out.data.size()),
                            l.out_channels, positions);
  double* dweights = scratch(kProduct, nw);
  MatrixMap(dweights, l.out_channels, patch).noalias() =
      dout * ConstMatrixMap(col, patch, positions).transpose();
  accumulate(dweights, nw, grad_params.data());
  accumulate_channel_sums(grad_out.data.data(), l.out_channels, static_cast<std::size_t>(positions),
                          grad_params.data() + nw);

  const double* w = staged(kWeights, params.data(), nw);
  double* dcol = scratch(kDcol, static_cast<std::size_t>(patch) * positions);
  MatrixMap(dcol, patch, positions).noalias() =
      ConstMatrixMap(w, l.out_channels, patch).transpose() * dout;
  FeatureMap grad_in(in.shape);
  col2im(dcol, in.shape.channels, in.shape.height, in.shape.width, l.kernel, l.stride, l.padding,
         l.dilation, grad_out.shape.height, grad_out.shape.width, grad_in.data.data());
  return grad_in;
}

// A transposed conv is the input-gradient of the matching forward conv.
FeatureMap deconv_forward(const LayerSpec& l, std::span<const double> params,
                          const FeatureMap& in, const FeatureShape& out_shape) {
  const int taps = l.out_channels * l.kernel * l.kernel;
  const int positions = plane_size(in.shape);
  const std::size_t nw = static_cast<std::size_t>(l.in_channels) * taps;
  const double* w = staged(kWeights, params.data(), nw);
  const double* x = staged(kOperand, in.data.data(), in.data.size());
  double* col = scratch(kCol, static_cast<std::size_t>(taps) * positions);
  MatrixMap(col, taps, positions).noalias() = ConstMatrixMap(w, l.in_channels, taps).transpose() *
                                              ConstMatrixMap(x, l.in_channels, positions);
  FeatureMap out(out_shape);
  col2im(col, out_shape.channels, out_shape.height, out_shape.width, l.kernel, l.stride, l.padding,
         1, in.shape.height, in.shape.width, out.data.data());
  add_channel_bias(params.data() + nw, out_shape.channels,
                   static_cast<std::size_t>(plane_size(out_shape)), nullptr, out.data.data());
  return out;
}

FeatureMap deconv_backward(const LayerSpec& l, std::span<const double> params,
                           const FeatureMap& in, const FeatureMap& grad_out,
                           std::span<double> grad_params) {
  const int taps = l.out_channels * l.kernel * l.kernel;
  const int positions = plane_size(in.shape);
  const std::size_t nw = static_cast<std::size_t>(l.in_channels) * taps;
  double* dcol = scratch(kDcol, static_cast<std::size_t>(taps) * positions);
  im2col(grad_out.data.data(), grad_out.shape.channels, grad_out.shape.height,
         grad_out.shape.width, l.kernel, l.stride, l.padding, 1, in.shape.height, in.shape.width,
         dcol);
  const ConstMatrixMap dcols(dcol, taps, positions);
  const ConstMatrixMap x(staged(kOperand, in.data.data(), in.data.size()), l.in_channels, positions);
  double* dweights = scratch(kProduct, nw);
  MatrixMap(dweights, l.in_channels, taps).noalias() = x * dcols.transpose();
  accumulate(dweights, nw, grad_params.data());
  accumulate_channel_sums(grad_out.data.data(), grad_out.shape.channels,
                          static_cast<std::size_t>(plane_size(grad_out.shape)),
                          grad_params.data() + nw);

  const double* w = staged(kWeights, params.data(), nw);
  double* gin = scratch(kProduct, in.data.size());
  MatrixMap(gin, l.in_channels, positions).noalias() = ConstMatrixMap(w, l.in_channels, taps) * dcols;
  FeatureMap grad_in(in.shape);
  std::copy(gin, gin + in.data.size(), grad_in.data.begin());
  return grad_in;
}

}  // namespace

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv: return "conv";
    case LayerKind::deconv: return "deconv";
    case LayerKind::upsample2_nearest: return "upsample2_nearest";
    case LayerKind::relu: return "relu";
    case LayerKind::prelu: return "prelu";
    case LayerKind::sigmoid: return "sigmoid";
  }
  return "?";
}

LayerSpec LayerSpec::conv(int in, int out, int kernel, int stride, int padding, int dilation) {
  return {LayerKind::conv, kernel, stride, in, out, padding, dilation};
}
LayerSpec LayerSpec::deconv(int in, int out, int kernel, int stride, int padding) {
  return {LayerKind::deconv, kernel, stride, in, out, padding};
}
LayerSpec LayerSpec::upsample2_nearest(int channels) {
  return {LayerKind::upsample2_nearest, 1, 2, channels, channels, 0};
}
LayerSpec LayerSpec::relu(int channels) { return {LayerKind::relu, 1, 1, channels, channels, 0}; }
LayerSpec LayerSpec::prelu(int channels) { return {LayerKind::prelu, 1, 1, channels, channels, 0}; }
LayerSpec LayerSpec::sigmoid(int channels) {
  return {LayerKind::sigmoid, 1, 1, channels, channels, 0};
}

std::size_t LayerSpec::parameter_count() const {
  const auto in = static_cast<std::size_t>(in_channels);
  const auto out = static_cast<std::size_t>(out_channels);
  const auto k2 = static_cast<std::size_t>(kernel) * static_cast<std::size_t>(kernel);
  switch (kind) {
    case LayerKind::conv:
    case LayerKind::deconv: return in * out * k2 + out;
    case LayerKind::prelu: return out;
    default: return 0;
  }
}

FeatureShape LayerSpec::output_shape(const FeatureShape& in) const {
  if (in.channels != in_channels) {
    throw ValidationError(describe() + ": expects " + std::to_string(in_channels) +
                          " input channels, got " + std::to_string(in.channels));
  }
  if (in_channels < 1 || out_channels < 1) {
    throw ValidationError(describe() + ": channel counts must be >= 1");
  }
  switch (kind) {
    case LayerKind::conv: {
      if (kernel < 1 || stride < 1 || padding < 0 || dilation < 1) {
        throw ValidationError(describe() + ": invalid geometry");
      }
      const int span = dilation * (kernel - 1) + 1;
      const int h = (in.height + 2 * padding - span);
      const int w = (in.width + 2 * padding - span);
      if (h < 0 || w < 0) {
        throw ValidationError(describe() + ": input smaller than kernel");
      }
      return {out_channels, h / stride + 1, w / stride + 1};
    }
    case LayerKind::deconv: {
      if (kernel < 1 || stride < 1 || padding < 0 || dilation != 1) {
        throw ValidationError(describe() + ": invalid geometry");
      }
      const int h = (in.height - 1) * stride - 2 * padding + kernel;
      const int w = (in.width - 1) * stride - 2 * padding + kernel;
      if (h < 1 || w < 1) {
        throw ValidationError(describe() + ": empty output");
      }
      return {out_channels, h, w};
    }
    case LayerKind::upsample2_nearest: return {out_channels, in.height * 2, in.width * 2};
    default:
      if (in_channels != out_channels) {
        throw ValidationError(describe() + ": activation must preserve channels");
      }
      return in;
  }
}

std::string LayerSpec::describe() const {
  std::string s = to_string(kind);
  s += "(" + std::to_string(in_channels) + "->" + std::to_string(out_channels);
  if (kind == LayerKind::conv || kind == LayerKind::deconv) {
    s += ",k" + std::to_string(kernel) + ",s" + std::to_string(stride) + ",p" +
         std::to_string(padding);
    if (dilation != 1) {
      s += ",d" + std::to_string(dilation);
    }
  }
  return s + ")";
}

FeatureMap layer_forward(const LayerSpec& layer, std::span<const double> params,
                         const FeatureMap& in) {
  const FeatureShape out_shape = layer.output_shape(in.shape);
  switch (layer.kind) {
    case LayerKind::conv: return conv_forward(layer, params, in, out_shape);
    case LayerKind::deconv: return deconv_forward(layer, params, in, out_shape);
    case LayerKind::upsample2_nearest: {
      FeatureMap out(out_shape);
      for (int c = 0; c < out_shape.channels; ++c) {
        for (int y = 0; y < out_shape.height; ++y) {
          for (int x = 0; x < out_shape.width; ++x) {
            out.data[(static_cast<std::size_t>(c) * out_shape.height + y) * out_shape.width + x] =
                in.data[(static_cast<std::size_t>(c) * in.shape.height + y / 2) * in.shape.width + x / 2];
          }
        }
      }
      return out;
    }
    case LayerKind::relu: {
      FeatureMap out = in;
      for (double& v : out.data) {
        v = v > 0.0 ? v : 0.0;
      }
      return out;
    }
    case LayerKind::prelu: {
      FeatureMap out = in;
      const std::size_t plane = static_cast<std::size_t>(plane_size(in.shape));
      for (int c = 0; c < in.shape.channels; ++c) {
        double* p = out.data.data() + c * plane;
        for (std::size_t i = 0; i < plane; ++i) {
          p[i] = p[i] > 0.0 ? p[i] : params[c] * p[i];
        }
      }
      return out;
    }
    case LayerKind::sigmoid: {
      FeatureMap out = in;
      for (double& v : out.data) {
        v = 1.0 / (1.0 + std::exp(-v));
      }
      return out;
    }
  }
  throw ValidationError("layer_forward: unknown layer kind");
}

FeatureMap layer_backward(const LayerSpec& layer, std::span<const double> params,
                          const FeatureMap& in, const FeatureMap& out,
                          const FeatureMap& grad_out, std::span<double> grad_params) {
  if (!(grad_out.shape == out.shape)) {
    throw ValidationError(layer.describe() + ": gradient shape mismatch");
  }
  switch (layer.kind) {
    case LayerKind::conv: return conv_backward(layer, params, in, grad_out, grad_params);
    case LayerKind::deconv: return deconv_backward(layer, params, in, grad_out, grad_params);
    case LayerKind::upsample2_nearest: {
      FeatureMap grad_in(in.shape);
      for (int c = 0; c < out.shape.channels; ++c) {
        for (int y = 0; y < out.shape.height; ++y) {
          for (int x = 0; x < out.shape.width; ++x) {
            grad_in.data[(static_cast<std::size_t>(c) * in.shape.height + y / 2) * in.shape.width + x / 2] +=
                grad_out.data[(static_cast<std::size_t>(c) * out.shape.height + y) * out.shape.width + x];
          }
        }
      }
      return grad_in;
    }
    case LayerKind::relu: {
      FeatureMap grad_in = grad_out;
      for (std::size_t i = 0; i < grad_in.data.size(); ++i) {
        if (!(in.data[i] > 0.0)) {
          grad_in.data[i] = 0.0;
        }
      }
      return grad_in;
    }
    case LayerKind::prelu: {
      FeatureMap grad_in = grad_out;
      const std::size_t plane = static_cast<std::size_t>(plane_size(in.shape));
      for (int c = 0; c < in.shape.channels; ++c) {
        double slope_grad = 0.0;
        for (std::size_t i = c * plane; i < (c + 1) * plane; ++i) {
          if (!(in.data[i] > 0.0)) {
            slope_grad += grad_out.data[i] * in.data[i];
            grad_in.data[i] *= params[c];
          }
        }
        grad_params[c] += slope_grad;
      }
      return grad_in;
    }
    case LayerKind::sigmoid: {
      FeatureMap grad_in = grad_out;
      for (std::size_t i = 0; i < grad_in.data.size(); ++i) {
        const double s = out.data[i];
        grad_in.data[i] *= s * (1.0 - s);
      }
      return grad_in;
    }
  }
  throw ValidationError("layer_backward: unknown layer kind");
}

}  // namespace densepoint
