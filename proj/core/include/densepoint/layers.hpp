#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace densepoint {

enum class LayerKind { conv, deconv, upsample2_nearest, relu, prelu, sigmoid };

const char* to_string(LayerKind kind);

struct FeatureShape {
  int channels = 0;
  int height = 0;
  int width = 0;

  std::size_t size() const {
    return static_cast<std::size_t>(channels) * static_cast<std::size_t>(height) *
           static_cast<std::size_t>(width);
  }
  friend bool operator==(const FeatureShape&, const FeatureShape&) = default;
};

// Channel-major (C x H x W) activation tensor.
struct FeatureMap {
  FeatureShape shape;
  std::vector<double> data;

  FeatureMap() = default;
  explicit FeatureMap(FeatureShape s, double fill = 0.0) : shape(s), data(s.size(), fill) {}
};

// One layer of a sequential branch.
//
// conv:   weights [out][in][k][k], then bias [out];
//         out = floor((in + 2 pad - dilation (k - 1) - 1) / stride) + 1
// deconv: transposed conv, weights [in][out][k][k], then bias [out];
//         out = (in - 1) stride - 2 pad + k
// prelu:  one learned slope per channel
// relu, sigmoid, upsample2_nearest: no parameters
struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  int kernel = 1;
  int stride = 1;
  int in_channels = 0;
  int out_channels = 0;
  int padding = 0;
  int dilation = 1;  // conv only

  static LayerSpec conv(int in, int out, int kernel, int stride, int padding, int dilation = 1);
  static LayerSpec deconv(int in, int out, int kernel, int stride, int padding);
  static LayerSpec upsample2_nearest(int channels);
  static LayerSpec relu(int channels);
  static LayerSpec prelu(int channels);
  static LayerSpec sigmoid(int channels);

  std::size_t parameter_count() const;
  // Throws ValidationError when the input does not fit this layer.
  FeatureShape output_shape(const FeatureShape& in) const;
  std::string describe() const;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

FeatureMap layer_forward(const LayerSpec& layer, std::span<const double> params,
                         const FeatureMap& in);

// Given the layer's input, output and dL/d(output), returns dL/d(input) and
// adds dL/d(params) into grad_params.
FeatureMap layer_backward(const LayerSpec& layer, std::span<const double> params,
                          const FeatureMap& in, const FeatureMap& out,
                          const FeatureMap& grad_out, std::span<double> grad_params);

}  // namespace densepoint
