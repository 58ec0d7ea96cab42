#pragma once

#include <cstddef>
#include <vector>

#include "gsv/autodiff.hpp"
#include "gsv/tensor.hpp"

namespace gsv {

struct ConvGeometry {
  std::size_t stride = 1;
  std::size_t dilation = 1;
  std::size_t padding = 0;
};

/// Convolution layer: kernel stack (out x in x k x k), optional bias of
/// shape 1 x out x 1 x 1 (empty tensor = no bias). Zero padding.
struct ConvSpec {
  Tensor weight;
  Tensor bias;
  ConvGeometry geometry;

  std::size_t out_channels() const { return weight.shape().stack; }
  std::size_t in_channels() const { return weight.shape().channels; }
  std::size_t kernel_size() const { return weight.shape().height; }
  bool has_bias() const { return !bias.empty(); }
};

ConvSpec make_conv(std::size_t in, std::size_t out, std::size_t k, ConvGeometry g, bool bias = true);

/// floor((in + 2p - d(k-1) - 1)/s) + 1; throws std::invalid_argument when < 1.
std::size_t conv_output_extent(std::size_t in, std::size_t k, const ConvGeometry& g);

// Plain value operations.

Tensor conv2d(const Tensor& input, const ConvSpec& spec);
/// Align-corners-false bilinear sampling with edge clamping.
Tensor bilinear_resize(const Tensor& input, std::size_t out_h, std::size_t out_w);
/// Max-subtracted softmax across channels at every pixel.
Tensor softmax_channels(const Tensor& input);
/// Pads each border by `pad` copies of the edge value.
Tensor replicate_pad(const Tensor& input, std::size_t pad);
Tensor concat_channels(const std::vector<const Tensor*>& parts);

// Differentiable counterparts. An invalid `bias` Var means no bias.

Var conv2d(const Var& input, const Var& weight, const Var& bias, const ConvGeometry& g);
Var conv2d(const Var& input, const ConvSpec& spec, const ParamBinder& bind);
Var relu(const Var& x);
Var add(const Var& a, const Var& b);
Var scale(const Var& x, Real s);
/// s * x + b elementwise.
Var affine(const Var& x, Real s, Real b);
Var concat_channels(const std::vector<Var>& parts);
Var slice_channels(const Var& x, std::size_t begin, std::size_t count);
Var bilinear_resize(const Var& x, std::size_t out_h, std::size_t out_w);
Var softmax_channels(const Var& x);
Var replicate_pad(const Var& x, std::size_t pad);
/// Maps [0, 1] pixel values to roughly zero mean, unit spread before the
/// first convolution of the flow and intra networks.
Var standardize_frame(const Var& frame);
/// Sum of all elements as a 1x1x1 tensor.
Var sum_all(const Var& x);

}  // namespace gsv
