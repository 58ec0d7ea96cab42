#include "gsv/segmenter.hpp"

#include <stdexcept>

namespace gsv {

OracleSegmenter OracleSegmenter::from_labels(std::vector<LabelMap> labels, std::size_t classes) {
  auto shared = std::make_shared<std::vector<LabelMap>>(std::move(labels));
  return OracleSegmenter([shared, classes](std::size_t i) {
    if (i >= shared->size()) throw std::out_of_range("oracle segmenter has no map for frame " + std::to_string(i));
    return label_probabilities((*shared)[i], classes, 8);
  });
}

SegTensor OracleSegmenter::segment(const Tensor& /*frame*/, std::size_t frame_index) {
  return SegTensor{provider_(frame_index), SegSemantics::probabilities};
}

ParamList ToySegmenterParams::parameters(const std::string& prefix) {
  ParamList out;
  for (std::size_t i = 0; i < layers.size(); ++i) append_conv_params(layers[i], prefix + ".conv" + std::to_string(i), out);
  return out;
}

ToySegmenterParams make_toy_segmenter(std::size_t width, std::size_t classes, Rng& rng) {
  ToySegmenterParams p;
  p.layers[0] = make_conv(3, width, 3, {1, 1, 1});
  p.layers[1] = make_conv(width, width, 3, {1, 1, 1});
  p.layers[2] = make_conv(width, width, 3, {1, 1, 1});
  p.layers[3] = make_conv(width, classes, 3, {1, 1, 1});
  for (auto& c : p.layers) init_fan_in(c, rng);
  return p;
}

Var toy_segment_logits(const ToySegmenterParams& params, const ParamBinder& bind, const Var& frame) {
  const Shape& s = frame.shape();
  if (s.channels != 3 || s.height < 8 || s.width < 8) {
    throw std::invalid_argument("toy segmenter: expected a 3 x H x W frame with H, W >= 8, got " + s.str());
  }
  Var x = frame;
  for (std::size_t i = 0; i < 3; ++i) x = relu(conv2d(x, params.layers[i], bind));
  x = conv2d(x, params.layers[3], bind);
  return bilinear_resize(x, s.height / 8, s.width / 8);
}

SegTensor ToySegmenter::segment(const Tensor& frame, std::size_t /*frame_index*/) {
  Var logits = toy_segment_logits(params_, ParamBinder{}, Var::view(frame));
  return SegTensor{softmax_channels(logits.value()), SegSemantics::probabilities};
}

double ToySegmenter::flops(std::size_t h, std::size_t w) const {
  double total = 0;
  const double px = static_cast<double>(h * w);
  for (const auto& c : params_.layers) {
    const double out = px * static_cast<double>(c.out_channels());
    total += 2.0 * out * static_cast<double>(c.in_channels() * c.kernel_size() * c.kernel_size()) + out;
  }
  return total;
}

}  // namespace gsv
