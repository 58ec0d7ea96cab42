#include "gsv/intra_net.hpp"

#include <stdexcept>

namespace gsv {

IntraNetParams make_intra_net(std::size_t width, std::size_t classes, Rng& rng) {
  IntraNetParams p;
  p.layers[0] = make_conv(3, width, 3, {1, 1, 1});
  p.layers[1] = make_conv(width, width, 3, {1, 1, 1});
  p.layers[2] = make_conv(width, classes, 3, {1, 1, 1});
  for (auto& c : p.layers) init_fan_in(c, rng);
  return p;
}

ParamList IntraNetParams::parameters(const std::string& prefix) {
  ParamList out;
  for (std::size_t i = 0; i < layers.size(); ++i) append_conv_params(layers[i], prefix + ".conv" + std::to_string(i), out);
  return out;
}

std::size_t intra_param_count(std::size_t width, std::size_t classes) {
  return (3 * 9 * width + width) + (width * 9 * width + width) + (width * 9 * classes + classes);
}

Var intra_segment(const IntraNetParams& params, const ParamBinder& bind, const Var& frame_small) {
  if (frame_small.shape().stack != 1 || frame_small.shape().channels != 3) {
    throw std::invalid_argument("intra_segment: expected a 3 x h x w frame, got " + frame_small.shape().str());
  }
  Var x = relu(conv2d(standardize_frame(frame_small), params.layers[0], bind));
  x = relu(conv2d(x, params.layers[1], bind));
  return conv2d(x, params.layers[2], bind);
}

SegTensor intra_segment(const IntraNetParams& params, const Tensor& frame_small) {
  return SegTensor{intra_segment(params, ParamBinder{}, Var::view(frame_small)).value(), SegSemantics::logits};
}

}  // namespace gsv
