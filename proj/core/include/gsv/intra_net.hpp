#pragma once

#include <array>

#include "gsv/nn.hpp"

namespace gsv {

/// Three 3x3 stride-1 convolutions, 3 -> W -> W -> C, rectifiers between.
struct IntraNetParams {
  std::array<ConvSpec, 3> layers;

  std::size_t classes() const { return layers[2].out_channels(); }
  ParamList parameters(const std::string& prefix = "intra");
};

IntraNetParams make_intra_net(std::size_t width, std::size_t classes, Rng& rng);

/// (3 * 9 * W + W) + (W * 9 * W + W) + (W * 9 * C + C).
std::size_t intra_param_count(std::size_t width, std::size_t classes);

/// Per-class logits at the resolution of the (already downscaled) frame.
SegTensor intra_segment(const IntraNetParams& params, const Tensor& frame_small);
Var intra_segment(const IntraNetParams& params, const ParamBinder& bind, const Var& frame_small);

}  // namespace gsv
