#pragma once

#include <array>

#include "gsv/nn.hpp"

namespace gsv {

/// Lightweight flow estimator: two stride-2 stem convs, a hierarchical
/// feature fusion block of four parallel dilated convs (dilations 1, 2, 4, 8)
/// and a 3x3 head producing two channels.
///
/// Block aggregation with d_i the dilated outputs:
///   s1 = d1 + d2, s2 = s1 + d3, s3 = s2 + d4, out = (s1 + s2 + s3) / 3.
struct FlowNetParams {
  std::array<ConvSpec, 2> stem;
  std::array<ConvSpec, 4> hffb;
  ConvSpec head;

  std::size_t width() const { return stem[0].out_channels(); }
  ParamList parameters(const std::string& prefix = "flow");
};

inline constexpr std::array<std::size_t, 4> kHffbDilations{1, 2, 4, 8};

/// Hidden layers fan-in initialized; head zeroed so the initial flow is zero.
FlowNetParams make_flow_net(std::size_t width, Rng& rng);

/// Frames are 3 x H' x W' with H', W' divisible by 4. The raw head output at
/// 1/4 of the input is bilinearly resized to (out_h, out_w).
FlowField estimate_flow(const FlowNetParams& params, const Tensor& frame_prev, const Tensor& frame_cur,
                        std::size_t out_h, std::size_t out_w);
Var estimate_flow(const FlowNetParams& params, const ParamBinder& bind, const Var& frame_prev,
                  const Var& frame_cur, std::size_t out_h, std::size_t out_w);

}  // namespace gsv
