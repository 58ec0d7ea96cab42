#pragma once

#include "gsv/autodiff.hpp"
#include "gsv/tensor.hpp"

namespace gsv {

/// Backward warp: out(c, y, x) = prev(c, y + flow_y(y, x), x + flow_x(y, x)),
/// bilinearly sampled, with source coordinates clamped to the border. The
/// same displacement applies to every channel.
SegTensor warp_segmentation(const SegTensor& prev, const FlowField& flow);
Tensor warp_bilinear(const Tensor& prev, const Tensor& flow);

struct WarpGrad {
  Tensor d_prev;
  Tensor d_flow;
};

/// Adjoints of `warp_bilinear` for an upstream gradient shaped like its output.
/// A flow component whose source coordinate was clamped gets zero gradient.
WarpGrad warp_grad(const Tensor& prev, const Tensor& flow, const Tensor& upstream);

Var warp(const Var& prev, const Var& flow);

}  // namespace gsv
