#pragma once

#include <array>

#include "gsv/nn.hpp"
#include "gsv/spatial.hpp"

namespace gsv {

/// 1 x h x w sigmoid-clipped boundary response.
struct EdgeMap {
  Tensor response;
};

/// Per-pixel mixing weights over the D shifted candidates plus the intra
/// candidate (last channel). `normalized` is the channel softmax of `raw`.
struct GuidanceField {
  Tensor raw;
  Tensor normalized;
};

/// Guiding network: three 3x3 convs (C + 1) -> W -> W -> (D + 1) with
/// rectifiers between, plus the learnable edge gain stored as its logarithm.
struct GuideNetParams {
  std::array<ConvSpec, 3> layers;
  Tensor log_edge_scale;  // 1 x 1 x 1

  Real edge_scale() const;
  std::size_t candidates() const { return layers[2].out_channels(); }
  ParamList parameters(const std::string& prefix = "guide");
};

/// Hidden layers fan-in initialized, head zeroed (uniform initial mixing),
/// edge gain 1.
GuideNetParams make_guide_net(std::size_t classes, std::size_t candidates, std::size_t width, Rng& rng);

/// Sum over classes of |4-neighbour Laplacian| applied to the per-pixel argmax
/// one-hot map (ties to the lowest class). Borders replicate the edge value.
Tensor edge_response(const Tensor& warped);

EdgeMap edge_map(const SegTensor& warped, Real alpha);
/// Only `alpha` (a 1x1x1 Var) receives a gradient; argmax blocks the rest.
Var edge_map(const Var& warped, const Var& alpha);

GuidanceField guide(const GuideNetParams& params, const SegTensor& intra_logits, const EdgeMap& edges);
/// Returns the normalized guidance.
Var guide(const GuideNetParams& params, const ParamBinder& bind, const Var& intra_logits, const Var& edges);

/// out(c) = sum_d w_d * candidate_d(c) + w_D * intra(c), summed in bank order
/// with the intra slot last; one kernel per pixel shared by all classes.
SegTensor fuse(const ShiftStack& shifts, const SegTensor& intra, const GuidanceField& guidance);
Tensor fuse(const Tensor& candidates, const Tensor& intra, const Tensor& weights);
Var fuse(const Var& candidates, const Var& intra, const Var& weights);

/// Clamps to >= 0 and divides by the per-pixel sum. Pixels already
/// nonnegative with a sum within 64 ulp of one pass through unchanged.
Tensor renormalize(const Tensor& seg);
Var renormalize(const Var& seg);

Var exp(const Var& x);

}  // namespace gsv
