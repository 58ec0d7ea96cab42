#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gsv/image.hpp"
#include "gsv/nn.hpp"

namespace gsv {

/// Image segmentation network used on keyframes. Output: class
/// probabilities at 1/8 of the input resolution.
class KeyframeSegmenter {
 public:
  virtual ~KeyframeSegmenter() = default;
  virtual SegTensor segment(const Tensor& frame, std::size_t frame_index) = 0;
  /// Analytic FLOPs for one call on an h x w input (0 when not modelled).
  virtual double flops(std::size_t /*h*/, std::size_t /*w*/) const { return 0.0; }
};

/// Replays precomputed probability maps, ignoring the pixels it is given.
class OracleSegmenter : public KeyframeSegmenter {
 public:
  using Provider = std::function<Tensor(std::size_t frame_index)>;
  explicit OracleSegmenter(Provider provider) : provider_(std::move(provider)) {}

  /// Block-averaged one-hot maps of the given labels.
  static OracleSegmenter from_labels(std::vector<LabelMap> labels, std::size_t classes);

  SegTensor segment(const Tensor& frame, std::size_t frame_index) override;

 private:
  Provider provider_;
};

/// Four 3x3 convolutions at the input resolution (3 -> W -> W -> W -> C),
/// logits resized to 1/8 and softmaxed. Deliberately heavy next to the
/// propagation path.
struct ToySegmenterParams {
  std::array<ConvSpec, 4> layers;
  ParamList parameters(const std::string& prefix = "segmenter");
};

ToySegmenterParams make_toy_segmenter(std::size_t width, std::size_t classes, Rng& rng);
Var toy_segment_logits(const ToySegmenterParams& params, const ParamBinder& bind, const Var& frame);

class ToySegmenter : public KeyframeSegmenter {
 public:
  explicit ToySegmenter(ToySegmenterParams params) : params_(std::move(params)) {}
  SegTensor segment(const Tensor& frame, std::size_t frame_index) override;
  double flops(std::size_t h, std::size_t w) const override;
  const ToySegmenterParams& params() const { return params_; }
  ToySegmenterParams& params() { return params_; }

 private:
  ToySegmenterParams params_;
};

}  // namespace gsv
