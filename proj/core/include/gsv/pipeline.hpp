#pragma once

#include <functional>
#include <optional>
#include <string>

#include "gsv/image.hpp"
#include "gsv/models.hpp"
#include "gsv/segmenter.hpp"

namespace gsv {

struct PipelineConfig {
  std::size_t keyframe_interval = 5;
  std::size_t classes = 4;
  std::size_t frame_height = 96;
  std::size_t frame_width = 96;
  /// Keyframe segmenter input scale; one of 1, 0.75, 0.6, 0.5.
  double keyframe_scale = 1.0;
  /// Flow-net input scale relative to the frame.
  double flow_input_scale = 0.5;

  /// Throws std::invalid_argument on any violated constraint.
  void validate() const;
  std::size_t seg_height() const { return frame_height / 8; }
  std::size_t seg_width() const { return frame_width / 8; }
};

enum class PropagationMode {
  guided,     // warp + ideal-delay shifts + intra candidate + guided fusion
  warp_only,  // flow + temporal warp only (ablation)
};

struct PipelineOptions {
  PropagationMode mode = PropagationMode::guided;
  /// Forces one-hot guidance on this candidate slot (diagnostics).
  std::optional<std::size_t> forced_guidance_slot;
};

enum class FrameKind { keyframe, propagated };

/// Wall-times in microseconds. Keyframes fill `segment_us` only.
struct StageTimings {
  FrameKind kind = FrameKind::keyframe;
  double segment_us = 0;
  double flow_us = 0;
  double warp_us = 0;
  double feature_us = 0;
  double fusion_us = 0;
  double total_us = 0;

  double stage_sum() const { return flow_us + warp_us + feature_us + fusion_us; }
};

/// `idx,kind,flow_us,warp_us,feat_us,fuse_us,total_us`
std::string format_timing_line(std::size_t index, const StageTimings& t);

/// Non-keyframe propagation on Vars, shared by inference and training.
/// `prev_seg` holds probabilities; frames are full-resolution 3 x H x W.
/// `intra_probs`, when given, receives the intra branch's own softmax
/// (guided mode only).
Var propagate_frame(const PropagationModels& models, const ParamBinder& bind, const PipelineOptions& options,
                    const Var& prev_seg, const Tensor& prev_flow_input,
                    const Tensor& cur_flow_input, const Tensor& frame, StageTimings* timings = nullptr,
                    Var* intra_probs = nullptr);

/// Frame as the flow net sees it (resized by `flow_input_scale`).
Tensor flow_input(const PipelineConfig& config, const Tensor& frame);

struct PipelineState {
  std::optional<Tensor> prev_seg;
  Tensor prev_flow_input;
  std::size_t frames_since_key = 0;
};

/// Keyframe scheduler: segments every `keyframe_interval`-th frame and
/// propagates through the rest. Single-threaded; one instance per stream.
class Pipeline {
 public:
  Pipeline(PipelineConfig config, const PropagationModels& models, KeyframeSegmenter& segmenter,
           PipelineOptions options = {});

  struct Step {
    SegTensor seg;
    StageTimings timings;
  };

  /// `frame_index` is forwarded to the segmenter on keyframes.
  Step step(const Tensor& frame, std::size_t frame_index);
  /// Next step becomes a keyframe.
  void reset();

  const PipelineConfig& config() const { return config_; }
  const PipelineState& state() const { return state_; }

 private:
  SegTensor segment_keyframe(const Tensor& frame, std::size_t frame_index);

  PipelineConfig config_;
  const PropagationModels& models_;
  KeyframeSegmenter& segmenter_;
  PipelineOptions options_;
  PipelineState state_;
};

/// Bilinear x8 (to H x W) then per-pixel argmax, ties to the lowest class.
LabelMap upsample_to_full(const SegTensor& seg, std::size_t height, std::size_t width);

using FrameSource = std::function<Tensor(std::size_t index)>;
using SegSink = std::function<void(std::size_t index, const SegTensor& seg, const StageTimings& timings)>;

/// Streams `count` frames through a fresh pipeline. Exceptions from the
/// source are rethrown with the frame index prepended.
void run_sequence(Pipeline& pipeline, std::size_t count, const FrameSource& source, const SegSink& sink);

}  // namespace gsv
