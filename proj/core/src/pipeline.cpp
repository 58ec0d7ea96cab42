#include "gsv/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "gsv/io.hpp"
#include "gsv/warp.hpp"

namespace gsv {

namespace {

using Clock = std::chrono::steady_clock;

double micros_since(Clock::time_point start) {
  return std::chrono::duration<double, std::micro>(Clock::now() - start).count();
}

std::size_t scaled_extent(std::size_t n, double s) {
  return static_cast<std::size_t>(std::lround(static_cast<double>(n) * s));
}

void check_frame(const PipelineConfig& c, const Tensor& frame) {
  if (!(frame.shape() == chw(3, c.frame_height, c.frame_width))) {
    throw std::invalid_argument("frame " + frame.shape().str() + " does not match configured size " +
                                chw(3, c.frame_height, c.frame_width).str());
  }
}

}  // namespace

void PipelineConfig::validate() const {
  if (keyframe_interval < 1) throw std::invalid_argument("keyframe interval must be >= 1");
  if (classes < 1) throw std::invalid_argument("class count must be >= 1");
  if (frame_height == 0 || frame_width == 0 || frame_height % 8 != 0 || frame_width % 8 != 0) {
    throw std::invalid_argument("frame size " + std::to_string(frame_height) + "x" + std::to_string(frame_width) +
                                " must be a nonzero multiple of 8");
  }
  const double allowed[] = {1.0, 0.75, 0.6, 0.5};
  bool ok = false;
  for (double a : allowed) ok |= std::abs(keyframe_scale - a) < 1e-12;
  if (!ok) throw std::invalid_argument("keyframe scale must be one of 1, 0.75, 0.6, 0.5");
  const std::size_t fh = scaled_extent(frame_height, flow_input_scale);
  const std::size_t fw = scaled_extent(frame_width, flow_input_scale);
  if (flow_input_scale <= 0 || fh % 4 != 0 || fw % 4 != 0 || fh == 0 || fw == 0) {
    throw std::invalid_argument("flow input " + std::to_string(fh) + "x" + std::to_string(fw) +
                                " (scale " + std::to_string(flow_input_scale) + ") must be a multiple of 4");
  }
}

std::string format_timing_line(std::size_t index, const StageTimings& t) {
  char buf[256];
  const char* kind = t.kind == FrameKind::keyframe ? "key" : "prop";
  std::snprintf(buf, sizeof buf, "%zu,%s,%.1f,%.1f,%.1f,%.1f,%.1f", index, kind, t.flow_us, t.warp_us, t.feature_us,
                t.fusion_us, t.total_us);
  return buf;
}

Tensor flow_input(const PipelineConfig& config, const Tensor& frame) {
  const std::size_t h = scaled_extent(frame.height(), config.flow_input_scale);
  const std::size_t w = scaled_extent(frame.width(), config.flow_input_scale);
  if (h == frame.height() && w == frame.width()) return frame;
  return bilinear_resize(frame, h, w);
}

Var propagate_frame(const PropagationModels& models, const ParamBinder& bind, const PipelineOptions& options,
                    const Var& prev_seg, const Tensor& prev_flow_input,
                    const Tensor& cur_flow_input, const Tensor& frame, StageTimings* timings, Var* intra_probs) {
  const std::size_t sh = frame.height() / 8, sw = frame.width() / 8;
  auto start = Clock::now();

  Var flow = estimate_flow(models.flow, bind, Var::view(prev_flow_input), Var::view(cur_flow_input), sh, sw);
  if (timings) timings->flow_us = micros_since(start), start = Clock::now();

  Var warped = warp(prev_seg, flow);
  if (timings) timings->warp_us = micros_since(start), start = Clock::now();

  if (options.mode == PropagationMode::warp_only) {
    Var out = renormalize(warped);
    if (timings) timings->fusion_us = micros_since(start);
    return out;
  }

  Var small = Var::constant(bilinear_resize(frame, sh, sw));
  Var intra_logits = intra_segment(models.intra, bind, small);
  if (timings) timings->feature_us = micros_since(start), start = Clock::now();

  Var shifts = propagate_spatial(warped, models.bank, bind);
  Var weights;
  if (options.forced_guidance_slot) {
    const std::size_t slot = *options.forced_guidance_slot;
    if (slot > models.bank.size()) {
      throw std::invalid_argument("forced guidance slot " + std::to_string(slot) + " exceeds " +
                                  std::to_string(models.bank.size()));
    }
    Tensor w(chw(models.bank.size() + 1, sh, sw));
    for (std::size_t p = 0; p < sh * sw; ++p) w[slot * sh * sw + p] = Real(1);
    weights = Var::constant(std::move(w));
  } else {
    Var alpha = exp(bind(models.guide.log_edge_scale));
    Var edges = edge_map(warped, alpha);
    weights = guide(models.guide, bind, intra_logits, edges);
  }
  Var intra = softmax_channels(intra_logits);
  if (intra_probs) *intra_probs = intra;
  Var fused = fuse(shifts, intra, weights);
  Var out = renormalize(fused);
  if (timings) timings->fusion_us = micros_since(start);
  return out;
}

Pipeline::Pipeline(PipelineConfig config, const PropagationModels& models, KeyframeSegmenter& segmenter,
                   PipelineOptions options)
    : config_(config), models_(models), segmenter_(segmenter), options_(options) {
  config_.validate();
  if (models_.config.classes != config_.classes) {
    throw std::invalid_argument("models are built for " + std::to_string(models_.config.classes) +
                                " classes, pipeline configured for " + std::to_string(config_.classes));
  }
}

void Pipeline::reset() {
  state_ = PipelineState{};
}

SegTensor Pipeline::segment_keyframe(const Tensor& frame, std::size_t frame_index) {
  Tensor input = frame;
  if (config_.keyframe_scale != 1.0) {
    input = bilinear_resize(frame, scaled_extent(frame.height(), config_.keyframe_scale),
                            scaled_extent(frame.width(), config_.keyframe_scale));
  }
  SegTensor seg = segmenter_.segment(input, frame_index);
  if (seg.classes() != config_.classes) {
    throw std::invalid_argument("keyframe segmenter produced " + seg.scores.shape().str() + ", expected " +
                                std::to_string(config_.classes) + " classes");
  }
  if (seg.scores.height() != config_.seg_height() || seg.scores.width() != config_.seg_width()) {
    seg.scores = bilinear_resize(seg.scores, config_.seg_height(), config_.seg_width());
  }
  seg.semantics = SegSemantics::probabilities;
  return seg;
}

Pipeline::Step Pipeline::step(const Tensor& frame, std::size_t frame_index) {
  check_frame(config_, frame);
  Step out;
  const auto start = Clock::now();
  const bool keyframe = !state_.prev_seg || state_.frames_since_key % config_.keyframe_interval == 0;
  if (keyframe) {
    out.timings.kind = FrameKind::keyframe;
    out.seg = segment_keyframe(frame, frame_index);
    state_.frames_since_key = 0;
    state_.prev_flow_input = flow_input(config_, frame);
  } else {
    out.timings.kind = FrameKind::propagated;
    Tensor cur = flow_input(config_, frame);
    const double resize_us = micros_since(start);
    Var seg = propagate_frame(models_, ParamBinder{}, options_, Var::view(*state_.prev_seg),
                              state_.prev_flow_input, cur, frame, &out.timings);
    out.timings.flow_us += resize_us;
    out.seg = SegTensor{seg.value(), SegSemantics::probabilities};
    state_.prev_flow_input = std::move(cur);
  }
  state_.prev_seg = out.seg.scores;
  state_.frames_since_key = (state_.frames_since_key + 1) % config_.keyframe_interval;
  out.timings.total_us = micros_since(start);
  if (keyframe) out.timings.segment_us = out.timings.total_us;
  return out;
}

LabelMap upsample_to_full(const SegTensor& seg, std::size_t height, std::size_t width) {
  return argmax_labels(bilinear_resize(seg.scores, height, width));
}

void run_sequence(Pipeline& pipeline, std::size_t count, const FrameSource& source, const SegSink& sink) {
  if (count == 0) throw std::invalid_argument("run_sequence: empty sequence");
  pipeline.reset();
  for (std::size_t i = 0; i < count; ++i) {
    Tensor frame;
    try {
      frame = source(i);
    } catch (const IoError& e) {
      throw IoError(e.path(), "frame " + std::to_string(i) + ": " + e.what());
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("frame " + std::to_string(i) + ": " + e.what());
    } catch (const std::exception& e) {
      throw std::runtime_error("frame " + std::to_string(i) + ": " + e.what());
    }
    auto step = pipeline.step(frame, i);
    sink(i, step.seg, step.timings);
  }
}

}  // namespace gsv
