#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "gsv/pipeline.hpp"

namespace gsv {

struct StageStats {
  double mean_ms = 0;
  double std_ms = 0;
  bool operator==(const StageStats&) const = default;
};

/// Runtime breakdown plus optional accuracy figures. FPS "compute" counts
/// pipeline steps only; "end to end" adds frame decoding to tensors and the
/// full-resolution argmax.
struct BreakdownReport {
  std::size_t interval = 1;
  std::size_t frames = 0;  // measured (post-warmup) frames
  StageStats flow, warp, feature, fusion;  // over non-keyframes
  StageStats segment;                      // over keyframes
  StageStats step;                         // every measured frame
  double fps_compute = 0;
  double fps_end_to_end = 0;
  std::vector<double> per_distance;
  double average_miou = 0;
  double minimum_miou = 0;

  bool operator==(const BreakdownReport&) const = default;
};

/// `key=value` lines under a versioned header; reals printed with 17
/// significant digits so parsing restores them exactly.
std::string format_report(const BreakdownReport& r);
BreakdownReport parse_report(std::string_view text);

/// Streams `warmup` discarded frames, resets, then `reps` passes over
/// `frames`. Requires reps >= 1 and at least one frame.
BreakdownReport bench(Pipeline& pipeline, const std::vector<RgbImage>& frames, std::size_t warmup, std::size_t reps);

}  // namespace gsv
