#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "gsv/pipeline.hpp"
#include "gsv/synthetic.hpp"

namespace gsv {

/// C x C pixel counts, rows = ground truth, columns = prediction. Pixels
/// labelled 255 in the ground truth are skipped.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes);

  void add(const LabelMap& truth, const LabelMap& prediction);
  void add(std::uint8_t truth, std::uint8_t prediction);
  void merge(const ConfusionMatrix& other);

  std::size_t classes() const { return classes_; }
  std::uint64_t at(std::size_t truth, std::size_t prediction) const { return counts_[truth * classes_ + prediction]; }
  std::uint64_t total() const;

 private:
  std::size_t classes_;
  std::vector<std::uint64_t> counts_;
};

/// Mean of TP / (TP + FP + FN) over classes with a nonzero union. Throws
/// std::domain_error when every count is zero.
double miou(const ConfusionMatrix& cm);

struct EvalResult {
  double average = 0;
  double minimum = 0;
  std::vector<double> per_distance;  // index i = frames since the keyframe
  std::size_t evaluated = 0;
  std::size_t skipped = 0;
};

using SegmenterFactory = std::function<std::unique_ptr<KeyframeSegmenter>(std::size_t snippet)>;

/// For each snippet and each distance i < l, starts a keyframe at anchor - i,
/// propagates to the anchor and scores it at full resolution. The anchor is
/// the last labelled frame; snippets with fewer than l frames up to it are
/// skipped. Confusion matrices pool all snippets per distance.
EvalResult eval_protocol(const PropagationModels& models, const PipelineConfig& config,
                         const std::vector<Snippet>& snippets, const SegmenterFactory& segmenter,
                         std::size_t interval, const PipelineOptions& options = {});

/// 2 * out_elems * in * k^2, plus out_elems with a bias.
double conv_flops(const ConvSpec& conv, std::size_t out_h, std::size_t out_w);

inline constexpr double kWarpFlopsPerElement = 11.0;

struct FlopReport {
  double keyframe = 0;
  double nonkeyframe = 0;
  double interval_average = 0;
  std::vector<std::pair<std::string, double>> nonkeyframe_parts;  // flow, warp, intra, spatial, guide, fusion
};

FlopReport count_flops(const PropagationModels& models, const PipelineConfig& config,
                       const KeyframeSegmenter& segmenter);

struct ParamCount {
  std::vector<std::pair<std::string, std::size_t>> modules;
  std::size_t total = 0;
};

ParamCount count_params(PropagationModels& models);

}  // namespace gsv
