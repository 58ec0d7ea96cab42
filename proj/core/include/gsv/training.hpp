#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "gsv/pipeline.hpp"
#include "gsv/synthetic.hpp"

namespace gsv {

struct OptimizerConfig {
  double base_lr = 0.002;
  double momentum = 0.9;
  double decay_factor = 0.992;
  std::uint64_t decay_every = 100;
  double weight_decay = 0.0005;
  std::size_t batch_size = 8;
};

/// Staircase schedule: base_lr * decay_factor^floor(iteration / decay_every).
double learning_rate(const OptimizerConfig& config, std::uint64_t iteration);

struct OptimizerState {
  OptimizerConfig config;
  std::map<std::string, Tensor> velocity;
  std::uint64_t iteration = 0;
};

/// v <- momentum * v + g + weight_decay * w (decay-tagged params only);
/// w <- w - lr(iteration) * v; then iteration += 1.
void sgd_step(const ParamList& params, const std::vector<Tensor>& grads, OptimizerState& state);

struct LossResult {
  Real loss = 0;
  Tensor grad;  // d loss / d probabilities
};

inline constexpr Real kProbabilityFloor = Real(1e-8);

/// Mean over non-ignored pixels of -log(max(p_true, 1e-8)). Labels must be
/// < C or the ignore value 255.
LossResult loss_cross_entropy(const Tensor& probs, const LabelMap& labels);
Var cross_entropy(const Var& probs, const LabelMap& labels);

struct CropRect {
  std::size_t y0 = 0, x0 = 0, height = 0, width = 0;
};

/// Labelled clips plus the frozen keyframe segmentation used to start each
/// training window.
struct TrainData {
  std::vector<Snippet> snippets;
  /// Keyframe probabilities at 1/8 of the crop. Defaults to block-averaged
  /// ground truth when unset.
  std::function<Tensor(std::size_t snippet, std::size_t frame, const CropRect& crop)> keyframe;
};

struct TrainConfig {
  std::vector<std::size_t> intervals{1, 2, 3, 4, 5};
  std::uint64_t seed = 0;
  double crop_fraction = 0.75;
  /// Weight of an extra cross-entropy on the intra branch's own prediction
  /// at the supervised frame (guided mode). Keeps that branch learning while
  /// the guide still ignores it.
  double intra_aux_weight = 1.0;
  PipelineOptions options;
};

/// One sampled training window.
struct TrainSample {
  std::size_t snippet = 0;
  std::size_t first_frame = 0;
  std::size_t interval = 1;
  CropRect crop;
};

struct LossPoint {
  std::uint64_t iteration = 0;
  double lr = 0;
  double loss = 0;
};

/// `iter,lr,loss` lines with a header.
std::string format_loss_curve(const std::vector<LossPoint>& curve);

struct BatchResult {
  double loss = 0;
  std::vector<TrainSample> samples;
  std::vector<Tensor> gradients;  // aligned with models.parameters()
};

/// End-to-end trainer for the propagation models. Sampling is a pure
/// function of (seed, iteration), so a resumed run continues exactly.
class Trainer {
 public:
  Trainer(PropagationModels& models, PipelineConfig pipeline, TrainConfig config, OptimizerState optimizer = {});

  /// Windows for one batch at `iteration` (epochs reshuffle the snippet order).
  std::vector<TrainSample> sample_batch(const TrainData& data, std::uint64_t iteration) const;

  /// Forward/backward for the batch at the current iteration without updating.
  BatchResult compute_batch(const TrainData& data) const;
  /// compute_batch + sgd_step; returns the recorded loss point.
  LossPoint step(const TrainData& data);
  std::vector<LossPoint> run(const TrainData& data, std::uint64_t iterations,
                             const std::function<void(const LossPoint&)>& on_step = {});

  /// Loss of one window; when `tape` is set the graph is recorded and
  /// backpropagated with seed `weight`.
  double sample_loss(const TrainData& data, const TrainSample& sample, GradTape* tape, Real weight) const;

  const OptimizerState& optimizer() const { return optimizer_; }
  OptimizerState& optimizer() { return optimizer_; }
  const PipelineConfig& pipeline_config() const { return pipeline_; }
  CropRect crop_size() const;

 private:
  PropagationModels& models_;
  PipelineConfig pipeline_;
  TrainConfig config_;
  OptimizerState optimizer_;
};

/// Trains `segmenter` on ground-truth labels at 1/8 scale (plain SGD with
/// the same optimizer recipe). Returns the loss curve.
std::vector<LossPoint> train_toy_segmenter(ToySegmenterParams& segmenter, const std::vector<Snippet>& snippets,
                                           std::size_t classes, std::uint64_t iterations, std::uint64_t seed,
                                           const OptimizerConfig& optimizer);

}  // namespace gsv
