#include "gsv/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace gsv {

ConfusionMatrix::ConfusionMatrix(std::size_t classes) : classes_(classes), counts_(classes * classes, 0) {
  if (classes == 0) throw std::invalid_argument("confusion matrix needs at least one class");
}

void ConfusionMatrix::add(std::uint8_t truth, std::uint8_t prediction) {
  if (truth == kIgnoreLabel) return;
  if (truth >= classes_ || prediction >= classes_) {
    throw std::invalid_argument("label pair (" + std::to_string(truth) + "," + std::to_string(prediction) +
                                ") outside " + std::to_string(classes_) + " classes");
  }
  ++counts_[truth * classes_ + prediction];
}

void ConfusionMatrix::add(const LabelMap& truth, const LabelMap& prediction) {
  if (truth.height != prediction.height || truth.width != prediction.width) {
    throw std::invalid_argument("label maps " + std::to_string(truth.height) + "x" + std::to_string(truth.width) +
                                " vs " + std::to_string(prediction.height) + "x" + std::to_string(prediction.width));
  }
  for (std::size_t i = 0; i < truth.labels.size(); ++i) add(truth.labels[i], prediction.labels[i]);
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
  if (other.classes_ != classes_) throw std::invalid_argument("cannot merge confusion matrices of different size");
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
}

std::uint64_t ConfusionMatrix::total() const {
  std::uint64_t t = 0;
  for (auto c : counts_) t += c;
  return t;
}

double miou(const ConfusionMatrix& cm) {
  const std::size_t c = cm.classes();
  double sum = 0;
  std::size_t used = 0;
  for (std::size_t k = 0; k < c; ++k) {
    std::uint64_t tp = cm.at(k, k), fp = 0, fn = 0;
    for (std::size_t j = 0; j < c; ++j) {
      if (j == k) continue;
      fn += cm.at(k, j);
      fp += cm.at(j, k);
    }
    const std::uint64_t uni = tp + fp + fn;
    if (uni == 0) continue;
    sum += static_cast<double>(tp) / static_cast<double>(uni);
    ++used;
  }
  if (used == 0) throw std::domain_error("mIoU undefined: confusion matrix is empty");
  return sum / static_cast<double>(used);
}

EvalResult eval_protocol(const PropagationModels& models, const PipelineConfig& config,
                         const std::vector<Snippet>& snippets, const SegmenterFactory& segmenter,
                         std::size_t interval, const PipelineOptions& options) {
  if (interval == 0) throw std::invalid_argument("eval interval must be >= 1");
  PipelineConfig cfg = config;
  cfg.keyframe_interval = interval;
  std::vector<ConfusionMatrix> per(interval, ConfusionMatrix(config.classes));
  EvalResult r;
  for (std::size_t s = 0; s < snippets.size(); ++s) {
    const Snippet& snip = snippets[s];
    std::size_t anchor = snip.labels.size();
    while (anchor > 0 && snip.labels[anchor - 1].height == 0) --anchor;
    if (anchor == 0 || anchor < interval || anchor > snip.frames.size()) {
      ++r.skipped;
      continue;
    }
    --anchor;
    auto seg = segmenter(s);
    Pipeline pipe(cfg, models, *seg, options);
    for (std::size_t i = 0; i < interval; ++i) {
      pipe.reset();
      SegTensor out;
      for (std::size_t t = anchor - i; t <= anchor; ++t) out = pipe.step(to_tensor(snip.frames[t]), t).seg;
      per[i].add(snip.labels[anchor], upsample_to_full(out, cfg.frame_height, cfg.frame_width));
    }
    ++r.evaluated;
  }
  if (r.evaluated == 0) throw std::invalid_argument("no snippet has " + std::to_string(interval) + " frames up to a labelled anchor");
  for (const auto& cm : per) r.per_distance.push_back(miou(cm));
  double sum = 0;
  for (double v : r.per_distance) sum += v;
  r.average = sum / static_cast<double>(interval);
  r.minimum = r.per_distance.back();
  return r;
}

double conv_flops(const ConvSpec& conv, std::size_t out_h, std::size_t out_w) {
  const double out = static_cast<double>(conv.out_channels() * out_h * out_w);
  const double k = static_cast<double>(conv.kernel_size());
  double f = 2.0 * out * static_cast<double>(conv.in_channels()) * k * k;
  if (conv.has_bias()) f += out;
  return f;
}

FlopReport count_flops(const PropagationModels& models, const PipelineConfig& config,
                       const KeyframeSegmenter& segmenter) {
  config.validate();
  FlopReport r;
  const std::size_t sh = config.seg_height(), sw = config.seg_width();
  const auto fh = static_cast<std::size_t>(std::lround(static_cast<double>(config.frame_height) * config.flow_input_scale));
  const auto fw = static_cast<std::size_t>(std::lround(static_cast<double>(config.frame_width) * config.flow_input_scale));

  double flow = 0;
  std::size_t h = fh, w = fw;
  for (const auto& c : models.flow.stem) {
    h = conv_output_extent(h, c.kernel_size(), c.geometry);
    w = conv_output_extent(w, c.kernel_size(), c.geometry);
    flow += conv_flops(c, h, w);
  }
  for (const auto& c : models.flow.hffb) flow += conv_flops(c, h, w);
  flow += conv_flops(models.flow.head, h, w);

  const double cls_px = static_cast<double>(config.classes * sh * sw);
  const double warp = kWarpFlopsPerElement * cls_px;
  double intra = 0;
  for (const auto& c : models.intra.layers) intra += conv_flops(c, sh, sw);
  const double d = static_cast<double>(models.bank.size());
  const double k = static_cast<double>(models.bank.kernel_size);
  const double spatial = models.bank.learnable ? 2.0 * d * cls_px * k * k : 0.0;
  double guide_f = 0;
  for (const auto& c : models.guide.layers) guide_f += conv_flops(c, sh, sw);
  const double fusion = 2.0 * (d + 1.0) * cls_px;

  r.nonkeyframe_parts = {{"flow", flow}, {"warp", warp}, {"intra", intra},
                         {"spatial", spatial}, {"guide", guide_f}, {"fusion", fusion}};
  for (const auto& [_, v] : r.nonkeyframe_parts) r.nonkeyframe += v;
  r.keyframe = segmenter.flops(
      static_cast<std::size_t>(std::lround(static_cast<double>(config.frame_height) * config.keyframe_scale)),
      static_cast<std::size_t>(std::lround(static_cast<double>(config.frame_width) * config.keyframe_scale)));
  const double l = static_cast<double>(config.keyframe_interval);
  r.interval_average = (r.keyframe + (l - 1.0) * r.nonkeyframe) / l;
  return r;
}

ParamCount count_params(PropagationModels& models) {
  ParamCount r;
  r.modules.emplace_back("flow", element_count(models.flow.parameters()));
  r.modules.emplace_back("intra", element_count(models.intra.parameters()));
  r.modules.emplace_back("guide", element_count(models.guide.parameters()));
  r.modules.emplace_back("bank", models.bank.learnable ? models.bank.kernels.size() : 0);
  for (const auto& [_, n] : r.modules) r.total += n;
  return r;
}

}  // namespace gsv
