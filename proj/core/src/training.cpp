#include "gsv/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <stdexcept>

namespace gsv {

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t x = a ^ (b + 0x9E3779B97F4A7C15ull + (a << 6) + (a >> 2));
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

void check_labels(const Tensor& probs, const LabelMap& labels) {
  if (probs.shape().stack != 1 || probs.height() != labels.height || probs.width() != labels.width) {
    throw std::invalid_argument("cross entropy: prediction " + probs.shape().str() + " vs labels " +
                                std::to_string(labels.height) + "x" + std::to_string(labels.width));
  }
  for (std::size_t y = 0; y < labels.height; ++y) {
    for (std::size_t x = 0; x < labels.width; ++x) {
      const std::uint8_t l = labels.at(y, x);
      if (l != kIgnoreLabel && l >= probs.channels()) {
        throw std::invalid_argument("cross entropy: label " + std::to_string(l) + " at (" + std::to_string(y) + "," +
                                    std::to_string(x) + ") outside [0, " + std::to_string(probs.channels()) + ")");
      }
    }
  }
}

std::vector<std::size_t> labelled_frames(const Snippet& s) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < s.labels.size(); ++i) {
    if (s.labels[i].height != 0) out.push_back(i);
  }
  return out;
}

}  // namespace

double learning_rate(const OptimizerConfig& config, std::uint64_t iteration) {
  const auto steps = static_cast<double>(iteration / config.decay_every);
  return config.base_lr * std::pow(config.decay_factor, steps);
}

void sgd_step(const ParamList& params, const std::vector<Tensor>& grads, OptimizerState& state) {
  if (params.size() != grads.size()) {
    throw std::invalid_argument("sgd_step: " + std::to_string(grads.size()) + " gradients for " +
                                std::to_string(params.size()) + " parameters");
  }
  const Real lr = static_cast<Real>(learning_rate(state.config, state.iteration));
  const auto mu = static_cast<Real>(state.config.momentum);
  const auto wd = static_cast<Real>(state.config.weight_decay);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& w = *params[i].tensor;
    const Tensor& g = grads[i];
    require_same_shape(w, g, ("sgd_step " + params[i].name).c_str());
    auto [it, inserted] = state.velocity.try_emplace(params[i].name, w.shape());
    Tensor& v = it->second;
    require_same_shape(w, v, ("sgd_step velocity " + params[i].name).c_str());
    const Real decay = params[i].decay ? wd : Real(0);
    for (std::size_t j = 0; j < w.size(); ++j) {
      v[j] = mu * v[j] + g[j] + decay * w[j];
      w[j] -= lr * v[j];
    }
  }
  ++state.iteration;
}

LossResult loss_cross_entropy(const Tensor& probs, const LabelMap& labels) {
  check_labels(probs, labels);
  const std::size_t plane = probs.shape().plane();
  std::size_t counted = 0;
  for (std::uint8_t l : labels.labels) counted += l != kIgnoreLabel;
  LossResult r{0, Tensor(probs.shape())};
  if (counted == 0) return r;
  const Real n = static_cast<Real>(counted);
  for (std::size_t p = 0; p < plane; ++p) {
    const std::uint8_t l = labels.labels[p];
    if (l == kIgnoreLabel) continue;
    const Real v = probs[l * plane + p];
    r.loss -= std::log(std::max(v, kProbabilityFloor));
    if (v > kProbabilityFloor) r.grad[l * plane + p] = Real(-1) / (n * v);
  }
  r.loss /= n;
  return r;
}

Var cross_entropy(const Var& probs, const LabelMap& labels) {
  LossResult r = loss_cross_entropy(probs.value(), labels);
  auto grad = std::make_shared<Tensor>(std::move(r.grad));
  return Var::make(Tensor(chw(1, 1, 1), r.loss), {&probs}, [probs, grad](const Tensor& g) {
    Tensor d = *grad;
    for (Real& v : d.data()) v *= g[0];
    probs.add_grad(d);
  });
}

std::string format_loss_curve(const std::vector<LossPoint>& curve) {
  std::string out = "iter,lr,loss\n";
  char buf[128];
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof buf, "%llu,%.9g,%.9g\n", static_cast<unsigned long long>(p.iteration), p.lr, p.loss);
    out += buf;
  }
  return out;
}

Trainer::Trainer(PropagationModels& models, PipelineConfig pipeline, TrainConfig config, OptimizerState optimizer)
    : models_(models), pipeline_(pipeline), config_(std::move(config)), optimizer_(std::move(optimizer)) {
  if (config_.intervals.empty()) throw std::invalid_argument("trainer needs at least one keyframe interval");
  for (std::size_t l : config_.intervals) {
    if (l == 0) throw std::invalid_argument("keyframe interval must be >= 1");
  }
  if (optimizer_.config.batch_size == 0) throw std::invalid_argument("batch size must be >= 1");
  PipelineConfig crop_cfg = pipeline_;
  const CropRect c = crop_size();
  crop_cfg.frame_height = c.height;
  crop_cfg.frame_width = c.width;
  crop_cfg.validate();
}

CropRect Trainer::crop_size() const {
  auto side = [&](std::size_t n) {
    const auto s = static_cast<std::size_t>(std::floor(static_cast<double>(n) * config_.crop_fraction / 8.0)) * 8;
    return std::max<std::size_t>(s, 8);
  };
  return CropRect{0, 0, side(pipeline_.frame_height), side(pipeline_.frame_width)};
}

std::vector<TrainSample> Trainer::sample_batch(const TrainData& data, std::uint64_t iteration) const {
  const std::size_t n = data.snippets.size();
  if (n == 0) throw std::invalid_argument("training data has no snippets");
  const std::size_t batch = optimizer_.config.batch_size;
  const CropRect size = crop_size();
  std::vector<TrainSample> out;
  out.reserve(batch);
  std::vector<std::size_t> order;
  std::uint64_t order_epoch = ~0ull;
  for (std::size_t b = 0; b < batch; ++b) {
    const std::uint64_t counter = iteration * batch + b;
    const std::uint64_t epoch = counter / n;
    if (epoch != order_epoch) {
      order.resize(n);
      std::iota(order.begin(), order.end(), std::size_t{0});
      Rng shuffle_rng(mix(config_.seed, 0xE90C4ull + epoch));
      std::shuffle(order.begin(), order.end(), shuffle_rng);
      order_epoch = epoch;
    }
    Rng rng(mix(mix(config_.seed, iteration), b));
    TrainSample s;
    s.snippet = order[counter % n];
    const Snippet& snip = data.snippets[s.snippet];
    s.interval = config_.intervals[std::uniform_int_distribution<std::size_t>(0, config_.intervals.size() - 1)(rng)];
    std::vector<std::size_t> ends;
    for (std::size_t e : labelled_frames(snip)) {
      if (e + 1 >= s.interval) ends.push_back(e);
    }
    if (ends.empty()) {
      throw std::invalid_argument("snippet " + std::to_string(s.snippet) + " has no labelled frame reachable with interval " +
                                  std::to_string(s.interval));
    }
    const std::size_t end = ends[std::uniform_int_distribution<std::size_t>(0, ends.size() - 1)(rng)];
    s.first_frame = end + 1 - s.interval;
    s.crop = size;
    const std::size_t max_y = (snip.frames[end].height - size.height) / 8;
    const std::size_t max_x = (snip.frames[end].width - size.width) / 8;
    s.crop.y0 = 8 * std::uniform_int_distribution<std::size_t>(0, max_y)(rng);
    s.crop.x0 = 8 * std::uniform_int_distribution<std::size_t>(0, max_x)(rng);
    out.push_back(s);
  }
  return out;
}

double Trainer::sample_loss(const TrainData& data, const TrainSample& s, GradTape* tape, Real weight) const {
  const Snippet& snip = data.snippets[s.snippet];
  const CropRect& c = s.crop;
  PipelineConfig cfg = pipeline_;
  cfg.frame_height = c.height;
  cfg.frame_width = c.width;

  Tensor key = data.keyframe ? data.keyframe(s.snippet, s.first_frame, c)
                             : label_probabilities(crop(snip.labels[s.first_frame], c.y0, c.x0, c.height, c.width),
                                                   pipeline_.classes, 8);
  const ParamBinder bind = tape ? ParamBinder(*tape) : ParamBinder();
  Var seg = Var::constant(std::move(key));
  // Recorded ops may view these inputs until backward, so all of them stay alive.
  std::vector<Tensor> flow_inputs;
  flow_inputs.reserve(s.interval);
  flow_inputs.push_back(flow_input(cfg, to_tensor(crop(snip.frames[s.first_frame], c.y0, c.x0, c.height, c.width))));
  Var intra;
  for (std::size_t t = s.first_frame + 1; t < s.first_frame + s.interval; ++t) {
    const Tensor frame = to_tensor(crop(snip.frames[t], c.y0, c.x0, c.height, c.width));
    flow_inputs.push_back(flow_input(cfg, frame));
    seg = propagate_frame(models_, bind, config_.options, seg, flow_inputs[flow_inputs.size() - 2], flow_inputs.back(),
                          frame, nullptr, &intra);
  }
  const std::size_t last = s.first_frame + s.interval - 1;
  const LabelMap target = downsample_labels(crop(snip.labels[last], c.y0, c.x0, c.height, c.width), 8);
  Var loss = cross_entropy(seg, target);
  if (config_.intra_aux_weight > 0 && intra.valid()) {
    loss = add(loss, scale(cross_entropy(intra, target), static_cast<Real>(config_.intra_aux_weight)));
  }
  if (tape && loss.requires_grad()) {
    tape->backward(loss, Tensor(chw(1, 1, 1), weight));
    tape->clear_graph();
  }
  return static_cast<double>(loss.value()[0]);
}

BatchResult Trainer::compute_batch(const TrainData& data) const {
  BatchResult r;
  r.samples = sample_batch(data, optimizer_.iteration);
  GradTape tape;
  const Real weight = Real(1) / static_cast<Real>(r.samples.size());
  for (const auto& s : r.samples) r.loss += sample_loss(data, s, &tape, weight) / static_cast<double>(r.samples.size());
  for (const auto& p : models_.parameters()) r.gradients.push_back(tape.gradient(*p.tensor));
  return r;
}

LossPoint Trainer::step(const TrainData& data) {
  BatchResult r = compute_batch(data);
  LossPoint point{optimizer_.iteration, learning_rate(optimizer_.config, optimizer_.iteration), r.loss};
  sgd_step(models_.parameters(), r.gradients, optimizer_);
  return point;
}

std::vector<LossPoint> Trainer::run(const TrainData& data, std::uint64_t iterations,
                                    const std::function<void(const LossPoint&)>& on_step) {
  std::vector<LossPoint> curve;
  curve.reserve(iterations);
  for (std::uint64_t i = 0; i < iterations; ++i) {
    curve.push_back(step(data));
    if (on_step) on_step(curve.back());
  }
  return curve;
}

std::vector<LossPoint> train_toy_segmenter(ToySegmenterParams& segmenter, const std::vector<Snippet>& snippets,
                                           std::size_t classes, std::uint64_t iterations, std::uint64_t seed,
                                           const OptimizerConfig& optimizer) {
  if (snippets.empty()) throw std::invalid_argument("toy segmenter training needs data");
  OptimizerState state{optimizer, {}, 0};
  std::vector<LossPoint> curve;
  ParamList params = segmenter.parameters();
  for (std::uint64_t it = 0; it < iterations; ++it) {
    GradTape tape;
    const ParamBinder bind(tape);
    double total = 0;
    for (std::size_t b = 0; b < optimizer.batch_size; ++b) {
      Rng rng(mix(mix(seed, it), b));
      const Snippet& s = snippets[std::uniform_int_distribution<std::size_t>(0, snippets.size() - 1)(rng)];
      const std::size_t f = std::uniform_int_distribution<std::size_t>(0, s.frames.size() - 1)(rng);
      if (s.labels[f].height == 0) continue;
      Var logits = toy_segment_logits(segmenter, bind, Var::constant(to_tensor(s.frames[f])));
      Var loss = cross_entropy(softmax_channels(logits), downsample_labels(s.labels[f], 8));
      tape.backward(loss, Tensor(chw(1, 1, 1), Real(1) / static_cast<Real>(optimizer.batch_size)));
      tape.clear_graph();
      total += loss.value()[0] / static_cast<double>(optimizer.batch_size);
      (void)classes;
    }
    std::vector<Tensor> grads;
    for (const auto& p : params) grads.push_back(tape.gradient(*p.tensor));
    curve.push_back({it, learning_rate(optimizer, it), total});
    sgd_step(params, grads, state);
  }
  return curve;
}

}  // namespace gsv
