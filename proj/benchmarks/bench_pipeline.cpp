#include <benchmark/benchmark.h>

#include "gsv/pipeline.hpp"
#include "gsv/synthetic.hpp"

using namespace gsv;

namespace {

// Steady-state cost of one pipeline step at keyframe interval `range(0)`,
// averaged over whole intervals.
void BM_PipelineStep(benchmark::State& state, bool toy) {
  PipelineConfig cfg;
  cfg.keyframe_interval = static_cast<std::size_t>(state.range(0));
  const PropagationModels models = make_models(ModelConfig{}, 1);
  const Snippet clip = make_synthetic_set(SyntheticConfig{}, 1, 10, 3).at(0);
  Rng rng(2);
  ToySegmenter toy_seg(make_toy_segmenter(24, cfg.classes, rng));
  OracleSegmenter oracle = OracleSegmenter::from_labels(clip.labels, cfg.classes);
  KeyframeSegmenter& seg = toy ? static_cast<KeyframeSegmenter&>(toy_seg) : oracle;
  Pipeline pipe(cfg, models, seg);
  std::vector<Tensor> frames;
  for (const auto& f : clip.frames) frames.push_back(to_tensor(f));
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(pipe.step(frames[i % frames.size()], i % frames.size()));
    ++i;
  }
  state.counters["fps"] = benchmark::Counter(static_cast<double>(state.iterations()), benchmark::Counter::kIsRate);
}
BENCHMARK_CAPTURE(BM_PipelineStep, oracle, false)->DenseRange(1, 5);
BENCHMARK_CAPTURE(BM_PipelineStep, toy, true)->DenseRange(1, 5);

}  // namespace

BENCHMARK_MAIN();
