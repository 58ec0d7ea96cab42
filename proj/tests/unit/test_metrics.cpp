#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>

#include "gsv/metrics.hpp"
#include "gsv/segmenter.hpp"
#include "test_support.hpp"

using namespace gsv;
using gsv::test::random_labels;

namespace {

// Per-class IoU from explicit pixel sets.
double set_oracle_miou(const LabelMap& truth, const LabelMap& pred, std::size_t classes) {
  double sum = 0;
  std::size_t used = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    std::set<std::size_t> t, p;
    for (std::size_t i = 0; i < truth.labels.size(); ++i) {
      if (truth.labels[i] == kIgnoreLabel) continue;
      if (truth.labels[i] == c) t.insert(i);
      if (pred.labels[i] == c) p.insert(i);
    }
    std::vector<std::size_t> inter, uni;
    std::set_intersection(t.begin(), t.end(), p.begin(), p.end(), std::back_inserter(inter));
    std::set_union(t.begin(), t.end(), p.begin(), p.end(), std::back_inserter(uni));
    if (uni.empty()) continue;
    sum += double(inter.size()) / double(uni.size());
    ++used;
  }
  return sum / double(used);
}

// Static scene of vertical stripes aligned to 8-pixel blocks: downsampling
// to 1/8 and upsampling back loses nothing.
Snippet striped_static(std::size_t frames) {
  Snippet s;
  LabelMap labels(96, 96);
  for (std::size_t y = 0; y < 96; ++y)
    for (std::size_t x = 0; x < 96; ++x) labels.at(y, x) = std::uint8_t((x / 24) % 4);
  RgbImage img(96, 96);
  for (std::size_t p = 0; p < 96 * 96; ++p)
    for (std::size_t c = 0; c < 3; ++c) img.rgb[p * 3 + c] = std::uint8_t(60 * labels.labels[p] + 20 * c);
  for (std::size_t i = 0; i < frames; ++i) {
    s.frames.push_back(img);
    s.labels.push_back(labels);
  }
  return s;
}

}  // namespace

TEST(Miou, HandExample) {
  ConfusionMatrix cm(2);
  LabelMap t(1, 4), p(1, 4);
  t.labels = {0, 0, 1, 1};
  p.labels = {0, 1, 1, 1};
  cm.add(t, p);
  EXPECT_NEAR(miou(cm), 7.0 / 12.0, 1e-15);
  EXPECT_EQ(cm.at(0, 1), 1u);
  EXPECT_EQ(cm.total(), 4u);
}

TEST(Miou, PerfectPredictionIsOne) {
  const LabelMap m = random_labels(8, 8, 4, 1);
  ConfusionMatrix cm(4);
  cm.add(m, m);
  EXPECT_EQ(miou(cm), 1.0);
}

TEST(Miou, MatchesSetOracleOnRandomMaps) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    LabelMap t = random_labels(8, 8, 4, 2 * seed), p = random_labels(8, 8, 4, 2 * seed + 1);
    if (seed % 3 == 0) t.labels[seed % 64] = kIgnoreLabel;
    ConfusionMatrix cm(4);
    cm.add(t, p);
    ASSERT_NEAR(miou(cm), set_oracle_miou(t, p, 4), 1e-12) << seed;
  }
}

TEST(Miou, InvariantToConsistentRelabelling) {
  const std::uint8_t perm[4] = {2, 0, 3, 1};
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    LabelMap t = random_labels(8, 8, 4, seed), p = random_labels(8, 8, 4, seed + 50);
    ConfusionMatrix a(4), b(4);
    a.add(t, p);
    for (auto& v : t.labels) v = perm[v];
    for (auto& v : p.labels) v = perm[v];
    b.add(t, p);
    EXPECT_NEAR(miou(a), miou(b), 1e-15);
  }
}

TEST(Miou, ExcludesEmptyClassesAndRejectsEmptyMatrix) {
  ConfusionMatrix cm(5);
  EXPECT_THROW(miou(cm), std::domain_error);
  cm.add(1, 1);
  cm.add(1, 2);
  EXPECT_NEAR(miou(cm), 0.25, 1e-15);  // class 1: 1/2, class 2: 0/1
  ConfusionMatrix ignored(3);
  ignored.add(LabelMap(2, 2, kIgnoreLabel), LabelMap(2, 2, 0));
  EXPECT_EQ(ignored.total(), 0u);
  EXPECT_THROW(ignored.add(3, 0), std::invalid_argument);
  EXPECT_THROW(ignored.add(LabelMap(2, 2), LabelMap(2, 3)), std::invalid_argument);
}

TEST(ConfusionMatrix, MergeAddsCounts) {
  const LabelMap a = random_labels(8, 8, 3, 1), b = random_labels(8, 8, 3, 2);
  ConfusionMatrix whole(3), x(3), y(3);
  whole.add(a, b);
  whole.add(b, a);
  x.add(a, b);
  y.add(b, a);
  x.merge(y);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(x.at(i, j), whole.at(i, j));
  EXPECT_THROW(x.merge(ConfusionMatrix(4)), std::invalid_argument);
}

TEST(EvalProtocol, PerfectStaticChainScoresOne) {
  const std::vector<Snippet> snippets{striped_static(8), striped_static(6)};
  const PropagationModels models = make_models(ModelConfig{}, 1);
  auto factory = [&](std::size_t i) {
    return std::make_unique<OracleSegmenter>(OracleSegmenter::from_labels(snippets[i].labels, 4));
  };
  PipelineOptions identity;
  identity.forced_guidance_slot = 0;
  const EvalResult r = eval_protocol(models, PipelineConfig{}, snippets, factory, 5, identity);
  ASSERT_EQ(r.per_distance.size(), 5u);
  for (double v : r.per_distance) EXPECT_EQ(v, 1.0);
  EXPECT_EQ(r.average, 1.0);
  EXPECT_EQ(r.minimum, 1.0);
  EXPECT_EQ(r.evaluated, 2u);

  const EvalResult one = eval_protocol(models, PipelineConfig{}, snippets, factory, 1);
  EXPECT_EQ(one.average, 1.0);
  EXPECT_EQ(one.minimum, 1.0);
}

TEST(EvalProtocol, SkipsShortSnippetsAndOrdersDistances) {
  auto snippets = make_synthetic_set(SyntheticConfig{}, 3, 8, 4);
  snippets[1].frames.resize(3);
  snippets[1].labels.resize(3);
  const PropagationModels models = make_models(ModelConfig{}, 1);
  auto factory = [&](std::size_t i) {
    return std::make_unique<OracleSegmenter>(OracleSegmenter::from_labels(snippets[i].labels, 4));
  };
  const EvalResult r = eval_protocol(models, PipelineConfig{}, snippets, factory, 5);
  EXPECT_EQ(r.evaluated, 2u);
  EXPECT_EQ(r.skipped, 1u);
  EXPECT_EQ(r.minimum, r.per_distance.back());
  EXPECT_NEAR(r.average, std::accumulate(r.per_distance.begin(), r.per_distance.end(), 0.0) / 5, 1e-15);
  EXPECT_GE(r.average, *std::min_element(r.per_distance.begin(), r.per_distance.end()));
}

TEST(Flops, PointwiseConvHandExample) {
  ConvSpec c = make_conv(1, 1, 1, {1, 1, 0});
  EXPECT_EQ(conv_flops(c, 4, 4), 48.0);
  ConvSpec nb = make_conv(3, 2, 3, {1, 1, 1}, false);
  EXPECT_EQ(conv_flops(nb, 5, 5), 2.0 * 50 * 3 * 9);
}

TEST(Flops, IntervalAverageAndModuleAdditivity) {
  PropagationModels models = make_models(ModelConfig{}, 1);
  Rng rng(2);
  ToySegmenter seg(make_toy_segmenter(24, 4, rng));
  PipelineConfig cfg;
  cfg.keyframe_interval = 1;
  const FlopReport one = count_flops(models, cfg, seg);
  EXPECT_EQ(one.interval_average, one.keyframe);
  double parts = 0;
  for (const auto& [_, v] : one.nonkeyframe_parts) parts += v;
  EXPECT_EQ(parts, one.nonkeyframe);
  EXPECT_LT(one.nonkeyframe, one.keyframe);
  cfg.keyframe_interval = 5;
  const FlopReport five = count_flops(models, cfg, seg);
  EXPECT_NEAR(five.interval_average, (five.keyframe + 4 * five.nonkeyframe) / 5, 1e-6);
}

TEST(Flops, LinearInAreaForConvolutionalParts) {
  PropagationModels models = make_models(ModelConfig{}, 1);
  Rng rng(2);
  ToySegmenter seg(make_toy_segmenter(8, 4, rng));
  PipelineConfig small, big;
  big.frame_height = 192;
  big.frame_width = 192;
  const FlopReport a = count_flops(models, small, seg), b = count_flops(models, big, seg);
  EXPECT_NEAR(b.nonkeyframe, 4 * a.nonkeyframe, 1e-6 * b.nonkeyframe);
  EXPECT_NEAR(b.keyframe, 4 * a.keyframe, 1e-6 * b.keyframe);
}

TEST(Params, PerModuleCountsSumToTotal) {
  ModelConfig mc;
  mc.intra_width = 16;
  PropagationModels models = make_models(mc, 1);
  const ParamCount pc = count_params(models);
  std::size_t sum = 0;
  for (const auto& [name, n] : pc.modules) {
    sum += n;
    if (name == "intra") {
      EXPECT_EQ(n, 3348u);
    }
    if (name == "bank") {
      EXPECT_EQ(n, 0u);
    }
  }
  EXPECT_EQ(sum, pc.total);
  EXPECT_EQ(pc.total, element_count(models.parameters()));
}
