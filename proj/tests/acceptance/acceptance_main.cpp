// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <sys/wait.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "gsv/bench.hpp"
#include "gsv/config.hpp"
#include "gsv/dataset.hpp"
#include "gsv/gradcheck.hpp"
#include "gsv/io.hpp"
#include "gsv/metrics.hpp"
#include "gsv/model_store.hpp"
#include "gsv/warp.hpp"

namespace fs = std::filesystem;
using namespace gsv;

namespace {

int failures = 0;

void report(const char* name, bool ok, const std::string& detail) {
  std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

Tensor random_tensor(Shape s, std::mt19937_64& rng, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(s);
  for (Real& v : t.data()) v = static_cast<Real>(u(rng));
  return t;
}

Tensor random_probabilities(std::size_t c, std::size_t h, std::size_t w, std::mt19937_64& rng) {
  Tensor t = random_tensor(chw(c, h, w), rng, 0.05, 1);
  const std::size_t plane = h * w;
  for (std::size_t p = 0; p < plane; ++p) {
    Real s = 0;
    for (std::size_t k = 0; k < c; ++k) s += t[k * plane + p];
    for (std::size_t k = 0; k < c; ++k) t[k * plane + p] /= s;
  }
  return t;
}

double elapsed_s(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------

void gradient_suite() {
  const GradcheckReport r = gradcheck_all(0);
  std::size_t checked = 0;
  std::string worst_op;
  double worst = 0;
  for (const auto& e : r.entries) {
    if (!e.differentiable) continue;
    ++checked;
    if (e.max_rel_error >= worst) worst = e.max_rel_error, worst_op = e.op;
  }
  const bool has_chain = std::any_of(r.entries.begin(), r.entries.end(), [](const auto& e) { return e.op == "chain"; });
  report("gradient-suite", r.passed() && has_chain && r.seconds < 60,
         std::to_string(checked) + " checks, worst rel err " + fmt("%.2e", worst) + " (" + worst_op + "), " +
             fmt("%.1f s", r.seconds));
}

void exactness_oracles() {
  std::mt19937_64 rng(11);
  bool shifts_ok = true, warp_ok = true, miou_ok = true;
  double fuse_err = 0;

  for (std::size_t k : {3u, 5u}) {
    const KernelBank bank = make_bank(k);
    const Tensor seg = random_probabilities(4, 9, 7, rng);
    const ShiftStack s = propagate_spatial(SegTensor{seg}, bank);
    const Tensor padded = replicate_pad(seg, bank.radius());
    for (std::size_t d = 0; d < bank.size(); ++d) {
      for (std::size_t c = 0; c < 4; ++c) {
        Tensor plane(chw(1, padded.height(), padded.width()));
        std::copy(padded.channel(c).begin(), padded.channel(c).end(), plane.data().begin());
        ConvSpec spec = make_conv(1, 1, k, {1, 1, 0}, false);
        std::copy(bank.kernels.raw() + d * k * k, bank.kernels.raw() + (d + 1) * k * k, spec.weight.data().begin());
        const Tensor y = conv2d(plane, spec);
        const Tensor cand = s.candidate(d);
        shifts_ok = shifts_ok && std::equal(y.data().begin(), y.data().end(), cand.channel(c).begin());
      }
    }
  }

  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t h = 6 + trial % 3, w = 5 + trial % 4;
    const Tensor prev = random_tensor(chw(3, h, w), rng);
    Tensor flow(chw(2, h, w));
    std::uniform_int_distribution<int> step(-3, 3);
    for (Real& v : flow.data()) v = step(rng);
    const Tensor out = warp_bilinear(prev, flow);
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const int sx = std::clamp(int(x) + int(flow.at(0, y, x)), 0, int(w) - 1);
        const int sy = std::clamp(int(y) + int(flow.at(1, y, x)), 0, int(h) - 1);
        for (std::size_t c = 0; c < 3; ++c) warp_ok = warp_ok && out.at(c, y, x) == prev.at(c, sy, sx);
      }
  }

  {
    const std::size_t dc = 9, cc = 4, h = 5, w = 6, plane = h * w;
    const Tensor cand = random_tensor(chw(dc * cc, h, w), rng);
    const Tensor intra = random_tensor(chw(cc, h, w), rng);
    const Tensor wts = random_probabilities(dc + 1, h, w, rng);
    const Tensor got = fuse(cand, intra, wts);
    for (std::size_t c = 0; c < cc; ++c)
      for (std::size_t p = 0; p < plane; ++p) {
        double want = 0;
        for (std::size_t d = 0; d < dc; ++d) want += wts[d * plane + p] * cand[(d * cc + c) * plane + p];
        want += wts[dc * plane + p] * intra[c * plane + p];
        fuse_err = std::max(fuse_err, std::abs(want - got[c * plane + p]));
      }
  }

  std::uniform_int_distribution<int> lab(0, 4);
  for (int trial = 0; trial < 100; ++trial) {
    LabelMap t(8, 8), p(8, 8);
    for (auto& v : t.labels) v = static_cast<std::uint8_t>(lab(rng) == 4 && trial % 3 == 0 ? 255 : lab(rng) % 4);
    for (auto& v : p.labels) v = static_cast<std::uint8_t>(lab(rng) % 4);
    ConfusionMatrix cm(4);
    cm.add(t, p);
    double sum = 0;
    int present = 0;
    for (int c = 0; c < 4; ++c) {
      std::set<int> a, b;
      for (int i = 0; i < 64; ++i) {
        if (t.labels[i] == 255) continue;
        if (t.labels[i] == c) a.insert(i);
        if (p.labels[i] == c) b.insert(i);
      }
      std::set<int> inter, uni;
      std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::inserter(inter, inter.end()));
      std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::inserter(uni, uni.end()));
      if (uni.empty()) continue;
      sum += double(inter.size()) / double(uni.size());
      ++present;
    }
    miou_ok = miou_ok && std::abs(miou(cm) - sum / present) < 1e-12;
  }

  report("exactness-oracles", shifts_ok && warp_ok && fuse_err < 1e-6 && miou_ok,
         std::string("shift==conv2d ") + (shifts_ok ? "bit-equal" : "DIFFERS") + ", integer warp " +
             (warp_ok ? "bit-equal" : "DIFFERS") + ", fuse err " + fmt("%.1e", fuse_err) + ", mIoU vs set oracle " +
             (miou_ok ? "equal" : "DIFFERS") + " on 100 pairs");
}

void conservation(const PropagationModels& trained) {
  PipelineConfig cfg;
  cfg.keyframe_interval = 5;
  const Snippet s = make_synthetic_set(SyntheticConfig{}, 1, 50, 2024).at(0);
  double worst = 0;
  OracleSegmenter seg = OracleSegmenter::from_labels(s.labels, cfg.classes);
  Pipeline pipe(cfg, trained, seg);
  for (std::size_t t = 0; t < 50; ++t) {
    const Tensor out = pipe.step(to_tensor(s.frames[t]), t).seg.scores;
    const std::size_t plane = out.height() * out.width();
    for (std::size_t p = 0; p < plane; ++p) {
      double sum = 0;
      for (std::size_t c = 0; c < out.channels(); ++c) {
        const double v = out[c * plane + p];
        worst = std::max(worst, -v);
        sum += v;
      }
      worst = std::max(worst, std::abs(sum - 1));
    }
  }
  report("conservation", worst <= 1e-5, "50 steps at interval 5 (trained model), worst deviation " + fmt("%.2e", worst));
}

void identity_chain() {
  PipelineConfig cfg;
  cfg.keyframe_interval = 21;
  const PropagationModels models = make_models(ModelConfig{}, 1);
  const Snippet s = make_synthetic_set(SyntheticConfig{}, 1, 1, 77).at(0);
  OracleSegmenter seg = OracleSegmenter::from_labels(s.labels, cfg.classes);
  PipelineOptions opts;
  opts.forced_guidance_slot = 0;
  Pipeline pipe(cfg, models, seg, opts);
  const Tensor frame = to_tensor(s.frames[0]);
  const Tensor first = pipe.step(frame, 0).seg.scores;
  bool ok = true;
  std::size_t t = 1;
  for (; t <= 20 && ok; ++t) ok = pipe.step(frame, 0).seg.scores.identical(first);
  report("identity-chain", ok, ok ? "S_t bit-equals S_0 for t = 1..20" : "diverged at t = " + std::to_string(t - 1));
}

void degenerate_interval() {
  PipelineConfig cfg;
  cfg.keyframe_interval = 1;
  const PropagationModels models = make_models(ModelConfig{}, 1);
  const Snippet s = make_synthetic_set(SyntheticConfig{}, 1, 12, 5).at(0);
  OracleSegmenter pipe_seg = OracleSegmenter::from_labels(s.labels, cfg.classes);
  OracleSegmenter ref = OracleSegmenter::from_labels(s.labels, cfg.classes);
  Pipeline pipe(cfg, models, pipe_seg);
  bool ok = true;
  for (std::size_t t = 0; t < 12; ++t) {
    const Tensor frame = to_tensor(s.frames[t]);
    const auto step = pipe.step(frame, t);
    ok = ok && step.timings.kind == FrameKind::keyframe && step.seg.scores.identical(ref.segment(frame, t).scores);
  }
  report("degenerate-interval", ok, "l=1 output vs keyframe segmenter over 12 frames");
}

struct Directional {
  PropagationModels guided, warp_only;
  EvalResult guided_eval, warp_eval;
};

Directional directional_training(const AppConfig& app) {
  const auto train = make_synthetic_set(app.synthetic, 32, 12, 7);
  const auto test = make_synthetic_set(app.synthetic, 16, 12, 1007);
  const std::uint64_t iters = 2000;
  Directional d;
  auto run = [&](PropagationMode mode, PropagationModels& models, EvalResult& eval, double& secs, double aux) {
    models = make_models(app.model, app.model_seed);
    TrainConfig tc = app.training;
    tc.options.mode = mode;
    tc.intra_aux_weight = aux;
    OptimizerState os;
    os.config = app.optimizer;
    Trainer trainer(models, app.pipeline, tc, os);
    const auto t0 = std::chrono::steady_clock::now();
    trainer.run(TrainData{train, {}}, iters);
    secs = elapsed_s(t0);
    PipelineOptions opts;
    opts.mode = mode;
    eval = eval_protocol(
        models, app.pipeline, test,
        [&](std::size_t i) {
          return std::make_unique<OracleSegmenter>(OracleSegmenter::from_labels(test[i].labels, app.pipeline.classes));
        },
        5, opts);
  };
  double tg = 0, tw = 0;
  run(PropagationMode::guided, d.guided, d.guided_eval, tg, app.training.intra_aux_weight);
  run(PropagationMode::warp_only, d.warp_only, d.warp_eval, tw, 0.0);
  const double gain_avg = 100 * (d.guided_eval.average - d.warp_eval.average);
  const double gain_min = 100 * (d.guided_eval.minimum - d.warp_eval.minimum);
  report("directional-training", gain_avg >= 3 && gain_min >= 5 && tg < 1800,
         fmt("GSVNet avg %.4f min %.4f vs warp-only avg %.4f min %.4f", d.guided_eval.average, d.guided_eval.minimum,
             d.warp_eval.average, d.warp_eval.minimum) +
             fmt(" (+%.1f / +%.1f points), 2000 iters each, %.0f s + %.0f s, model seed ", gain_avg, gain_min, tg, tw) +
             std::to_string(app.model_seed) + ", training seed " + std::to_string(app.training.seed));

  // Not a criterion: the same comparison without the intra auxiliary term.
  PropagationModels plain;
  EvalResult plain_eval;
  double tp = 0;
  run(PropagationMode::guided, plain, plain_eval, tp, 0.0);
  std::printf("INFO directional-training without intra auxiliary loss: GSVNet avg %.4f min %.4f (%+.1f / %+.1f points "
              "vs warp-only)\n",
              plain_eval.average, plain_eval.minimum, 100 * (plain_eval.average - d.warp_eval.average),
              100 * (plain_eval.minimum - d.warp_eval.minimum));
  return d;
}

void monotone_degradation(const EvalResult& r) {
  int inversions = 0;
  double worst = 0;
  for (std::size_t i = 1; i < r.per_distance.size(); ++i) {
    const double up = 100 * (r.per_distance[i] - r.per_distance[i - 1]);
    if (up > 0) ++inversions, worst = std::max(worst, up);
  }
  std::string list;
  for (double v : r.per_distance) list += fmt(list.empty() ? "%.4f" : ",%.4f", v);
  report("monotone-degradation", inversions == 0 || (inversions == 1 && worst <= 0.5),
         "per-distance mIoU " + list + ", " + std::to_string(inversions) + " inversion(s)");
}

void throughput(const AppConfig& app) {
  const auto data = make_synthetic_set(app.synthetic, 8, 12, 31);
  Rng rng(app.model_seed + 1);
  ToySegmenterParams params = make_toy_segmenter(app.segmenter.toy_width, app.pipeline.classes, rng);
  train_toy_segmenter(params, data, app.pipeline.classes, 50, 0, app.optimizer);
  ToySegmenter seg(params);
  const PropagationModels models = make_models(app.model, app.model_seed);
  const Snippet clip = make_synthetic_set(app.synthetic, 1, 30, 99).at(0);

  std::vector<double> fps, flops;
  double key = 0, nonkey = 0;
  for (std::size_t l = 1; l <= 5; ++l) {
    PipelineConfig cfg = app.pipeline;
    cfg.keyframe_interval = l;
    Pipeline pipe(cfg, models, seg);
    fps.push_back(bench(pipe, clip.frames, 5, 3).fps_compute);
    const FlopReport f = count_flops(models, cfg, seg);
    flops.push_back(f.interval_average);
    key = f.keyframe;
    nonkey = f.nonkeyframe;
  }
  bool fps_up = true, flops_down = true;
  for (std::size_t i = 1; i < 5; ++i) {
    fps_up = fps_up && fps[i] > fps[i - 1];
    flops_down = flops_down && flops[i] < flops[i - 1];
  }
  std::string fl, gl;
  for (std::size_t i = 0; i < 5; ++i) {
    fl += fmt(i ? ",%.1f" : "%.1f", fps[i]);
    gl += fmt(i ? ",%.3g" : "%.3g", flops[i] / 1e6);
  }
  const double ratio = nonkey / key;
  report("throughput", fps_up && flops_down && ratio < 0.2,
         "FPS l=1..5 " + fl + "; interval MFLOPs " + gl + fmt("; non-keyframe/keyframe FLOPs %.1f%%", 100 * ratio));
}

void lr_schedule(const AppConfig& app) {
  double worst = 0;
  const std::uint64_t its[] = {0, 100, 500, 1000};
  const int powers[] = {0, 1, 5, 10};
  for (int i = 0; i < 4; ++i) {
    worst = std::max(worst, std::abs(learning_rate(app.optimizer, its[i]) - 0.002 * std::pow(0.992, powers[i])));
  }
  report("lr-schedule", worst <= 1e-12, "max error " + fmt("%.1e", worst) + " at iterations 0/100/500/1000");
}

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(GSVNET_EXE) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

bool same_tree(const fs::path& a, const fs::path& b) {
  std::vector<fs::path> names;
  for (const auto& e : fs::directory_iterator(a)) names.push_back(e.path().filename());
  std::size_t count_b = std::distance(fs::directory_iterator(b), fs::directory_iterator{});
  if (names.empty() || names.size() != count_b) return false;
  for (const auto& n : names) {
    if (!fs::exists(b / n) || read_file(a / n) != read_file(b / n)) return false;
  }
  return true;
}

void determinism(const AppConfig& app) {
  const fs::path root = fs::temp_directory_path() / "gsv_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);
  save_config(root / "config.json", app);
  const std::string cfg = " --config " + (root / "config.json").string();
  bool ok = run_cli("gen-synthetic" + cfg + " --out " + (root / "data").string() + " --snippets 4 --frames 12 --seed 5",
                    root / "gen.log") == 0;
  const std::string data = (root / "data" / "dataset.json").string();
  auto train = [&](const std::string& name) {
    return run_cli("train" + cfg + " --data " + data + " --out-models " + (root / name).string() + " --iters 6 --seed 3",
                   root / (name + ".log")) == 0;
  };
  ok = ok && train("m1") && train("m2");
  const bool ckpt_same = ok && read_file(root / "m1" / "tensors.bin") == read_file(root / "m2" / "tensors.bin") &&
                         read_file(root / "m1" / "manifest.json") == read_file(root / "m2" / "manifest.json");
  const std::string seq = ok ? load_dataset(data).at(0).string() : "";
  auto prop = [&](const std::string& name) {
    return run_cli("propagate" + cfg + " --models " + (root / "m1").string() + " --frames " + seq + " --out " +
                       (root / name).string() + " --interval 5",
                   root / (name + ".log")) == 0;
  };
  ok = ok && prop("p1") && prop("p2");
  const bool prop_same = ok && same_tree(root / "p1", root / "p2");
  report("determinism", ok && ckpt_same && prop_same,
         std::string("seeded train checkpoints ") + (ckpt_same ? "identical" : "DIFFER") + ", propagate outputs " +
             (prop_same ? "byte-identical" : "DIFFER") + (ok ? "" : " (a CLI run failed, see " + root.string() + ")"));
}

}  // namespace

int main() {
  const AppConfig app = load_config(fs::path(GSV_SOURCE_DIR) / "configs" / "default.json");
  gradient_suite();
  exactness_oracles();
  identity_chain();
  degenerate_interval();
  lr_schedule(app);
  const Directional d = directional_training(app);
  conservation(d.guided);
  monotone_degradation(d.guided_eval);
  throughput(app);
  determinism(app);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
