#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "gsv/bench.hpp"
#include "gsv/config.hpp"
#include "gsv/dataset.hpp"
#include "gsv/gradcheck.hpp"
#include "gsv/io.hpp"
#include "gsv/metrics.hpp"
#include "gsv/model_store.hpp"

namespace fs = std::filesystem;
using namespace gsv;

namespace {

enum Exit : int { kOk = 0, kFailure = 1, kIo = 2, kInvalid = 3 };

struct Common {
  std::string config;
  AppConfig load() const { return config.empty() ? AppConfig{} : load_config(config); }
};

std::string numbered(const char* stem, std::size_t i, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%05zu.%s", stem, i, ext);
  return buf;
}

PropagationMode parse_mode(const std::string& s) {
  if (s == "guided") return PropagationMode::guided;
  if (s == "warp_only") return PropagationMode::warp_only;
  throw std::invalid_argument("mode must be 'guided' or 'warp_only', got '" + s + "'");
}

std::vector<Snippet> load_snippets(const fs::path& dataset) {
  std::vector<Snippet> out;
  for (const auto& seq : load_dataset(dataset)) out.push_back(load_snippet(load_sequence(seq)));
  return out;
}

/// Keyframe segmenter for a sequence: oracle maps from the manifest, or the
/// checkpoint's toy segmenter.
std::unique_ptr<KeyframeSegmenter> make_segmenter(const std::string& kind, const SeqManifest* seq,
                                                  const Checkpoint& ck, const AppConfig& cfg) {
  if (kind == "oracle") {
    if (!seq || seq->oracle.empty()) throw std::invalid_argument("oracle segmenter needs oracle maps in the sequence");
    const SeqManifest s = *seq;
    return std::make_unique<OracleSegmenter>([s](std::size_t i) {
      if (i >= s.oracle.size() || s.oracle[i].empty()) {
        throw std::invalid_argument("no oracle segmentation for keyframe " + std::to_string(i));
      }
      return read_prob(s.resolve(s.oracle[i]));
    });
  }
  if (kind == "toy") {
    if (ck.segmenter) return std::make_unique<ToySegmenter>(*ck.segmenter);
    Rng rng(cfg.model_seed);
    return std::make_unique<ToySegmenter>(make_toy_segmenter(cfg.segmenter.toy_width, cfg.pipeline.classes, rng));
  }
  throw std::invalid_argument("segmenter must be 'oracle' or 'toy', got '" + kind + "'");
}

int cmd_gen_synthetic(const Common& common, const std::string& out, std::size_t snippets, std::size_t frames,
                      std::uint64_t seed) {
  const AppConfig cfg = common.load();
  const auto set = make_synthetic_set(cfg.synthetic, snippets, frames, seed);
  std::vector<fs::path> manifests;
  for (std::size_t i = 0; i < set.size(); ++i) {
    const fs::path dir = fs::path(out) / ("snippet_" + std::to_string(1000 + i).substr(1));
    manifests.push_back(fs::relative(write_snippet(dir, set[i], cfg.synthetic.classes), out));
  }
  save_dataset(fs::path(out) / "dataset.json", manifests);
  std::printf("wrote %zu snippets x %zu frames to %s\n", snippets, frames, out.c_str());
  return kOk;
}

int cmd_train(const Common& common, const std::string& data, const std::string& out, std::uint64_t iters,
              std::optional<std::vector<std::size_t>> intervals, std::optional<std::uint64_t> seed,
              std::optional<std::string> mode, bool resume, std::uint64_t checkpoint_every) {
  AppConfig cfg = common.load();
  if (intervals) cfg.training.intervals = *intervals;
  if (seed) cfg.training.seed = *seed;
  if (mode) cfg.training.options.mode = parse_mode(*mode);
  cfg.validate();

  TrainData td;
  td.snippets = load_snippets(data);
  const fs::path dir(out);
  const fs::path curve_path = dir / "loss_curve.csv";

  Checkpoint ck;
  std::string curve_text;
  if (resume && fs::exists(dir / "manifest.json")) {
    ck = load_checkpoint(dir, cfg.model);
    if (fs::exists(curve_path)) curve_text = read_file(curve_path);
    std::printf("resuming at iteration %llu\n", static_cast<unsigned long long>(ck.optimizer.iteration));
  } else {
    ck.models = make_models(cfg.model, cfg.model_seed);
    ck.optimizer.config = cfg.optimizer;
    if (cfg.segmenter.kind == "toy") {
      Rng rng(cfg.model_seed + 1);
      ck.segmenter = make_toy_segmenter(cfg.segmenter.toy_width, cfg.pipeline.classes, rng);
      train_toy_segmenter(*ck.segmenter, td.snippets, cfg.pipeline.classes, cfg.segmenter.toy_iterations,
                          cfg.training.seed, cfg.optimizer);
    }
  }
  if (curve_text.empty()) curve_text = "iter,lr,loss\n";

  if (ck.segmenter) {
    auto seg = std::make_shared<ToySegmenter>(*ck.segmenter);
    const auto* snippets = &td.snippets;
    td.keyframe = [seg, snippets](std::size_t s, std::size_t f, const CropRect& c) {
      const Tensor frame = to_tensor(crop((*snippets)[s].frames[f], c.y0, c.x0, c.height, c.width));
      return seg->segment(frame, f).scores;
    };
  }

  Trainer trainer(ck.models, cfg.pipeline, cfg.training, ck.optimizer);
  auto persist = [&] {
    save_checkpoint(dir, ck.models, trainer.optimizer(), ck.segmenter ? &*ck.segmenter : nullptr);
    write_file_atomic(curve_path, curve_text);
  };
  const std::uint64_t stop = trainer.optimizer().iteration + iters;
  while (trainer.optimizer().iteration < stop) {
    const LossPoint p = trainer.step(td);
    const std::string line = format_loss_curve({p});
    curve_text += line.substr(line.find('\n') + 1);
    if ((p.iteration + 1) % 50 == 0 || p.iteration + 1 == stop) {
      std::printf("iter %llu lr %.6g loss %.5f\n", static_cast<unsigned long long>(p.iteration), p.lr, p.loss);
      std::fflush(stdout);
    }
    if (checkpoint_every && (p.iteration + 1) % checkpoint_every == 0) persist();
  }
  persist();
  return kOk;
}

int cmd_propagate(const Common& common, const std::string& models, const std::string& frames, const std::string& out,
                  std::optional<std::size_t> interval, const std::string& timing_log, const std::string& segmenter_kind,
                  const std::string& mode) {
  AppConfig cfg = common.load();
  if (interval) cfg.pipeline.keyframe_interval = *interval;
  const SeqManifest seq = load_sequence(frames);
  cfg.pipeline.frame_height = seq.height;
  cfg.pipeline.frame_width = seq.width;
  cfg.pipeline.classes = seq.classes;
  const Checkpoint ck = load_checkpoint(models);
  auto seg = make_segmenter(segmenter_kind, &seq, ck, cfg);
  PipelineOptions opts;
  opts.mode = parse_mode(mode);
  Pipeline pipe(cfg.pipeline, ck.models, *seg, opts);

  std::string timings;
  run_sequence(
      pipe, seq.frames.size(),
      [&](std::size_t i) {
        const RgbImage img = read_ppm(seq.resolve(seq.frames[i]));
        if (img.height != seq.height || img.width != seq.width) {
          throw std::invalid_argument(seq.resolve(seq.frames[i]).string() + ": frame size differs from the manifest");
        }
        return to_tensor(img);
      },
      [&](std::size_t i, const SegTensor& s, const StageTimings& t) {
        write_prob(fs::path(out) / numbered("seg", i, "prob"), s.scores);
        write_pgm(fs::path(out) / numbered("seg", i, "pgm"), upsample_to_full(s, seq.height, seq.width));
        timings += format_timing_line(i, t) + "\n";
      });
  if (!timing_log.empty()) write_file_atomic(timing_log, timings);
  std::printf("propagated %zu frames (interval %zu) to %s\n", seq.frames.size(), cfg.pipeline.keyframe_interval,
              out.c_str());
  return kOk;
}

int cmd_eval(const Common& common, const std::string& models, const std::string& data, std::optional<std::size_t> interval,
             const std::string& segmenter_kind, const std::string& mode, const std::string& report_path) {
  AppConfig cfg = common.load();
  const std::size_t l = interval.value_or(cfg.pipeline.keyframe_interval);
  const Checkpoint ck = load_checkpoint(models, cfg.model);
  std::vector<SeqManifest> seqs;
  std::vector<Snippet> snippets;
  for (const auto& p : load_dataset(data)) {
    seqs.push_back(load_sequence(p));
    snippets.push_back(load_snippet(seqs.back()));
  }
  PipelineOptions opts;
  opts.mode = parse_mode(mode);
  const EvalResult r = eval_protocol(
      ck.models, cfg.pipeline, snippets,
      [&](std::size_t s) { return make_segmenter(segmenter_kind, &seqs[s], ck, cfg); }, l, opts);
  BreakdownReport rep;
  rep.interval = l;
  rep.per_distance = r.per_distance;
  rep.average_miou = r.average;
  rep.minimum_miou = r.minimum;
  std::printf("average_miou=%.6f\nminimum_miou=%.6f\nper_distance_miou=", r.average, r.minimum);
  for (std::size_t i = 0; i < r.per_distance.size(); ++i) std::printf("%s%.6f", i ? "," : "", r.per_distance[i]);
  std::printf("\nsnippets=%zu skipped=%zu\n", r.evaluated, r.skipped);
  if (!report_path.empty()) write_file_atomic(report_path, format_report(rep));
  return kOk;
}

int cmd_bench(const Common& common, const std::string& models, const std::string& frames,
              std::optional<std::size_t> interval, const std::string& segmenter_kind, std::optional<std::size_t> warmup,
              std::optional<std::size_t> reps, const std::string& report_path) {
  AppConfig cfg = common.load();
  if (interval) cfg.pipeline.keyframe_interval = *interval;
  const SeqManifest seq = load_sequence(frames);
  cfg.pipeline.frame_height = seq.height;
  cfg.pipeline.frame_width = seq.width;
  const Checkpoint ck = load_checkpoint(models, cfg.model);
  auto seg = make_segmenter(segmenter_kind, &seq, ck, cfg);
  std::vector<RgbImage> imgs;
  for (const auto& f : seq.frames) imgs.push_back(read_ppm(seq.resolve(f)));
  Pipeline pipe(cfg.pipeline, ck.models, *seg);
  const BreakdownReport rep = bench(pipe, imgs, warmup.value_or(cfg.bench.warmup), reps.value_or(cfg.bench.reps));
  const FlopReport flops = count_flops(ck.models, cfg.pipeline, *seg);
  std::fputs(format_report(rep).c_str(), stdout);
  std::printf("flops_keyframe=%.6g\nflops_nonkeyframe=%.6g\nflops_interval_average=%.6g\n", flops.keyframe,
              flops.nonkeyframe, flops.interval_average);
  if (!report_path.empty()) write_file_atomic(report_path, format_report(rep));
  return kOk;
}

int cmd_gradcheck(std::uint64_t seed) {
  const GradcheckReport r = gradcheck_all(seed);
  std::fputs(r.to_text().c_str(), stdout);
  return r.passed() ? kOk : kFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Keyframe segmentation propagation engine"};
  app.require_subcommand(1);
  Common common;
  auto add_config = [&](CLI::App* c) { c->add_option("--config", common.config, "JSON configuration file"); };

  std::string out, data, models, frames, timing_log, report, segmenter = "oracle", bench_segmenter = "toy";
  std::string mode = "guided";
  std::size_t snippets = 8, nframes = 30;
  std::uint64_t seed = 0, iters = 0, checkpoint_every = 100;
  std::optional<std::uint64_t> train_seed;
  std::optional<std::size_t> interval, warmup, reps;
  std::optional<std::vector<std::size_t>> intervals;
  std::optional<std::string> train_mode;
  bool resume = false;

  auto* gen = app.add_subcommand("gen-synthetic", "Render a moving-shapes dataset");
  add_config(gen);
  gen->add_option("--out", out, "Output directory")->required();
  gen->add_option("--snippets", snippets, "Number of sequences");
  gen->add_option("--frames", nframes, "Frames per sequence");
  gen->add_option("--seed", seed, "Generator seed");

  auto* train = app.add_subcommand("train", "Train the propagation networks");
  add_config(train);
  train->add_option("--data", data, "dataset.json")->required();
  train->add_option("--out-models", out, "Checkpoint directory")->required();
  train->add_option("--iters", iters, "Iterations to run")->required();
  train->add_option("--intervals", intervals, "Keyframe intervals to sample from")->delimiter(',');
  train->add_option("--seed", train_seed, "Sampling seed");
  train->add_option("--mode", train_mode, "guided | warp_only");
  train->add_flag("--resume", resume, "Continue from the checkpoint in --out-models");
  train->add_option("--checkpoint-every", checkpoint_every, "Checkpoint period in iterations (0 = end only)");

  auto* prop = app.add_subcommand("propagate", "Segment a frame sequence");
  add_config(prop);
  prop->add_option("--models", models, "Checkpoint directory")->required();
  prop->add_option("--frames", frames, "Sequence manifest")->required();
  prop->add_option("--out", out, "Output directory")->required();
  prop->add_option("--interval", interval, "Keyframe interval");
  prop->add_option("--timing-log", timing_log, "Per-frame timing log");
  prop->add_option("--segmenter", segmenter, "oracle | toy");
  prop->add_option("--mode", mode, "guided | warp_only");

  auto* ev = app.add_subcommand("eval", "Average / minimum mIoU protocol");
  add_config(ev);
  ev->add_option("--models", models, "Checkpoint directory")->required();
  ev->add_option("--data", data, "dataset.json")->required();
  ev->add_option("--interval", interval, "Keyframe interval");
  ev->add_option("--segmenter", segmenter, "oracle | toy");
  ev->add_option("--mode", mode, "guided | warp_only");
  ev->add_option("--report", report, "Write the report here");

  auto* be = app.add_subcommand("bench", "Runtime breakdown");
  add_config(be);
  be->add_option("--models", models, "Checkpoint directory")->required();
  be->add_option("--frames", frames, "Sequence manifest")->required();
  be->add_option("--interval", interval, "Keyframe interval");
  be->add_option("--segmenter", bench_segmenter, "oracle | toy");
  be->add_option("--warmup", warmup, "Discarded frames");
  be->add_option("--reps", reps, "Passes over the sequence");
  be->add_option("--report", report, "Write the report here");

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  gc->add_option("--seed", seed, "Seed");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*gen) return cmd_gen_synthetic(common, out, snippets, nframes, seed);
    if (*train) return cmd_train(common, data, out, iters, intervals, train_seed, train_mode, resume, checkpoint_every);
    if (*prop) return cmd_propagate(common, models, frames, out, interval, timing_log, segmenter, mode);
    if (*ev) return cmd_eval(common, models, data, interval, segmenter, mode, report);
    if (*be) return cmd_bench(common, models, frames, interval, bench_segmenter, warmup, reps, report);
    if (*gc) return cmd_gradcheck(seed);
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const ModelStoreError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kFailure;
}
