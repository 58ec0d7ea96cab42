#include "gsv/gradcheck.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <functional>
#include <memory>
#include <numeric>

#include "gsv/pipeline.hpp"
#include "gsv/training.hpp"
#include "gsv/warp.hpp"

namespace gsv {

namespace {

using Forward = std::function<Var(const ParamBinder&)>;

/// Inputs owned by a check; deque keeps addresses stable.
struct Leaves {
  std::deque<Tensor> owned;
  std::vector<Tensor*> probed;

  Tensor& add(Tensor t, bool probe = true) {
    owned.push_back(std::move(t));
    if (probe) probed.push_back(&owned.back());
    return owned.back();
  }
};

Tensor uniform(Shape s, Rng& rng, Real lo = -1, Real hi = 1) {
  std::uniform_real_distribution<Real> u(lo, hi);
  Tensor t(s);
  for (Real& v : t.data()) v = u(rng);
  return t;
}

Tensor away_from_zero(Shape s, Rng& rng) {
  Tensor t = uniform(s, rng, Real(0.1), Real(1));
  std::bernoulli_distribution sign(0.5);
  for (Real& v : t.data()) v = sign(rng) ? v : -v;
  return t;
}

Tensor probabilities(Shape s, Rng& rng) { return softmax_channels(uniform(s, rng, -2, 2)); }

/// Flow whose fractional part avoids the bilinear kinks at integer positions.
Tensor kink_free_flow(Shape s, Rng& rng, int max_int) {
  std::uniform_int_distribution<int> whole(-max_int, max_int);
  std::uniform_real_distribution<Real> frac(Real(0.15), Real(0.85));
  Tensor t(s);
  for (Real& v : t.data()) v = static_cast<Real>(whole(rng)) + frac(rng);
  return t;
}

LabelMap random_labels(std::size_t h, std::size_t w, std::size_t classes, Rng& rng, bool with_ignore) {
  LabelMap m(h, w);
  std::uniform_int_distribution<int> pick(0, static_cast<int>(classes) - 1);
  for (auto& l : m.labels) l = static_cast<std::uint8_t>(pick(rng));
  if (with_ignore) m.labels[0] = kIgnoreLabel;
  return m;
}

Var project(const Var& out, const std::shared_ptr<Tensor>& r) {
  const Tensor& v = out.value();
  require_same_shape(v, *r, "gradcheck projection");
  Real s = 0;
  for (std::size_t i = 0; i < v.size(); ++i) s += v[i] * (*r)[i];
  return Var::make(Tensor(chw(1, 1, 1), s), {&out}, [out, r](const Tensor& g) {
    Tensor d = *r;
    for (Real& x : d.data()) x *= g[0];
    out.add_grad(d);
  });
}

GradcheckEntry run_check(const std::string& name, Leaves& leaves, const Forward& f, Rng& rng, double eps,
                         double tol, std::size_t samples) {
  GradcheckEntry e;
  e.op = name;
  auto r = std::make_shared<Tensor>(uniform(f(ParamBinder{}).shape(), rng));

  GradTape tape;
  const ParamBinder bind(tape);
  Var loss = project(f(bind), r);
  std::vector<Tensor> analytic;
  if (loss.requires_grad()) tape.backward(loss);
  for (Tensor* p : leaves.probed) analytic.push_back(tape.gradient(*p));

  auto value = [&] { return static_cast<double>(project(f(ParamBinder{}), r).value()[0]); };
  auto central = [&](Tensor& p, std::size_t i, double h) {
    const Real saved = p[i];
    p[i] = saved + static_cast<Real>(h);
    const double up = value();
    p[i] = saved - static_cast<Real>(h);
    const double down = value();
    p[i] = saved;
    return (up - down) / (2 * h);
  };
  for (std::size_t k = 0; k < leaves.probed.size(); ++k) {
    Tensor& p = *leaves.probed[k];
    std::vector<std::size_t> idx(p.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    double diff = 0, scale = 0;
    std::size_t used = 0;
    for (std::size_t i : idx) {
      if (used == samples) break;
      const double numeric = central(p, i, eps);
      // Halving the step must agree closely unless the stencil straddles a
      // kink (rectifier at 0, integer sample position); such points are
      // skipped and counted rather than compared.
      const double half = central(p, i, eps / 2);
      if (std::abs(numeric - half) > 1e-6 * std::max(std::abs(numeric), std::abs(half)) + 1e-11) {
        ++e.skipped;
        continue;
      }
      const double a = analytic[k][i];
      diff = std::max(diff, std::abs(a - numeric));
      scale = std::max({scale, std::abs(a), std::abs(numeric)});
      ++used;
    }
    const double rel = scale > 1e-12 ? diff / scale : 0.0;
    e.max_rel_error = std::max(e.max_rel_error, rel);
    e.coordinates += used;
  }
  e.passed = e.max_rel_error < tol;
  return e;
}

void randomize(ConvSpec& c, Rng& rng, Real amp) {
  c.weight = uniform(c.weight.shape(), rng, -amp, amp);
  if (c.has_bias()) c.bias = uniform(c.bias.shape(), rng, -amp / 4, amp / 4);
}

/// Zero-initialized biases leave some rectifier inputs at exactly 0, a kink
/// that a central difference straddles; small random biases avoid it.
void probe_params(const ParamList& params, Leaves& leaves, Rng& rng) {
  for (const auto& p : params) {
    if (p.name.size() > 5 && p.name.compare(p.name.size() - 5, 5, ".bias") == 0) {
      *p.tensor = uniform(p.tensor->shape(), rng, Real(-0.1), Real(0.1));
    }
    leaves.probed.push_back(p.tensor);
  }
}

}  // namespace

bool GradcheckReport::passed() const {
  return std::all_of(entries.begin(), entries.end(), [](const GradcheckEntry& e) { return e.passed; });
}

std::string GradcheckReport::to_text() const {
  std::string out = "op,status,max_rel_error,coordinates,skipped\n";
  char buf[256];
  for (const auto& e : entries) {
    if (!e.differentiable) {
      std::snprintf(buf, sizeof buf, "%s,blocked,-,0,0\n", e.op.c_str());
    } else {
      std::snprintf(buf, sizeof buf, "%s,%s,%.3e,%zu,%zu\n", e.op.c_str(), e.passed ? "pass" : "FAIL",
                    e.max_rel_error, e.coordinates, e.skipped);
    }
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "# tolerance %.1e, %.2f s, %s\n", tolerance, seconds, passed() ? "PASS" : "FAIL");
  out += buf;
  return out;
}

GradcheckReport gradcheck_all(std::uint64_t seed, double eps, double tol, std::size_t samples) {
  const auto start = std::chrono::steady_clock::now();
  Rng rng(seed);
  GradcheckReport report;
  report.tolerance = tol;
  auto check = [&](const std::string& name, Leaves& leaves, const Forward& f) {
    report.entries.push_back(run_check(name, leaves, f, rng, eps, tol, samples));
  };

  auto conv_case = [&](const std::string& name, std::size_t in, std::size_t out, std::size_t k, ConvGeometry g,
                       std::size_t h, std::size_t w) {
    Leaves L;
    Tensor& x = L.add(uniform(chw(in, h, w), rng));
    Tensor& wt = L.add(uniform(Shape{out, in, k, k}, rng));
    Tensor& b = L.add(uniform(chw(out, 1, 1), rng));
    check(name, L, [&, g](const ParamBinder& bd) { return conv2d(bd(x), bd(wt), bd(b), g); });
  };
  conv_case("conv2d", 2, 3, 3, {1, 1, 1}, 6, 6);
  conv_case("conv2d.stride2", 3, 4, 3, {2, 1, 1}, 6, 6);
  conv_case("conv2d.dilation2", 2, 4, 3, {1, 2, 2}, 6, 6);
  conv_case("conv2d.pointwise", 4, 2, 1, {1, 1, 0}, 5, 6);
  conv_case("conv2d.dilation8", 2, 2, 3, {1, 8, 8}, 6, 6);
  conv_case("conv2d.stride2.large", 6, 4, 3, {2, 1, 1}, 24, 24);

  {
    Leaves L;
    Tensor& x = L.add(away_from_zero(chw(3, 5, 5), rng));
    check("relu", L, [&](const ParamBinder& b) { return relu(b(x)); });
  }
  {
    Leaves L;
    Tensor& a = L.add(uniform(chw(2, 4, 5), rng));
    Tensor& c = L.add(uniform(chw(2, 4, 5), rng));
    check("add", L, [&](const ParamBinder& b) { return add(b(a), b(c)); });
    check("scale", L, [&](const ParamBinder& b) { return scale(b(a), Real(-0.7)); });
    check("concat_channels", L, [&](const ParamBinder& b) { return concat_channels({b(a), b(c)}); });
    check("slice_channels", L, [&](const ParamBinder& b) { return slice_channels(concat_channels({b(a), b(c)}), 1, 2); });
    check("sum_all", L, [&](const ParamBinder& b) { return sum_all(b(a)); });
    check("exp", L, [&](const ParamBinder& b) { return exp(b(a)); });
    check("affine", L, [&](const ParamBinder& b) { return affine(b(a), Real(4), Real(-2)); });
  }
  {
    Leaves L;
    Tensor& x = L.add(uniform(chw(2, 3, 4), rng));
    check("bilinear_resize.up", L, [&](const ParamBinder& b) { return bilinear_resize(b(x), 6, 5); });
    Leaves M;
    Tensor& y = M.add(uniform(chw(2, 6, 6), rng));
    check("bilinear_resize.down", M, [&](const ParamBinder& b) { return bilinear_resize(b(y), 3, 4); });
  }
  {
    Leaves L;
    Tensor& x = L.add(uniform(chw(4, 6, 6), rng, -2, 2));
    check("softmax_channels", L, [&](const ParamBinder& b) { return softmax_channels(b(x)); });
  }
  {
    Leaves L;
    Tensor& x = L.add(uniform(chw(2, 4, 4), rng));
    check("replicate_pad", L, [&](const ParamBinder& b) { return replicate_pad(b(x), 2); });
  }
  {
    Leaves L;
    Tensor& prev = L.add(uniform(chw(2, 5, 5), rng));
    Tensor& flow = L.add(kink_free_flow(chw(2, 5, 5), rng, 1));
    check("warp", L, [&](const ParamBinder& b) { return warp(b(prev), b(flow)); });
  }
  {
    Leaves L;
    Tensor& seg = L.add(uniform(chw(3, 5, 5), rng));
    auto bank = std::make_shared<KernelBank>(make_bank(3, std::nullopt, true));
    bank->kernels = uniform(bank->kernels.shape(), rng);
    L.probed.push_back(&bank->kernels);
    check("propagate_spatial.learnable", L, [&, bank](const ParamBinder& b) { return propagate_spatial(b(seg), *bank, b); });
  }
  {
    Leaves L;
    const std::size_t d = 9, c = 3;
    Tensor& cand = L.add(uniform(chw(d * c, 4, 4), rng));
    Tensor& intra = L.add(uniform(chw(c, 4, 4), rng));
    Tensor& wts = L.add(probabilities(chw(d + 1, 4, 4), rng));
    check("fuse", L, [&](const ParamBinder& b) { return fuse(b(cand), b(intra), b(wts)); });
  }
  {
    Leaves L;
    Tensor& x = L.add(uniform(chw(3, 5, 5), rng, Real(0.1), Real(1)));
    check("renormalize", L, [&](const ParamBinder& b) { return renormalize(b(x)); });
  }
  {
    Leaves L;
    Tensor& logits = L.add(uniform(chw(4, 6, 6), rng, -2, 2));
    const LabelMap labels = random_labels(6, 6, 4, rng, true);
    check("softmax+cross_entropy", L,
          [&, labels](const ParamBinder& b) { return cross_entropy(softmax_channels(b(logits)), labels); });
  }
  {
    Leaves L;
    Tensor& warped = L.add(probabilities(chw(3, 6, 6), rng));
    Tensor& log_alpha = L.add(Tensor(chw(1, 1, 1), Real(0.3)));
    check("edge_map.alpha", L, [&](const ParamBinder& b) { return edge_map(b(warped), exp(b(log_alpha))); });
    GradcheckEntry blocked;
    blocked.op = "edge_map.argmax";
    blocked.differentiable = false;
    blocked.note = "non-differentiable, gradient blocked";
    report.entries.push_back(blocked);
  }

  const std::size_t classes = 3, width = 4;
  {
    auto net = std::make_shared<FlowNetParams>(make_flow_net(width, rng));
    randomize(net->head, rng, Real(0.5));
    Leaves L;
    Tensor& a = L.add(uniform(chw(3, 24, 24), rng, 0, 1), false);
    Tensor& c = L.add(uniform(chw(3, 24, 24), rng, 0, 1), false);
    probe_params(net->parameters(), L, rng);
    check("flow_net", L, [&, net](const ParamBinder& b) { return estimate_flow(*net, b, b(a), b(c), 6, 6); });
  }
  {
    auto net = std::make_shared<IntraNetParams>(make_intra_net(width, classes, rng));
    Leaves L;
    Tensor& frame = L.add(uniform(chw(3, 6, 6), rng, 0, 1));
    probe_params(net->parameters(), L, rng);
    check("intra_net", L, [&, net](const ParamBinder& b) { return intra_segment(*net, b, b(frame)); });
  }
  {
    auto net = std::make_shared<GuideNetParams>(make_guide_net(classes, 10, width, rng));
    randomize(net->layers[2], rng, Real(0.5));
    net->log_edge_scale[0] = Real(0.2);
    Leaves L;
    Tensor& logits = L.add(uniform(chw(classes, 6, 6), rng, -2, 2));
    Tensor& warped = L.add(probabilities(chw(classes, 6, 6), rng), false);
    probe_params(net->parameters(), L, rng);
    check("guide+edge_map", L, [&, net](const ParamBinder& b) {
      return guide(*net, b, b(logits), edge_map(b(warped), exp(b(net->log_edge_scale))));
    });
  }
  {
    auto net = std::make_shared<ToySegmenterParams>(make_toy_segmenter(width, classes, rng));
    Leaves L;
    Tensor& frame = L.add(uniform(chw(3, 16, 16), rng, 0, 1), false);
    probe_params(net->parameters(), L, rng);
    check("toy_segmenter", L, [&, net](const ParamBinder& b) { return toy_segment_logits(*net, b, b(frame)); });
  }

  for (bool learnable : {false, true}) {
    ModelConfig mc;
    mc.classes = classes;
    mc.flow_width = mc.intra_width = mc.guide_width = width;
    mc.learnable_bank = learnable;
    auto models = std::make_shared<PropagationModels>(make_models(mc, rng()));
    randomize(models->flow.head, rng, Real(0.5));
    randomize(models->guide.layers[2], rng, Real(0.5));
    models->guide.log_edge_scale[0] = Real(-0.1);
    if (learnable) models->bank.kernels = uniform(models->bank.kernels.shape(), rng, 0, Real(0.3));

    Leaves L;
    Tensor& prev = L.add(probabilities(chw(classes, 6, 6), rng));
    Tensor& frame_prev = L.add(uniform(chw(3, 48, 48), rng, 0, 1), false);
    Tensor& frame = L.add(uniform(chw(3, 48, 48), rng, 0, 1), false);
    PipelineConfig pc;
    pc.classes = classes;
    pc.frame_height = pc.frame_width = 48;
    Tensor& fin_prev = L.add(flow_input(pc, frame_prev), false);
    Tensor& fin_cur = L.add(flow_input(pc, frame), false);
    probe_params(models->parameters(), L, rng);
    const LabelMap labels = random_labels(6, 6, classes, rng, false);
    check(learnable ? "chain.learnable_bank" : "chain", L, [&, models, labels](const ParamBinder& b) {
      Var out = propagate_frame(*models, b, PipelineOptions{}, b(prev), fin_prev, fin_cur, frame);
      return cross_entropy(out, labels);
    });
  }

  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace gsv
