#include "gsv/guided_fusion.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace gsv {

namespace {

Real sigmoid(Real v) { return Real(1) / (Real(1) + std::exp(-v)); }

Real renorm_tolerance() { return Real(64) * std::numeric_limits<Real>::epsilon(); }

void check_fuse_shapes(const Tensor& candidates, const Tensor& intra, const Tensor& weights) {
  const std::size_t cc = intra.channels();
  const bool ok = cc > 0 && intra.shape().stack == 1 && candidates.height() == intra.height() &&
                  candidates.width() == intra.width() && weights.height() == intra.height() &&
                  weights.width() == intra.width() && candidates.channels() % cc == 0 &&
                  weights.channels() == candidates.channels() / cc + 1;
  if (!ok) {
    throw std::invalid_argument("fuse: candidates " + candidates.shape().str() + ", intra " + intra.shape().str() +
                                " and guidance " + weights.shape().str() + " are inconsistent");
  }
}

}  // namespace

Real GuideNetParams::edge_scale() const { return std::exp(log_edge_scale[0]); }

ParamList GuideNetParams::parameters(const std::string& prefix) {
  ParamList out;
  for (std::size_t i = 0; i < layers.size(); ++i) append_conv_params(layers[i], prefix + ".conv" + std::to_string(i), out);
  out.push_back({prefix + ".log_edge_scale", &log_edge_scale, false});
  return out;
}

GuideNetParams make_guide_net(std::size_t classes, std::size_t candidates, std::size_t width, Rng& rng) {
  GuideNetParams p;
  p.layers[0] = make_conv(classes + 1, width, 3, {1, 1, 1});
  p.layers[1] = make_conv(width, width, 3, {1, 1, 1});
  p.layers[2] = make_conv(width, candidates, 3, {1, 1, 1});
  init_fan_in(p.layers[0], rng);
  init_fan_in(p.layers[1], rng);
  init_zero(p.layers[2]);
  p.log_edge_scale = Tensor(chw(1, 1, 1), Real(0));
  return p;
}

Tensor edge_response(const Tensor& warped) {
  if (warped.shape().stack != 1 || warped.channels() == 0) {
    throw std::invalid_argument("edge_map: expected a C x h x w segmentation, got " + warped.shape().str());
  }
  const std::size_t h = warped.height(), w = warped.width(), plane = h * w, cc = warped.channels();
  std::vector<std::size_t> label(plane);
  for (std::size_t p = 0; p < plane; ++p) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < cc; ++c) {
      if (warped[c * plane + p] > warped[best * plane + p]) best = c;
    }
    label[p] = best;
  }
  auto at = [&](std::ptrdiff_t y, std::ptrdiff_t x) {
    y = std::clamp<std::ptrdiff_t>(y, 0, static_cast<std::ptrdiff_t>(h) - 1);
    x = std::clamp<std::ptrdiff_t>(x, 0, static_cast<std::ptrdiff_t>(w) - 1);
    return label[static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)];
  };
  Tensor out(chw(1, h, w));
  for (std::size_t c = 0; c < cc; ++c) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const auto yy = static_cast<std::ptrdiff_t>(y), xx = static_cast<std::ptrdiff_t>(x);
        auto one = [&](std::ptrdiff_t ty, std::ptrdiff_t tx) { return at(ty, tx) == c ? 1 : 0; };
        const int lap = one(yy - 1, xx) + one(yy + 1, xx) + one(yy, xx - 1) + one(yy, xx + 1) - 4 * one(yy, xx);
        out.at(0, y, x) += static_cast<Real>(std::abs(lap));
      }
    }
  }
  return out;
}

EdgeMap edge_map(const SegTensor& warped, Real alpha) {
  Tensor r = edge_response(warped.scores);
  for (Real& v : r.data()) v = sigmoid(alpha * v);
  return EdgeMap{std::move(r)};
}

Var edge_map(const Var& warped, const Var& alpha) {
  auto response = std::make_shared<Tensor>(edge_response(warped.value()));
  const Real a = alpha.value()[0];
  Tensor out = *response;
  for (Real& v : out.data()) v = sigmoid(a * v);
  return Var::make(std::move(out), {&alpha}, [alpha, response](const Tensor& g) {
    const Real a = alpha.value()[0];
    Real da = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const Real s = sigmoid(a * (*response)[i]);
      da += g[i] * s * (1 - s) * (*response)[i];
    }
    alpha.add_grad(Tensor(alpha.shape(), da));
  });
}

Var guide(const GuideNetParams& params, const ParamBinder& bind, const Var& intra_logits, const Var& edges) {
  const Shape& a = intra_logits.shape();
  const Shape& e = edges.shape();
  if (a.height != e.height || a.width != e.width || e.channels != 1 || a.channels + 1 != params.layers[0].in_channels()) {
    throw std::invalid_argument("guide: intra logits " + a.str() + " and edge map " + e.str() +
                                " do not match the guiding network input");
  }
  Var x = concat_channels({intra_logits, edges});
  x = relu(conv2d(x, params.layers[0], bind));
  x = relu(conv2d(x, params.layers[1], bind));
  return softmax_channels(conv2d(x, params.layers[2], bind));
}

GuidanceField guide(const GuideNetParams& params, const SegTensor& intra_logits, const EdgeMap& edges) {
  const ParamBinder bind;
  const Var logits = Var::view(intra_logits.scores);
  const Var e = Var::view(edges.response);
  const Shape& a = logits.shape();
  if (a.height != e.shape().height || a.width != e.shape().width || e.shape().channels != 1 ||
      a.channels + 1 != params.layers[0].in_channels()) {
    throw std::invalid_argument("guide: intra logits " + a.str() + " and edge map " + e.shape().str() +
                                " do not match the guiding network input");
  }
  Var x = concat_channels({logits, e});
  x = relu(conv2d(x, params.layers[0], bind));
  x = relu(conv2d(x, params.layers[1], bind));
  Tensor raw = conv2d(x, params.layers[2], bind).value();
  Tensor normalized = softmax_channels(raw);
  return GuidanceField{std::move(raw), std::move(normalized)};
}

Tensor fuse(const Tensor& candidates, const Tensor& intra, const Tensor& weights) {
  check_fuse_shapes(candidates, intra, weights);
  const std::size_t cc = intra.channels(), plane = intra.shape().plane();
  const std::size_t d_count = weights.channels() - 1;
  Tensor out(intra.shape());
  for (std::size_t c = 0; c < cc; ++c) {
    for (std::size_t p = 0; p < plane; ++p) {
      Real acc = 0;
      for (std::size_t d = 0; d < d_count; ++d) acc += weights[d * plane + p] * candidates[(d * cc + c) * plane + p];
      acc += weights[d_count * plane + p] * intra[c * plane + p];
      out[c * plane + p] = acc;
    }
  }
  return out;
}

SegTensor fuse(const ShiftStack& shifts, const SegTensor& intra, const GuidanceField& guidance) {
  if (shifts.classes != intra.classes()) {
    throw std::invalid_argument("fuse: shift stack has " + std::to_string(shifts.classes) + " classes, intra has " +
                                std::to_string(intra.classes()));
  }
  return SegTensor{fuse(shifts.candidates, intra.scores, guidance.normalized), intra.semantics};
}

Var fuse(const Var& candidates, const Var& intra, const Var& weights) {
  Tensor out = fuse(candidates.value(), intra.value(), weights.value());
  return Var::make(std::move(out), {&candidates, &intra, &weights}, [candidates, intra, weights](const Tensor& g) {
    const Tensor& cv = candidates.value();
    const Tensor& iv = intra.value();
    const Tensor& wv = weights.value();
    const std::size_t cc = iv.channels(), plane = iv.shape().plane();
    const std::size_t d_count = wv.channels() - 1;
    Tensor dc(cv.shape()), di(iv.shape()), dw(wv.shape());
    for (std::size_t c = 0; c < cc; ++c) {
      for (std::size_t p = 0; p < plane; ++p) {
        const Real gv = g[c * plane + p];
        for (std::size_t d = 0; d < d_count; ++d) {
          dc[(d * cc + c) * plane + p] = gv * wv[d * plane + p];
          dw[d * plane + p] += gv * cv[(d * cc + c) * plane + p];
        }
        di[c * plane + p] = gv * wv[d_count * plane + p];
        dw[d_count * plane + p] += gv * iv[c * plane + p];
      }
    }
    candidates.add_grad(dc);
    intra.add_grad(di);
    weights.add_grad(dw);
  });
}

namespace {

enum class RenormKind { pass, divide, uniform };

struct RenormPixel {
  RenormKind kind;
  Real sum;
};

std::vector<RenormPixel> renorm_plan(const Tensor& seg) {
  const std::size_t plane = seg.shape().plane(), cc = seg.channels();
  std::vector<RenormPixel> plan(plane);
  for (std::size_t p = 0; p < plane; ++p) {
    Real s = 0;
    bool negative = false;
    for (std::size_t c = 0; c < cc; ++c) {
      const Real v = seg[c * plane + p];
      negative |= v < Real(0);
      s += std::max(v, Real(0));
    }
    if (s <= Real(0)) {
      plan[p] = {RenormKind::uniform, s};
    } else if (!negative && std::abs(s - Real(1)) <= renorm_tolerance()) {
      plan[p] = {RenormKind::pass, s};
    } else {
      plan[p] = {RenormKind::divide, s};
    }
  }
  return plan;
}

}  // namespace

Tensor renormalize(const Tensor& seg) {
  const std::size_t plane = seg.shape().plane(), cc = seg.channels();
  const auto plan = renorm_plan(seg);
  Tensor out = seg;
  for (std::size_t p = 0; p < plane; ++p) {
    switch (plan[p].kind) {
      case RenormKind::pass:
        break;
      case RenormKind::uniform:
        for (std::size_t c = 0; c < cc; ++c) out[c * plane + p] = Real(1) / static_cast<Real>(cc);
        break;
      case RenormKind::divide:
        for (std::size_t c = 0; c < cc; ++c) out[c * plane + p] = std::max(seg[c * plane + p], Real(0)) / plan[p].sum;
        break;
    }
  }
  return out;
}

Var renormalize(const Var& seg) {
  auto out = std::make_shared<Tensor>(renormalize(seg.value()));
  Tensor value = *out;
  return Var::make(std::move(value), {&seg}, [seg, out](const Tensor& g) {
    const Tensor& x = seg.value();
    const std::size_t plane = x.shape().plane(), cc = x.channels();
    const auto plan = renorm_plan(x);
    Tensor dx(x.shape());
    for (std::size_t p = 0; p < plane; ++p) {
      // A passed-through pixel is x / sum(x) with sum(x) ~ 1 up to rounding,
      // so it shares the quotient's derivative.
      if (plan[p].kind != RenormKind::uniform) {
        Real dot = 0;
        for (std::size_t c = 0; c < cc; ++c) dot += g[c * plane + p] * (*out)[c * plane + p];
        for (std::size_t c = 0; c < cc; ++c) {
          if (x[c * plane + p] > Real(0)) dx[c * plane + p] = (g[c * plane + p] - dot) / plan[p].sum;
        }
      }
    }
    seg.add_grad(dx);
  });
}

Var exp(const Var& x) {
  Tensor y = x.value();
  for (Real& v : y.data()) v = std::exp(v);
  auto cached = std::make_shared<Tensor>(y);
  return Var::make(std::move(y), {&x}, [x, cached](const Tensor& g) {
    Tensor dx = g;
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= (*cached)[i];
    x.add_grad(dx);
  });
}

}  // namespace gsv
