#include "gsv/warp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace gsv {

namespace {

struct Tap {
  std::size_t i0, i1;
  Real frac;
  bool live;  // right derivative w.r.t. the coordinate is nonzero (not clamped)
};

Tap make_tap(Real coord, std::size_t n) {
  const Real hi = static_cast<Real>(n - 1);
  Tap t{};
  t.live = coord >= Real(0) && coord < hi;
  const Real c = std::clamp(coord, Real(0), hi);
  t.i0 = std::min(static_cast<std::size_t>(std::floor(c)), n - 1);
  t.i1 = std::min(t.i0 + 1, n - 1);
  t.frac = c - static_cast<Real>(t.i0);
  return t;
}

void check_shapes(const Tensor& prev, const Tensor& flow) {
  if (prev.shape().stack != 1 || flow.shape().stack != 1 || flow.channels() != 2 ||
      prev.height() != flow.height() || prev.width() != flow.width() || prev.channels() == 0) {
    throw std::invalid_argument("warp: segmentation " + prev.shape().str() +
                                " incompatible with flow " + flow.shape().str());
  }
}

}  // namespace

Tensor warp_bilinear(const Tensor& prev, const Tensor& flow) {
  check_shapes(prev, flow);
  const std::size_t h = prev.height(), w = prev.width(), plane = h * w;
  Tensor out(prev.shape());
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t p = y * w + x;
      const Tap tx = make_tap(static_cast<Real>(x) + flow[p], w);
      const Tap ty = make_tap(static_cast<Real>(y) + flow[plane + p], h);
      for (std::size_t c = 0; c < prev.channels(); ++c) {
        const Real top = (1 - tx.frac) * prev.at(c, ty.i0, tx.i0) + tx.frac * prev.at(c, ty.i0, tx.i1);
        const Real bot = (1 - tx.frac) * prev.at(c, ty.i1, tx.i0) + tx.frac * prev.at(c, ty.i1, tx.i1);
        out[c * plane + p] = (1 - ty.frac) * top + ty.frac * bot;
      }
    }
  }
  return out;
}

SegTensor warp_segmentation(const SegTensor& prev, const FlowField& flow) {
  return SegTensor{warp_bilinear(prev.scores, flow.vectors), prev.semantics};
}

WarpGrad warp_grad(const Tensor& prev, const Tensor& flow, const Tensor& upstream) {
  check_shapes(prev, flow);
  require_same_shape(prev, upstream, "warp_grad upstream");
  const std::size_t h = prev.height(), w = prev.width(), plane = h * w;
  WarpGrad g{Tensor(prev.shape()), Tensor(flow.shape())};
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t p = y * w + x;
      const Tap tx = make_tap(static_cast<Real>(x) + flow[p], w);
      const Tap ty = make_tap(static_cast<Real>(y) + flow[plane + p], h);
      Real dfx = 0, dfy = 0;
      for (std::size_t c = 0; c < prev.channels(); ++c) {
        const Real u = upstream[c * plane + p];
        const Real v00 = prev.at(c, ty.i0, tx.i0), v01 = prev.at(c, ty.i0, tx.i1);
        const Real v10 = prev.at(c, ty.i1, tx.i0), v11 = prev.at(c, ty.i1, tx.i1);
        g.d_prev.at(c, ty.i0, tx.i0) += u * (1 - ty.frac) * (1 - tx.frac);
        g.d_prev.at(c, ty.i0, tx.i1) += u * (1 - ty.frac) * tx.frac;
        g.d_prev.at(c, ty.i1, tx.i0) += u * ty.frac * (1 - tx.frac);
        g.d_prev.at(c, ty.i1, tx.i1) += u * ty.frac * tx.frac;
        dfx += u * ((1 - ty.frac) * (v01 - v00) + ty.frac * (v11 - v10));
        dfy += u * ((1 - tx.frac) * (v10 - v00) + tx.frac * (v11 - v01));
      }
      // Integer positions take the right (forward-difference) derivative.
      g.d_flow[p] = tx.live ? dfx : Real(0);
      g.d_flow[plane + p] = ty.live ? dfy : Real(0);
    }
  }
  return g;
}

Var warp(const Var& prev, const Var& flow) {
  Tensor out = warp_bilinear(prev.value(), flow.value());
  return Var::make(std::move(out), {&prev, &flow}, [prev, flow](const Tensor& up) {
    WarpGrad g = warp_grad(prev.value(), flow.value(), up);
    prev.add_grad(g.d_prev);
    flow.add_grad(g.d_flow);
  });
}

}  // namespace gsv
