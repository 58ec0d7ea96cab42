#include "gsv/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>

namespace gsv {

namespace {

using RowMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowMap = Eigen::Map<RowMat>;
using ConstRowMap = Eigen::Map<const RowMat>;

void require_activation(const Shape& s, const char* what) {
  if (s.stack != 1) {
    throw std::invalid_argument(std::string(what) + ": expected a C x H x W tensor, got " + s.str());
  }
}

bool is_pointwise(std::size_t k, const ConvGeometry& g) {
  return k == 1 && g.stride == 1 && g.padding == 0;
}

// Column buffer layout: row = (ci, ky, kx), column = output pixel.
void im2col(const Tensor& x, std::size_t k, const ConvGeometry& g, std::size_t oh, std::size_t ow,
            std::vector<Real>& cols) {
  const std::size_t cin = x.channels(), h = x.height(), w = x.width();
  const std::size_t p = oh * ow;
  cols.assign(cin * k * k * p, Real(0));
  const auto pad = static_cast<std::ptrdiff_t>(g.padding);
  for (std::size_t ci = 0; ci < cin; ++ci) {
    const Real* src = x.raw() + ci * h * w;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        Real* row = cols.data() + ((ci * k + ky) * k + kx) * p;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky * g.dilation) - pad;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox * g.stride + kx * g.dilation) - pad;
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
            row[oy * ow + ox] = src[iy * static_cast<std::ptrdiff_t>(w) + ix];
          }
        }
      }
    }
  }
}

void col2im_add(const std::vector<Real>& cols, std::size_t k, const ConvGeometry& g, std::size_t oh,
                std::size_t ow, Tensor& dx) {
  const std::size_t cin = dx.channels(), h = dx.height(), w = dx.width();
  const std::size_t p = oh * ow;
  const auto pad = static_cast<std::ptrdiff_t>(g.padding);
  for (std::size_t ci = 0; ci < cin; ++ci) {
    Real* dst = dx.raw() + ci * h * w;
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const Real* row = cols.data() + ((ci * k + ky) * k + kx) * p;
        for (std::size_t oy = 0; oy < oh; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.stride + ky * g.dilation) - pad;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
          for (std::size_t ox = 0; ox < ow; ++ox) {
            const std::ptrdiff_t ix =
                static_cast<std::ptrdiff_t>(ox * g.stride + kx * g.dilation) - pad;
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w)) continue;
            dst[iy * static_cast<std::ptrdiff_t>(w) + ix] += row[oy * ow + ox];
          }
        }
      }
    }
  }
}

void check_conv_shapes(const Shape& xs, const Shape& ws, const Shape* bs) {
  require_activation(xs, "conv2d input");
  if (ws.height != ws.width || ws.height == 0) {
    throw std::invalid_argument("conv2d: kernel must be square, got " + ws.str());
  }
  if (xs.channels != ws.channels) {
    throw std::invalid_argument("conv2d: input " + xs.str() + " does not match kernel " + ws.str());
  }
  if (bs && !(*bs == chw(ws.stack, 1, 1))) {
    throw std::invalid_argument("conv2d: bias " + bs->str() + " does not match kernel " + ws.str());
  }
}

struct ConvForward {
  Tensor y;
  std::vector<Real> cols;  // empty for pointwise convolutions
};

ConvForward conv_forward(const Tensor& x, const Tensor& w, const Tensor* b, const ConvGeometry& g) {
  check_conv_shapes(x.shape(), w.shape(), b ? &b->shape() : nullptr);
  const std::size_t k = w.shape().height;
  const std::size_t oh = conv_output_extent(x.height(), k, g);
  const std::size_t ow = conv_output_extent(x.width(), k, g);
  const std::size_t cout = w.shape().stack;
  const std::size_t depth = x.channels() * k * k;
  const std::size_t p = oh * ow;

  ConvForward out{Tensor(chw(cout, oh, ow)), {}};
  const Real* col_ptr = x.raw();
  if (!is_pointwise(k, g)) {
    im2col(x, k, g, oh, ow, out.cols);
    col_ptr = out.cols.data();
  }
  RowMap y(out.y.raw(), static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(p));
  y.noalias() = ConstRowMap(w.raw(), static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(depth)) *
                ConstRowMap(col_ptr, static_cast<Eigen::Index>(depth), static_cast<Eigen::Index>(p));
  if (b) {
    for (std::size_t co = 0; co < cout; ++co) {
      Real* row = out.y.raw() + co * p;
      const Real bias = (*b)[co];
      for (std::size_t i = 0; i < p; ++i) row[i] += bias;
    }
  }
  return out;
}

Real sample_bilinear_coord(Real src, std::size_t n, std::size_t& i0, std::size_t& i1) {
  src = std::clamp(src, Real(0), static_cast<Real>(n - 1));
  i0 = static_cast<std::size_t>(std::floor(src));
  i0 = std::min(i0, n - 1);
  i1 = std::min(i0 + 1, n - 1);
  return src - static_cast<Real>(i0);
}

struct ResizeTap {
  std::size_t i0, i1;
  Real frac;
};

std::vector<ResizeTap> resize_taps(std::size_t in, std::size_t out) {
  std::vector<ResizeTap> taps(out);
  const Real scale = static_cast<Real>(in) / static_cast<Real>(out);
  for (std::size_t o = 0; o < out; ++o) {
    const Real src = (static_cast<Real>(o) + Real(0.5)) * scale - Real(0.5);
    taps[o].frac = sample_bilinear_coord(src, in, taps[o].i0, taps[o].i1);
  }
  return taps;
}

}  // namespace

ConvSpec make_conv(std::size_t in, std::size_t out, std::size_t k, ConvGeometry g, bool bias) {
  ConvSpec spec;
  spec.weight = Tensor(Shape{out, in, k, k});
  if (bias) spec.bias = Tensor(chw(out, 1, 1));
  spec.geometry = g;
  return spec;
}

std::size_t conv_output_extent(std::size_t in, std::size_t k, const ConvGeometry& g) {
  if (g.stride == 0 || g.dilation == 0) throw std::invalid_argument("conv: stride and dilation must be >= 1");
  const auto span = static_cast<std::ptrdiff_t>(g.dilation * (k - 1) + 1);
  const auto padded = static_cast<std::ptrdiff_t>(in + 2 * g.padding);
  if (padded < span) {
    throw std::invalid_argument("conv: input extent " + std::to_string(in) + " too small for kernel " +
                                std::to_string(k) + " (dilation " + std::to_string(g.dilation) +
                                ", padding " + std::to_string(g.padding) + ")");
  }
  return static_cast<std::size_t>((padded - span) / static_cast<std::ptrdiff_t>(g.stride)) + 1;
}

Tensor conv2d(const Tensor& input, const ConvSpec& spec) {
  return conv_forward(input, spec.weight, spec.has_bias() ? &spec.bias : nullptr, spec.geometry).y;
}

Tensor bilinear_resize(const Tensor& input, std::size_t out_h, std::size_t out_w) {
  require_activation(input.shape(), "bilinear_resize");
  if (out_h == 0 || out_w == 0) throw std::invalid_argument("bilinear_resize: target extent must be >= 1");
  if (input.height() == 0 || input.width() == 0) throw std::invalid_argument("bilinear_resize: empty input");
  const auto ty = resize_taps(input.height(), out_h);
  const auto tx = resize_taps(input.width(), out_w);
  Tensor out(chw(input.channels(), out_h, out_w));
  for (std::size_t c = 0; c < input.channels(); ++c) {
    for (std::size_t y = 0; y < out_h; ++y) {
      const auto& a = ty[y];
      for (std::size_t x = 0; x < out_w; ++x) {
        const auto& b = tx[x];
        const Real top = (1 - b.frac) * input.at(c, a.i0, b.i0) + b.frac * input.at(c, a.i0, b.i1);
        const Real bot = (1 - b.frac) * input.at(c, a.i1, b.i0) + b.frac * input.at(c, a.i1, b.i1);
        out.at(c, y, x) = (1 - a.frac) * top + a.frac * bot;
      }
    }
  }
  return out;
}

Tensor softmax_channels(const Tensor& input) {
  require_activation(input.shape(), "softmax_channels");
  if (input.channels() == 0) throw std::invalid_argument("softmax_channels: no channels");
  const std::size_t plane = input.shape().plane(), cc = input.channels();
  Tensor out(input.shape());
  for (std::size_t p = 0; p < plane; ++p) {
    Real m = input[p];
    for (std::size_t c = 1; c < cc; ++c) m = std::max(m, input[c * plane + p]);
    Real s = 0;
    for (std::size_t c = 0; c < cc; ++c) {
      const Real e = std::exp(input[c * plane + p] - m);
      out[c * plane + p] = e;
      s += e;
    }
    for (std::size_t c = 0; c < cc; ++c) out[c * plane + p] /= s;
  }
  return out;
}

Tensor replicate_pad(const Tensor& input, std::size_t pad) {
  require_activation(input.shape(), "replicate_pad");
  const std::size_t h = input.height(), w = input.width();
  Tensor out(chw(input.channels(), h + 2 * pad, w + 2 * pad));
  for (std::size_t c = 0; c < input.channels(); ++c) {
    for (std::size_t y = 0; y < h + 2 * pad; ++y) {
      const std::size_t sy = std::min(std::max(y, pad) - pad, h - 1);
      for (std::size_t x = 0; x < w + 2 * pad; ++x) {
        const std::size_t sx = std::min(std::max(x, pad) - pad, w - 1);
        out.at(c, y, x) = input.at(c, sy, sx);
      }
    }
  }
  return out;
}

Tensor concat_channels(const std::vector<const Tensor*>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_channels: no inputs");
  const std::size_t h = parts.front()->height(), w = parts.front()->width();
  std::size_t total = 0;
  for (const Tensor* t : parts) {
    require_activation(t->shape(), "concat_channels");
    if (t->height() != h || t->width() != w) {
      throw std::invalid_argument("concat_channels: spatial mismatch " + parts.front()->shape().str() +
                                  " vs " + t->shape().str());
    }
    total += t->channels();
  }
  Tensor out(chw(total, h, w));
  Real* dst = out.raw();
  for (const Tensor* t : parts) dst = std::copy(t->raw(), t->raw() + t->size(), dst);
  return out;
}

// ---------------------------------------------------------------------------
// Differentiable operations

Var conv2d(const Var& input, const Var& weight, const Var& bias, const ConvGeometry& g) {
  const Tensor* b = bias.valid() ? &bias.value() : nullptr;
  auto fwd = conv_forward(input.value(), weight.value(), b, g);
  const bool need_any = input.requires_grad() || weight.requires_grad() || (b && bias.requires_grad());
  if (!need_any) return Var::constant(std::move(fwd.y));

  auto cols = std::make_shared<std::vector<Real>>(std::move(fwd.cols));
  std::vector<Var> inputs{input, weight};
  if (b) inputs.push_back(bias);
  return Var::make(std::move(fwd.y), inputs, [input, weight, bias, g, cols](const Tensor& gy) {
    const Tensor& x = input.value();
    const Tensor& w = weight.value();
    const std::size_t k = w.shape().height;
    const std::size_t cout = w.shape().stack;
    const std::size_t depth = x.channels() * k * k;
    const std::size_t oh = gy.height(), ow = gy.width(), p = oh * ow;
    const bool pointwise = is_pointwise(k, g);
    const Real* col_ptr = pointwise ? x.raw() : cols->data();
    ConstRowMap dy(gy.raw(), static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(p));

    if (weight.requires_grad()) {
      Tensor dw(w.shape());
      RowMap(dw.raw(), static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(depth)).noalias() =
          dy * ConstRowMap(col_ptr, static_cast<Eigen::Index>(depth), static_cast<Eigen::Index>(p)).transpose();
      weight.add_grad(dw);
    }
    if (bias.valid() && bias.requires_grad()) {
      Tensor db(bias.shape());
      for (std::size_t co = 0; co < cout; ++co) {
        Real s = 0;
        for (std::size_t i = 0; i < p; ++i) s += gy[co * p + i];
        db[co] = s;
      }
      bias.add_grad(db);
    }
    if (input.requires_grad()) {
      Tensor dx(x.shape());
      ConstRowMap wm(w.raw(), static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(depth));
      if (pointwise) {
        RowMap(dx.raw(), static_cast<Eigen::Index>(depth), static_cast<Eigen::Index>(p)).noalias() =
            wm.transpose() * dy;
      } else {
        std::vector<Real> dcols(depth * p);
        RowMap(dcols.data(), static_cast<Eigen::Index>(depth), static_cast<Eigen::Index>(p)).noalias() =
            wm.transpose() * dy;
        col2im_add(dcols, k, g, oh, ow, dx);
      }
      input.add_grad(dx);
    }
  });
}

Var conv2d(const Var& input, const ConvSpec& spec, const ParamBinder& bind) {
  return conv2d(input, bind(spec.weight), spec.has_bias() ? bind(spec.bias) : Var(), spec.geometry);
}

Var relu(const Var& x) {
  Tensor y = x.value();
  for (Real& v : y.data()) v = v > Real(0) ? v : Real(0);
  return Var::make(std::move(y), {&x}, [x](const Tensor& g) {
    Tensor dx(g.shape());
    const Tensor& xv = x.value();
    for (std::size_t i = 0; i < g.size(); ++i) dx[i] = xv[i] > Real(0) ? g[i] : Real(0);
    x.add_grad(dx);
  });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a.value(), b.value(), "add");
  Tensor y = a.value();
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += b.value()[i];
  return Var::make(std::move(y), {&a, &b}, [a, b](const Tensor& g) {
    a.add_grad(g);
    b.add_grad(g);
  });
}

Var scale(const Var& x, Real s) {
  Tensor y = x.value();
  for (Real& v : y.data()) v *= s;
  return Var::make(std::move(y), {&x}, [x, s](const Tensor& g) {
    Tensor dx = g;
    for (Real& v : dx.data()) v *= s;
    x.add_grad(dx);
  });
}

Var affine(const Var& x, Real s, Real b) {
  Tensor y = x.value();
  for (Real& v : y.data()) v = s * v + b;
  return Var::make(std::move(y), {&x}, [x, s](const Tensor& g) {
    Tensor dx = g;
    for (Real& v : dx.data()) v *= s;
    x.add_grad(dx);
  });
}

Var standardize_frame(const Var& frame) { return affine(frame, Real(4), Real(-2)); }

Var concat_channels(const std::vector<Var>& parts) {
  std::vector<const Tensor*> ts;
  ts.reserve(parts.size());
  for (const Var& p : parts) ts.push_back(&p.value());
  return Var::make(concat_channels(ts), parts, [parts](const Tensor& g) {
    std::size_t offset = 0;
    for (const Var& p : parts) {
      const std::size_t n = p.value().size();
      if (p.requires_grad()) {
        Tensor d(p.shape());
        std::copy(g.raw() + offset, g.raw() + offset + n, d.raw());
        p.add_grad(d);
      }
      offset += n;
    }
  });
}

Var slice_channels(const Var& x, std::size_t begin, std::size_t count) {
  const Tensor& xv = x.value();
  if (begin + count > xv.channels()) {
    throw std::invalid_argument("slice_channels: range [" + std::to_string(begin) + ", " +
                                std::to_string(begin + count) + ") exceeds " + xv.shape().str());
  }
  const std::size_t plane = xv.shape().plane();
  Tensor y(chw(count, xv.height(), xv.width()));
  std::copy(xv.raw() + begin * plane, xv.raw() + (begin + count) * plane, y.raw());
  return Var::make(std::move(y), {&x}, [x, begin, plane](const Tensor& g) {
    Tensor dx(x.shape());
    std::copy(g.raw(), g.raw() + g.size(), dx.raw() + begin * plane);
    x.add_grad(dx);
  });
}

Var bilinear_resize(const Var& x, std::size_t out_h, std::size_t out_w) {
  Tensor y = bilinear_resize(x.value(), out_h, out_w);
  return Var::make(std::move(y), {&x}, [x, out_h, out_w](const Tensor& g) {
    const Shape& s = x.shape();
    const auto ty = resize_taps(s.height, out_h);
    const auto tx = resize_taps(s.width, out_w);
    Tensor dx(s);
    for (std::size_t c = 0; c < s.channels; ++c) {
      for (std::size_t y = 0; y < out_h; ++y) {
        const auto& a = ty[y];
        for (std::size_t xo = 0; xo < out_w; ++xo) {
          const auto& b = tx[xo];
          const Real gv = g.at(c, y, xo);
          dx.at(c, a.i0, b.i0) += gv * (1 - a.frac) * (1 - b.frac);
          dx.at(c, a.i0, b.i1) += gv * (1 - a.frac) * b.frac;
          dx.at(c, a.i1, b.i0) += gv * a.frac * (1 - b.frac);
          dx.at(c, a.i1, b.i1) += gv * a.frac * b.frac;
        }
      }
    }
    x.add_grad(dx);
  });
}

Var softmax_channels(const Var& x) {
  auto y = std::make_shared<Tensor>(softmax_channels(x.value()));
  Tensor out = *y;
  return Var::make(std::move(out), {&x}, [x, y](const Tensor& g) {
    const std::size_t plane = y->shape().plane(), cc = y->channels();
    Tensor dx(y->shape());
    for (std::size_t p = 0; p < plane; ++p) {
      Real dot = 0;
      for (std::size_t c = 0; c < cc; ++c) dot += g[c * plane + p] * (*y)[c * plane + p];
      for (std::size_t c = 0; c < cc; ++c) {
        dx[c * plane + p] = (*y)[c * plane + p] * (g[c * plane + p] - dot);
      }
    }
    x.add_grad(dx);
  });
}

Var replicate_pad(const Var& x, std::size_t pad) {
  Tensor y = replicate_pad(x.value(), pad);
  return Var::make(std::move(y), {&x}, [x, pad](const Tensor& g) {
    const std::size_t h = x.shape().height, w = x.shape().width;
    Tensor dx(x.shape());
    for (std::size_t c = 0; c < g.channels(); ++c) {
      for (std::size_t y = 0; y < g.height(); ++y) {
        const std::size_t sy = std::min(std::max(y, pad) - pad, h - 1);
        for (std::size_t xx = 0; xx < g.width(); ++xx) {
          const std::size_t sx = std::min(std::max(xx, pad) - pad, w - 1);
          dx.at(c, sy, sx) += g.at(c, y, xx);
        }
      }
    }
    x.add_grad(dx);
  });
}

Var sum_all(const Var& x) {
  Tensor y(chw(1, 1, 1), x.value().sum());
  return Var::make(std::move(y), {&x}, [x](const Tensor& g) { x.add_grad(Tensor(x.shape(), g[0])); });
}

}  // namespace gsv
