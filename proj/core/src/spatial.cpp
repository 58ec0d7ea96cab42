#include "gsv/spatial.hpp"

#include <algorithm>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "gsv/ops.hpp"

namespace gsv {

namespace {

std::size_t clamp_index(std::ptrdiff_t i, std::size_t n) {
  if (i < 0) return 0;
  return std::min(static_cast<std::size_t>(i), n - 1);
}

void shift_into(const Tensor& seg, Offset o, Real* dst) {
  const std::size_t h = seg.height(), w = seg.width(), plane = h * w;
  for (std::size_t c = 0; c < seg.channels(); ++c) {
    const Real* src = seg.raw() + c * plane;
    for (std::size_t y = 0; y < h; ++y) {
      const std::size_t sy = clamp_index(static_cast<std::ptrdiff_t>(y) + o.dy, h);
      for (std::size_t x = 0; x < w; ++x) {
        const std::size_t sx = clamp_index(static_cast<std::ptrdiff_t>(x) + o.dx, w);
        dst[c * plane + y * w + x] = src[sy * w + sx];
      }
    }
  }
}

Tensor shift_stack(const Tensor& seg, const std::vector<Offset>& offsets) {
  const std::size_t cc = seg.channels();
  Tensor out(chw(offsets.size() * cc, seg.height(), seg.width()));
  for (std::size_t d = 0; d < offsets.size(); ++d) {
    shift_into(seg, offsets[d], out.raw() + d * cc * seg.shape().plane());
  }
  return out;
}

// padded: C x (H + 2r) x (W + 2r); kernels: D x 1 x K x K -> (D * C) x H x W.
Tensor bank_correlate(const Tensor& padded, const Tensor& kernels, std::size_t k) {
  const std::size_t d_count = kernels.shape().stack, cc = padded.channels();
  const std::size_t h = padded.height() - (k - 1), w = padded.width() - (k - 1);
  Tensor out(chw(d_count * cc, h, w));
  for (std::size_t d = 0; d < d_count; ++d) {
    const Real* kern = kernels.raw() + d * k * k;
    for (std::size_t c = 0; c < cc; ++c) {
      for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
          Real acc = 0;
          for (std::size_t ky = 0; ky < k; ++ky) {
            for (std::size_t kx = 0; kx < k; ++kx) acc += kern[ky * k + kx] * padded.at(c, y + ky, x + kx);
          }
          out.at(d * cc + c, y, x) = acc;
        }
      }
    }
  }
  return out;
}

Var bank_correlate(const Var& padded, const Var& kernels, std::size_t k) {
  Tensor out = bank_correlate(padded.value(), kernels.value(), k);
  return Var::make(std::move(out), {&padded, &kernels}, [padded, kernels, k](const Tensor& g) {
    const Tensor& pv = padded.value();
    const Tensor& kv = kernels.value();
    const std::size_t d_count = kv.shape().stack, cc = pv.channels();
    const std::size_t h = g.height(), w = g.width();
    Tensor dp(pv.shape());
    Tensor dk(kv.shape());
    for (std::size_t d = 0; d < d_count; ++d) {
      for (std::size_t c = 0; c < cc; ++c) {
        for (std::size_t y = 0; y < h; ++y) {
          for (std::size_t x = 0; x < w; ++x) {
            const Real gv = g.at(d * cc + c, y, x);
            for (std::size_t ky = 0; ky < k; ++ky) {
              for (std::size_t kx = 0; kx < k; ++kx) {
                dk[(d * k + ky) * k + kx] += gv * pv.at(c, y + ky, x + kx);
                dp.at(c, y + ky, x + kx) += gv * kv[(d * k + ky) * k + kx];
              }
            }
          }
        }
      }
    }
    padded.add_grad(dp);
    kernels.add_grad(dk);
  });
}

}  // namespace

std::vector<Offset> default_offsets(std::size_t kernel_size) {
  const int r = static_cast<int>(kernel_size / 2);
  std::vector<Offset> out{{0, 0}};
  for (int dy = -r; dy <= r; ++dy) {
    for (int dx = -r; dx <= r; ++dx) {
      if (dx == 0 && dy == 0) continue;
      if (kernel_size == 5) {
        const bool inner = std::abs(dx) <= 1 && std::abs(dy) <= 1;
        const bool extreme = (std::abs(dx) == 2 || dx == 0) && (std::abs(dy) == 2 || dy == 0);
        if (!inner && !extreme) continue;
      }
      out.push_back({dx, dy});
    }
  }
  return out;
}

KernelBank make_bank(std::size_t kernel_size, const std::optional<std::vector<Offset>>& subset, bool learnable) {
  if (kernel_size == 0 || kernel_size % 2 == 0) {
    throw std::invalid_argument("kernel bank size must be odd, got " + std::to_string(kernel_size));
  }
  KernelBank bank;
  bank.kernel_size = kernel_size;
  bank.learnable = learnable;
  bank.offsets = subset ? *subset : default_offsets(kernel_size);
  if (bank.offsets.empty()) throw std::invalid_argument("kernel bank needs at least one offset");
  const int r = static_cast<int>(kernel_size / 2);
  for (std::size_t i = 0; i < bank.offsets.size(); ++i) {
    const Offset o = bank.offsets[i];
    if (std::abs(o.dx) > r || std::abs(o.dy) > r) {
      throw std::invalid_argument("offset (" + std::to_string(o.dx) + "," + std::to_string(o.dy) +
                                  ") outside a " + std::to_string(kernel_size) + "x" +
                                  std::to_string(kernel_size) + " kernel");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (bank.offsets[j] == o) {
        throw std::invalid_argument("duplicate offset (" + std::to_string(o.dx) + "," + std::to_string(o.dy) + ")");
      }
    }
  }
  const std::size_t k = kernel_size;
  bank.kernels = Tensor(Shape{bank.offsets.size(), 1, k, k});
  for (std::size_t d = 0; d < bank.offsets.size(); ++d) {
    const auto ky = static_cast<std::size_t>(r + bank.offsets[d].dy);
    const auto kx = static_cast<std::size_t>(r + bank.offsets[d].dx);
    bank.kernels[(d * k + ky) * k + kx] = Real(1);
  }
  return bank;
}

Tensor ShiftStack::candidate(std::size_t d) const {
  const std::size_t plane = candidates.shape().plane();
  Tensor out(chw(classes, candidates.height(), candidates.width()));
  std::copy(candidates.raw() + d * classes * plane, candidates.raw() + (d + 1) * classes * plane, out.raw());
  return out;
}

Tensor shift_clamped(const Tensor& seg, Offset offset) {
  Tensor out(seg.shape());
  shift_into(seg, offset, out.raw());
  return out;
}

ShiftStack propagate_spatial(const SegTensor& seg, const KernelBank& bank) {
  ShiftStack s;
  s.count = bank.size();
  s.classes = seg.classes();
  if (bank.learnable) {
    s.candidates = bank_correlate(replicate_pad(seg.scores, bank.radius()), bank.kernels, bank.kernel_size);
  } else {
    s.candidates = shift_stack(seg.scores, bank.offsets);
  }
  return s;
}

Var propagate_spatial(const Var& seg, const KernelBank& bank, const ParamBinder& bind) {
  if (bank.learnable) {
    return bank_correlate(replicate_pad(seg, bank.radius()), bind(bank.kernels), bank.kernel_size);
  }
  Tensor out = shift_stack(seg.value(), bank.offsets);
  const std::vector<Offset> offsets = bank.offsets;
  return Var::make(std::move(out), {&seg}, [seg, offsets](const Tensor& g) {
    const Shape& s = seg.shape();
    const std::size_t h = s.height, w = s.width, plane = h * w, cc = s.channels;
    Tensor dx(s);
    for (std::size_t d = 0; d < offsets.size(); ++d) {
      for (std::size_t c = 0; c < cc; ++c) {
        for (std::size_t y = 0; y < h; ++y) {
          const std::size_t sy = clamp_index(static_cast<std::ptrdiff_t>(y) + offsets[d].dy, h);
          for (std::size_t x = 0; x < w; ++x) {
            const std::size_t sx = clamp_index(static_cast<std::ptrdiff_t>(x) + offsets[d].dx, w);
            dx[c * plane + sy * w + sx] += g[(d * cc + c) * plane + y * w + x];
          }
        }
      }
    }
    seg.add_grad(dx);
  });
}

}  // namespace gsv
