#pragma once

#include <optional>
#include <vector>

#include "gsv/autodiff.hpp"
#include "gsv/tensor.hpp"

namespace gsv {

/// Candidate displacement: the candidate at pixel (y, x) reads the source at
/// (y + dy, x + dx).
struct Offset {
  int dx = 0;
  int dy = 0;
  bool operator==(const Offset&) const = default;
};

/// Ordered ideal-delay kernels. `kernels` is a D x 1 x K x K stack holding a
/// unit impulse per offset (possibly trained away from impulses when
/// `learnable`). The order is part of the model format: guidance channel d
/// weights candidate d.
struct KernelBank {
  std::size_t kernel_size = 3;
  std::vector<Offset> offsets;
  bool learnable = false;
  Tensor kernels;

  std::size_t size() const { return offsets.size(); }
  std::size_t radius() const { return kernel_size / 2; }
};

/// Default offset list: (0,0) first, then row-major over the remaining
/// positions. K = 5 keeps the inner 3x3 plus the eight axis/diagonal
/// extremes at distance 2 (17 patterns); other K use the full grid.
std::vector<Offset> default_offsets(std::size_t kernel_size);

/// Throws std::invalid_argument for even K, out-of-range or duplicate offsets.
KernelBank make_bank(std::size_t kernel_size, const std::optional<std::vector<Offset>>& subset = std::nullopt,
                     bool learnable = false);

/// D shifted copies of a segmentation, stored candidate-major as a
/// (D * C) x H x W tensor: channel d * C + c is class c of candidate d.
struct ShiftStack {
  Tensor candidates;
  std::size_t count = 0;
  std::size_t classes = 0;

  Tensor candidate(std::size_t d) const;
};

/// Pure shift with clamp-to-edge borders.
Tensor shift_clamped(const Tensor& seg, Offset offset);

/// Impulse banks take the index-shift path; learnable banks convolve the
/// edge-replicated input with their kernels. Both agree bit-for-bit on
/// impulse kernels.
ShiftStack propagate_spatial(const SegTensor& seg, const KernelBank& bank);
Var propagate_spatial(const Var& seg, const KernelBank& bank, const ParamBinder& bind);

}  // namespace gsv
