#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "gsv/image.hpp"
#include "gsv/ops.hpp"

namespace gsv::test {

inline Tensor random_tensor(Shape shape, std::uint64_t seed, Real lo = -1, Real hi = 1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(shape);
  for (Real& v : t.data()) v = static_cast<Real>(u(rng));
  return t;
}

/// Random per-pixel distributions over the channels.
inline Tensor random_probabilities(std::size_t c, std::size_t h, std::size_t w, std::uint64_t seed) {
  Tensor t = random_tensor(chw(c, h, w), seed, Real(0.05), Real(1));
  const std::size_t plane = h * w;
  for (std::size_t p = 0; p < plane; ++p) {
    Real s = 0;
    for (std::size_t k = 0; k < c; ++k) s += t[k * plane + p];
    for (std::size_t k = 0; k < c; ++k) t[k * plane + p] /= s;
  }
  return t;
}

inline LabelMap random_labels(std::size_t h, std::size_t w, std::size_t classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  LabelMap m(h, w);
  for (auto& v : m.labels) v = static_cast<std::uint8_t>(rng() % classes);
  return m;
}

/// Direct seven-loop convolution with zero padding.
inline Tensor conv_oracle(const Tensor& x, const ConvSpec& spec) {
  const auto& g = spec.geometry;
  const std::size_t k = spec.kernel_size(), ci = spec.in_channels(), co = spec.out_channels();
  const std::size_t oh = conv_output_extent(x.height(), k, g), ow = conv_output_extent(x.width(), k, g);
  Tensor out(chw(co, oh, ow));
  for (std::size_t o = 0; o < co; ++o)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t xo = 0; xo < ow; ++xo) {
        double acc = spec.has_bias() ? spec.bias[o] : 0.0;
        for (std::size_t i = 0; i < ci; ++i)
          for (std::size_t ky = 0; ky < k; ++ky)
            for (std::size_t kx = 0; kx < k; ++kx) {
              const long sy = long(y * g.stride + ky * g.dilation) - long(g.padding);
              const long sx = long(xo * g.stride + kx * g.dilation) - long(g.padding);
              if (sy < 0 || sx < 0 || sy >= long(x.height()) || sx >= long(x.width())) continue;
              acc += spec.weight[((o * ci + i) * k + ky) * k + kx] * x.at(i, std::size_t(sy), std::size_t(sx));
            }
        out.at(o, y, xo) = static_cast<Real>(acc);
      }
  return out;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("gsv_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace gsv::test
