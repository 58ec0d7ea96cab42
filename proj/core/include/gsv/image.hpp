#pragma once

#include <cstdint>
#include <vector>

#include "gsv/tensor.hpp"

namespace gsv {

inline constexpr std::uint8_t kIgnoreLabel = 255;

/// 8-bit interleaved RGB raster.
struct RgbImage {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> rgb;

  RgbImage() = default;
  RgbImage(std::size_t h, std::size_t w) : height(h), width(w), rgb(h * w * 3, 0) {}
};

/// Per-pixel class index; 255 marks pixels excluded from evaluation.
struct LabelMap {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<std::uint8_t> labels;

  LabelMap() = default;
  LabelMap(std::size_t h, std::size_t w, std::uint8_t fill = 0) : height(h), width(w), labels(h * w, fill) {}
  std::uint8_t at(std::size_t y, std::size_t x) const { return labels[y * width + x]; }
  std::uint8_t& at(std::size_t y, std::size_t x) { return labels[y * width + x]; }
  bool operator==(const LabelMap&) const = default;
};

/// 3 x H x W tensor with channel values in [0, 1].
Tensor to_tensor(const RgbImage& img);
RgbImage crop(const RgbImage& img, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w);
LabelMap crop(const LabelMap& map, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w);
Tensor crop(const Tensor& t, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w);

/// Per-pixel argmax over channels; ties resolve to the lowest index.
LabelMap argmax_labels(const Tensor& scores);

/// Samples the label at the center of each `factor` x `factor` block.
LabelMap downsample_labels(const LabelMap& map, std::size_t factor);

/// Block-averaged one-hot encoding: C x (H / factor) x (W / factor)
/// probabilities. Ignore pixels contribute nothing; an all-ignore block
/// becomes uniform.
Tensor label_probabilities(const LabelMap& map, std::size_t classes, std::size_t factor);

}  // namespace gsv
