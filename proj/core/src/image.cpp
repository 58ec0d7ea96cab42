#include "gsv/image.hpp"

#include <stdexcept>
#include <string>

namespace gsv {

namespace {

void check_crop(std::size_t H, std::size_t W, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) {
  if (y0 + h > H || x0 + w > W) {
    throw std::invalid_argument("crop " + std::to_string(h) + "x" + std::to_string(w) + " at (" +
                                std::to_string(y0) + "," + std::to_string(x0) + ") exceeds " + std::to_string(H) +
                                "x" + std::to_string(W));
  }
}

}  // namespace

Tensor to_tensor(const RgbImage& img) {
  Tensor t(chw(3, img.height, img.width));
  const std::size_t plane = img.height * img.width;
  for (std::size_t p = 0; p < plane; ++p) {
    for (std::size_t c = 0; c < 3; ++c) t[c * plane + p] = static_cast<Real>(img.rgb[p * 3 + c]) / Real(255);
  }
  return t;
}

RgbImage crop(const RgbImage& img, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) {
  check_crop(img.height, img.width, y0, x0, h, w);
  RgbImage out(h, w);
  for (std::size_t y = 0; y < h; ++y) {
    const auto* src = img.rgb.data() + ((y0 + y) * img.width + x0) * 3;
    std::copy(src, src + w * 3, out.rgb.data() + y * w * 3);
  }
  return out;
}

LabelMap crop(const LabelMap& map, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) {
  check_crop(map.height, map.width, y0, x0, h, w);
  LabelMap out(h, w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) out.at(y, x) = map.at(y0 + y, x0 + x);
  }
  return out;
}

Tensor crop(const Tensor& t, std::size_t y0, std::size_t x0, std::size_t h, std::size_t w) {
  check_crop(t.height(), t.width(), y0, x0, h, w);
  Tensor out(chw(t.channels(), h, w));
  for (std::size_t c = 0; c < t.channels(); ++c) {
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) out.at(c, y, x) = t.at(c, y0 + y, x0 + x);
    }
  }
  return out;
}

LabelMap argmax_labels(const Tensor& scores) {
  const std::size_t plane = scores.shape().plane();
  LabelMap out(scores.height(), scores.width());
  for (std::size_t p = 0; p < plane; ++p) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < scores.channels(); ++c) {
      if (scores[c * plane + p] > scores[best * plane + p]) best = c;
    }
    out.labels[p] = static_cast<std::uint8_t>(best);
  }
  return out;
}

LabelMap downsample_labels(const LabelMap& map, std::size_t factor) {
  const std::size_t h = map.height / factor, w = map.width / factor;
  LabelMap out(h, w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) out.at(y, x) = map.at(y * factor + factor / 2, x * factor + factor / 2);
  }
  return out;
}

Tensor label_probabilities(const LabelMap& map, std::size_t classes, std::size_t factor) {
  const std::size_t h = map.height / factor, w = map.width / factor;
  Tensor out(chw(classes, h, w));
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      std::size_t counted = 0;
      for (std::size_t dy = 0; dy < factor; ++dy) {
        for (std::size_t dx = 0; dx < factor; ++dx) {
          const std::uint8_t l = map.at(y * factor + dy, x * factor + dx);
          if (l == kIgnoreLabel) continue;
          if (l >= classes) {
            throw std::invalid_argument("label " + std::to_string(l) + " at (" + std::to_string(y * factor + dy) +
                                        "," + std::to_string(x * factor + dx) + ") exceeds class count " +
                                        std::to_string(classes));
          }
          out.at(l, y, x) += Real(1);
          ++counted;
        }
      }
      for (std::size_t c = 0; c < classes; ++c) {
        out.at(c, y, x) = counted ? out.at(c, y, x) / static_cast<Real>(counted) : Real(1) / static_cast<Real>(classes);
      }
    }
  }
  return out;
}

}  // namespace gsv
