#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace gsv {

#ifdef GSV_REAL_FLOAT
using Real = float;
#else
using Real = double;
#endif

/// Shape of a dense value grid. Activations are (channels, height, width)
/// with `stack == 1`; convolution kernels use `stack` for output channels.
struct Shape {
  std::size_t stack = 1;
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;

  std::size_t plane() const { return height * width; }
  std::size_t elements() const { return stack * channels * height * width; }
  bool operator==(const Shape&) const = default;
  std::string str() const;
};

inline Shape chw(std::size_t c, std::size_t h, std::size_t w) { return Shape{1, c, h, w}; }

/// Dense row-major value grid. Copyable value type; once built it is only
/// read by the library, so sharing across threads is safe.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, Real fill = Real(0));
  Tensor(Shape shape, std::vector<Real> data);

  static Tensor zeros(Shape shape) { return Tensor(shape); }
  static Tensor full(Shape shape, Real v) { return Tensor(shape, v); }

  const Shape& shape() const { return shape_; }
  std::size_t channels() const { return shape_.channels; }
  std::size_t height() const { return shape_.height; }
  std::size_t width() const { return shape_.width; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<Real> data() { return data_; }
  std::span<const Real> data() const { return data_; }
  Real* raw() { return data_.data(); }
  const Real* raw() const { return data_.data(); }

  Real& operator[](std::size_t i) { return data_[i]; }
  Real operator[](std::size_t i) const { return data_[i]; }

  Real& at(std::size_t c, std::size_t y, std::size_t x) {
    return data_[(c * shape_.height + y) * shape_.width + x];
  }
  Real at(std::size_t c, std::size_t y, std::size_t x) const {
    return data_[(c * shape_.height + y) * shape_.width + x];
  }

  std::span<Real> channel(std::size_t c) {
    return std::span<Real>(data_).subspan(c * shape_.plane(), shape_.plane());
  }
  std::span<const Real> channel(std::size_t c) const {
    return std::span<const Real>(data_).subspan(c * shape_.plane(), shape_.plane());
  }

  bool all_finite() const;
  Real sum() const;
  Real max_abs() const;

  /// Bitwise equality of shape and contents.
  bool identical(const Tensor& other) const;

 private:
  Shape shape_;
  std::vector<Real> data_;
};

/// Max |a - b| over all elements; throws on shape mismatch.
Real max_abs_diff(const Tensor& a, const Tensor& b);

/// Throws std::invalid_argument naming both shapes when they differ.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

enum class SegSemantics { logits, probabilities };

/// C x H/8 x W/8 class scores.
struct SegTensor {
  Tensor scores;
  SegSemantics semantics = SegSemantics::probabilities;

  std::size_t classes() const { return scores.channels(); }
};

/// 2 x H/8 x W/8 backward motion, channel 0 = x (rightward), channel 1 = y
/// (downward), in downscaled-pixel units.
struct FlowField {
  Tensor vectors;
};

/// True when every element lies in [0,1] and per-pixel channel sums are
/// within `tol` of one.
bool is_probability_map(const Tensor& t, Real tol);

}  // namespace gsv
