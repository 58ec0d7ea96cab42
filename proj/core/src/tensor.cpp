#include "gsv/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>
#include <stdexcept>

namespace gsv {

std::string Shape::str() const {
  std::ostringstream os;
  if (stack != 1) os << stack << "x";
  os << channels << "x" << height << "x" << width;
  return os.str();
}

Tensor::Tensor(Shape shape, Real fill) : shape_(shape), data_(shape.elements(), fill) {}

Tensor::Tensor(Shape shape, std::vector<Real> data) : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.elements()) {
    throw std::invalid_argument("tensor data length " + std::to_string(data_.size()) +
                                " does not match shape " + shape_.str());
  }
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](Real v) { return std::isfinite(v); });
}

Real Tensor::sum() const {
  Real s = 0;
  for (Real v : data_) s += v;
  return s;
}

Real Tensor::max_abs() const {
  Real m = 0;
  for (Real v : data_) m = std::max(m, std::abs(v));
  return m;
}

bool Tensor::identical(const Tensor& other) const {
  return shape_ == other.shape_ &&
         (data_.empty() ||
          std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(Real)) == 0);
}

Real max_abs_diff(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  Real m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!(a.shape() == b.shape())) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + a.shape().str() +
                                " vs " + b.shape().str());
  }
}

bool is_probability_map(const Tensor& t, Real tol) {
  const std::size_t plane = t.shape().plane();
  for (std::size_t p = 0; p < plane; ++p) {
    Real s = 0;
    for (std::size_t c = 0; c < t.channels(); ++c) {
      const Real v = t[c * plane + p];
      if (!(v >= Real(0) && v <= Real(1))) return false;
      s += v;
    }
    if (std::abs(s - Real(1)) > tol) return false;
  }
  return true;
}

}  // namespace gsv
