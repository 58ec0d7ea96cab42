#pragma once

#include <random>
#include <string>
#include <vector>

#include "gsv/ops.hpp"

namespace gsv {

using Rng = std::mt19937_64;

/// A trainable tensor with its stable name. Weight decay applies only to
/// convolution kernels; biases and scalar gains are exempt.
struct NamedParam {
  std::string name;
  Tensor* tensor = nullptr;
  bool decay = true;
};

using ParamList = std::vector<NamedParam>;

/// Zero-mean uniform weights with bound sqrt(6 / fan_in); biases zeroed.
void init_fan_in(ConvSpec& conv, Rng& rng);
void init_zero(ConvSpec& conv);

void append_conv_params(ConvSpec& conv, const std::string& name, ParamList& out);

std::size_t element_count(const ParamList& params);

}  // namespace gsv
