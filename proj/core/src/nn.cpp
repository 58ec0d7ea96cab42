#include "gsv/nn.hpp"

#include <cmath>

namespace gsv {

void init_fan_in(ConvSpec& conv, Rng& rng) {
  const auto& s = conv.weight.shape();
  const Real fan_in = static_cast<Real>(s.channels * s.height * s.width);
  std::uniform_real_distribution<Real> dist(-std::sqrt(Real(6) / fan_in), std::sqrt(Real(6) / fan_in));
  for (Real& v : conv.weight.data()) v = dist(rng);
  for (Real& v : conv.bias.data()) v = Real(0);
}

void init_zero(ConvSpec& conv) {
  for (Real& v : conv.weight.data()) v = Real(0);
  for (Real& v : conv.bias.data()) v = Real(0);
}

void append_conv_params(ConvSpec& conv, const std::string& name, ParamList& out) {
  out.push_back({name + ".weight", &conv.weight, true});
  if (conv.has_bias()) out.push_back({name + ".bias", &conv.bias, false});
}

std::size_t element_count(const ParamList& params) {
  std::size_t n = 0;
  for (const auto& p : params) n += p.tensor->size();
  return n;
}

}  // namespace gsv
