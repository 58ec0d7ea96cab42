#include "gsv/flow_net.hpp"

#include <stdexcept>

namespace gsv {

FlowNetParams make_flow_net(std::size_t width, Rng& rng) {
  FlowNetParams p;
  p.stem[0] = make_conv(6, width, 3, {2, 1, 1});
  p.stem[1] = make_conv(width, width, 3, {2, 1, 1});
  for (std::size_t i = 0; i < 4; ++i) {
    const std::size_t d = kHffbDilations[i];
    p.hffb[i] = make_conv(width, width, 3, {1, d, d});
  }
  p.head = make_conv(width, 2, 3, {1, 1, 1});
  for (auto& c : p.stem) init_fan_in(c, rng);
  for (auto& c : p.hffb) init_fan_in(c, rng);
  init_zero(p.head);
  return p;
}

ParamList FlowNetParams::parameters(const std::string& prefix) {
  ParamList out;
  for (std::size_t i = 0; i < stem.size(); ++i) append_conv_params(stem[i], prefix + ".stem" + std::to_string(i), out);
  for (std::size_t i = 0; i < hffb.size(); ++i) append_conv_params(hffb[i], prefix + ".hffb" + std::to_string(i), out);
  append_conv_params(head, prefix + ".head", out);
  return out;
}

Var estimate_flow(const FlowNetParams& params, const ParamBinder& bind, const Var& frame_prev,
                  const Var& frame_cur, std::size_t out_h, std::size_t out_w) {
  const Shape& a = frame_prev.shape();
  const Shape& b = frame_cur.shape();
  if (!(a == b) || a.channels != 3 || a.height % 4 != 0 || a.width % 4 != 0 || a.height == 0 || a.width == 0) {
    throw std::invalid_argument("estimate_flow: frames must be equal 3 x H x W with H, W divisible by 4, got " +
                                a.str() + " and " + b.str());
  }
  Var x = concat_channels({standardize_frame(frame_prev), standardize_frame(frame_cur)});
  for (const auto& conv : params.stem) x = relu(conv2d(x, conv, bind));

  std::array<Var, 4> d;
  for (std::size_t i = 0; i < 4; ++i) d[i] = relu(conv2d(x, params.hffb[i], bind));
  Var s1 = add(d[0], d[1]);
  Var s2 = add(s1, d[2]);
  Var s3 = add(s2, d[3]);
  Var fused = scale(add(add(s1, s2), s3), Real(1) / Real(3));

  Var raw = conv2d(fused, params.head, bind);
  if (raw.shape().height == out_h && raw.shape().width == out_w) return raw;
  return bilinear_resize(raw, out_h, out_w);
}

FlowField estimate_flow(const FlowNetParams& params, const Tensor& frame_prev, const Tensor& frame_cur,
                        std::size_t out_h, std::size_t out_w) {
  Var v = estimate_flow(params, ParamBinder{}, Var::view(frame_prev), Var::view(frame_cur), out_h, out_w);
  return FlowField{v.value()};
}

}  // namespace gsv
