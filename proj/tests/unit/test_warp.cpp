#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "gsv/warp.hpp"
#include "test_support.hpp"

using namespace gsv;
using gsv::test::random_probabilities;
using gsv::test::random_tensor;

namespace {

Tensor constant_flow(std::size_t h, std::size_t w, Real fx, Real fy) {
  Tensor f(chw(2, h, w));
  for (std::size_t p = 0; p < h * w; ++p) {
    f[p] = fx;
    f[h * w + p] = fy;
  }
  return f;
}

// Bilinear sample at a clamped real-valued source position.
Real sample(const Tensor& t, std::size_t c, double y, double x) {
  const double maxy = double(t.height() - 1), maxx = double(t.width() - 1);
  y = std::clamp(y, 0.0, maxy);
  x = std::clamp(x, 0.0, maxx);
  const auto y0 = std::size_t(std::floor(y)), x0 = std::size_t(std::floor(x));
  const std::size_t y1 = std::min<std::size_t>(y0 + 1, t.height() - 1), x1 = std::min<std::size_t>(x0 + 1, t.width() - 1);
  const double ay = y - double(y0), ax = x - double(x0);
  return Real((1 - ay) * ((1 - ax) * t.at(c, y0, x0) + ax * t.at(c, y0, x1)) +
              ay * ((1 - ax) * t.at(c, y1, x0) + ax * t.at(c, y1, x1)));
}

}  // namespace

TEST(Warp, ZeroFlowIsBitIdentity) {
  const Tensor prev = random_probabilities(4, 6, 7, 1);
  EXPECT_TRUE(warp_bilinear(prev, Tensor(chw(2, 6, 7))).identical(prev));
}

TEST(Warp, IntegerFlowIsIndexPermutation) {
  const Tensor prev = random_tensor(chw(3, 6, 6), 2);
  for (int fx = -2; fx <= 2; ++fx)
    for (int fy = -2; fy <= 2; ++fy) {
      const Tensor out = warp_bilinear(prev, constant_flow(6, 6, Real(fx), Real(fy)));
      for (std::size_t c = 0; c < 3; ++c)
        for (int y = 0; y < 6; ++y)
          for (int x = 0; x < 6; ++x) {
            const int sy = std::clamp(y + fy, 0, 5), sx = std::clamp(x + fx, 0, 5);
            ASSERT_EQ(out.at(c, std::size_t(y), std::size_t(x)), prev.at(c, std::size_t(sy), std::size_t(sx)))
                << fx << "," << fy;
          }
    }
}

TEST(Warp, FractionalFlowMatchesBilinearOracle) {
  const Tensor prev = random_tensor(chw(2, 5, 6), 3);
  const Tensor flow = random_tensor(chw(2, 5, 6), 4, -2.5, 2.5);
  const Tensor out = warp_bilinear(prev, flow);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t y = 0; y < 5; ++y)
      for (std::size_t x = 0; x < 6; ++x) {
        const double sy = double(y) + flow.at(1, y, x), sx = double(x) + flow.at(0, y, x);
        EXPECT_NEAR(out.at(c, y, x), sample(prev, c, sy, sx), 1e-12);
      }
}

TEST(Warp, HalfPixelShiftAveragesNeighbours) {
  Tensor prev(chw(1, 1, 3), std::vector<Real>{0, 1, 4});
  const Tensor out = warp_bilinear(prev, constant_flow(1, 3, Real(0.5), 0));
  EXPECT_NEAR(out[0], 0.5, 1e-15);
  EXPECT_NEAR(out[1], 2.5, 1e-15);
  EXPECT_NEAR(out[2], 4.0, 1e-15);
}

TEST(Warp, PreservesProbabilityMaps) {
  const Tensor prev = random_probabilities(4, 8, 8, 5);
  const Tensor out = warp_bilinear(prev, random_tensor(chw(2, 8, 8), 6, -3, 3));
  EXPECT_TRUE(is_probability_map(out, 1e-12));
}

TEST(Warp, ConstantMapIsInvariant) {
  const Tensor prev(chw(2, 4, 4), Real(0.5));
  const Tensor out = warp_bilinear(prev, random_tensor(chw(2, 4, 4), 7, -9, 9));
  for (Real v : out.data()) EXPECT_NEAR(v, 0.5, 1e-15);
}

TEST(Warp, RejectsMismatchedFlow) {
  EXPECT_THROW(warp_bilinear(Tensor(chw(2, 4, 4)), Tensor(chw(2, 4, 5))), std::invalid_argument);
  EXPECT_THROW(warp_bilinear(Tensor(chw(2, 4, 4)), Tensor(chw(1, 4, 4))), std::invalid_argument);
}

TEST(WarpGrad, MatchesFiniteDifferences) {
  const Tensor prev = random_tensor(chw(2, 5, 5), 8);
  Tensor flow = random_tensor(chw(2, 5, 5), 9, -1.2, 1.2);
  // Keep every sample away from integer coordinates where the bilinear weights kink.
  for (Real& v : flow.data()) {
    const double f = v - std::floor(v);
    if (f < 0.15 || f > 0.85) v += Real(0.5);
  }
  const Tensor up = random_tensor(chw(2, 5, 5), 10);
  const WarpGrad g = warp_grad(prev, flow, up);
  auto loss = [&](const Tensor& p, const Tensor& f) {
    const Tensor o = warp_bilinear(p, f);
    double s = 0;
    for (std::size_t i = 0; i < o.size(); ++i) s += o[i] * up[i];
    return s;
  };
  const double eps = 1e-6;
  for (std::size_t i = 0; i < prev.size(); ++i) {
    Tensor a = prev, b = prev;
    a[i] += eps;
    b[i] -= eps;
    EXPECT_NEAR(g.d_prev[i], (loss(a, flow) - loss(b, flow)) / (2 * eps), 1e-7);
  }
  for (std::size_t i = 0; i < flow.size(); ++i) {
    Tensor a = flow, b = flow;
    a[i] += eps;
    b[i] -= eps;
    EXPECT_NEAR(g.d_flow[i], (loss(prev, a) - loss(prev, b)) / (2 * eps), 1e-6);
  }
}

TEST(WarpGrad, ClampedComponentGetsNoGradient) {
  const Tensor prev = random_tensor(chw(1, 4, 4), 11);
  const Tensor flow = constant_flow(4, 4, Real(10.5), Real(0.25));
  const WarpGrad g = warp_grad(prev, flow, Tensor(chw(1, 4, 4), Real(1)));
  for (std::size_t p = 0; p < 16; ++p) EXPECT_EQ(g.d_flow[p], 0);
}

TEST(WarpVar, AgreesWithPlainWarp) {
  const Tensor prev = random_probabilities(3, 4, 4, 12);
  const Tensor flow = random_tensor(chw(2, 4, 4), 13, -1, 1);
  EXPECT_TRUE(warp(Var::view(prev), Var::view(flow)).value().identical(warp_bilinear(prev, flow)));
  const SegTensor s = warp_segmentation(SegTensor{prev}, FlowField{flow});
  EXPECT_TRUE(s.scores.identical(warp_bilinear(prev, flow)));
}
