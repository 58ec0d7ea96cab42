#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "gsv/ops.hpp"
#include "test_support.hpp"

using namespace gsv;
using gsv::test::conv_oracle;
using gsv::test::random_tensor;

namespace {

ConvSpec random_conv(std::size_t in, std::size_t out, std::size_t k, ConvGeometry g, bool bias, std::uint64_t seed) {
  ConvSpec spec = make_conv(in, out, k, g, bias);
  spec.weight = random_tensor(spec.weight.shape(), seed);
  if (bias) spec.bias = random_tensor(spec.bias.shape(), seed + 1);
  return spec;
}

}  // namespace

TEST(ConvOutputExtent, MatchesFormula) {
  EXPECT_EQ(conv_output_extent(12, 3, {1, 1, 1}), 12u);
  EXPECT_EQ(conv_output_extent(12, 3, {2, 1, 1}), 6u);
  EXPECT_EQ(conv_output_extent(11, 3, {2, 1, 1}), 6u);
  EXPECT_EQ(conv_output_extent(12, 3, {1, 4, 4}), 12u);
  EXPECT_EQ(conv_output_extent(5, 3, {1, 1, 0}), 3u);
  EXPECT_THROW(conv_output_extent(2, 3, {1, 2, 0}), std::invalid_argument);
  EXPECT_THROW(conv_output_extent(8, 3, {0, 1, 1}), std::invalid_argument);
}

struct ConvCase {
  std::size_t in, out, k, h, w;
  ConvGeometry g;
  bool bias;
};

class ConvOracleTest : public ::testing::TestWithParam<ConvCase> {};

TEST_P(ConvOracleTest, MatchesDirectLoops) {
  const ConvCase c = GetParam();
  const ConvSpec spec = random_conv(c.in, c.out, c.k, c.g, c.bias, 11);
  const Tensor x = random_tensor(chw(c.in, c.h, c.w), 5);
  const Tensor got = conv2d(x, spec);
  const Tensor want = conv_oracle(x, spec);
  ASSERT_EQ(got.shape(), want.shape());
  EXPECT_LT(max_abs_diff(got, want), 1e-12);
}

INSTANTIATE_TEST_SUITE_P(Geometries, ConvOracleTest,
                         ::testing::Values(ConvCase{3, 4, 3, 9, 7, {1, 1, 1}, true},
                                           ConvCase{2, 3, 3, 10, 10, {2, 1, 1}, true},
                                           ConvCase{4, 2, 3, 12, 12, {1, 2, 2}, false},
                                           ConvCase{4, 4, 3, 17, 17, {1, 8, 8}, true},
                                           ConvCase{5, 3, 1, 6, 8, {1, 1, 0}, true},
                                           ConvCase{3, 2, 5, 9, 9, {1, 1, 2}, false},
                                           ConvCase{6, 4, 3, 24, 24, {2, 1, 1}, true}));

TEST(Conv2d, IsLinearWithoutBias) {
  const ConvSpec spec = random_conv(3, 2, 3, {1, 1, 1}, false, 2);
  const Tensor a = random_tensor(chw(3, 6, 6), 3), b = random_tensor(chw(3, 6, 6), 4);
  Tensor mix(a.shape());
  for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = 2 * a[i] - 3 * b[i];
  const Tensor ya = conv2d(a, spec), yb = conv2d(b, spec), ym = conv2d(mix, spec);
  for (std::size_t i = 0; i < ym.size(); ++i) EXPECT_NEAR(ym[i], 2 * ya[i] - 3 * yb[i], 1e-12);
}

TEST(Conv2d, ImpulseKernelShiftsInput) {
  ConvSpec spec = make_conv(1, 1, 3, {1, 1, 1}, false);
  spec.weight.at(0, 0, 2) = 1;  // tap (ky=0, kx=2) reads (y-1, x+1)
  const Tensor x = random_tensor(chw(1, 5, 5), 9);
  const Tensor y = conv2d(x, spec);
  for (std::size_t r = 0; r < 5; ++r)
    for (std::size_t c = 0; c < 5; ++c) {
      const bool inside = r >= 1 && c + 1 < 5;
      EXPECT_EQ(y.at(0, r, c), inside ? x.at(0, r - 1, c + 1) : Real(0));
    }
}

TEST(Conv2d, RejectsChannelMismatch) {
  const ConvSpec spec = make_conv(3, 2, 3, {1, 1, 1});
  EXPECT_THROW(conv2d(Tensor(chw(2, 4, 4)), spec), std::invalid_argument);
}

TEST(BilinearResize, SameSizeIsIdentity) {
  const Tensor x = random_tensor(chw(2, 5, 7), 1);
  EXPECT_TRUE(bilinear_resize(x, 5, 7).identical(x));
}

TEST(BilinearResize, UpsamplingReproducesLinearRampInInterior) {
  Tensor x(chw(1, 4, 4));
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t c = 0; c < 4; ++c) x.at(0, y, c) = Real(c);
  const Tensor up = bilinear_resize(x, 8, 8);
  // Output column j samples source column (j + 0.5) / 2 - 0.5, clamped to [0, 3].
  for (std::size_t j = 0; j < 8; ++j) {
    const double src = std::clamp((j + 0.5) / 2.0 - 0.5, 0.0, 3.0);
    EXPECT_NEAR(up.at(0, 3, j), src, 1e-12) << j;
  }
}

TEST(BilinearResize, DownsamplingByTwoAveragesPairs) {
  const Tensor x = random_tensor(chw(1, 4, 4), 2);
  const Tensor d = bilinear_resize(x, 2, 2);
  for (std::size_t y = 0; y < 2; ++y)
    for (std::size_t c = 0; c < 2; ++c) {
      const Real want = (x.at(0, 2 * y, 2 * c) + x.at(0, 2 * y, 2 * c + 1) + x.at(0, 2 * y + 1, 2 * c) +
                         x.at(0, 2 * y + 1, 2 * c + 1)) / 4;
      EXPECT_NEAR(d.at(0, y, c), want, 1e-12);
    }
}

TEST(BilinearResize, ConstantStaysConstant) {
  const Tensor x(chw(3, 5, 6), Real(0.375));
  const Tensor r = bilinear_resize(x, 11, 3);
  for (Real v : r.data()) EXPECT_EQ(v, Real(0.375));
}

TEST(Softmax, ClosedFormAndShiftInvariance) {
  Tensor x(chw(3, 1, 1), std::vector<Real>{1, 2, 3});
  const Tensor s = softmax_channels(x);
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  EXPECT_NEAR(s[0], std::exp(1.0) / z, 1e-15);
  EXPECT_NEAR(s[2], std::exp(3.0) / z, 1e-15);
  Tensor shifted = x;
  for (Real& v : shifted.data()) v += 1000;
  const Tensor t = softmax_channels(shifted);
  EXPECT_TRUE(t.all_finite());
  EXPECT_LT(max_abs_diff(s, t), 1e-12);
}

TEST(Softmax, IsProbabilityMap) {
  EXPECT_TRUE(is_probability_map(softmax_channels(random_tensor(chw(5, 4, 3), 8, -20, 20)), 1e-12));
}

TEST(ReplicatePad, CopiesBorderValues) {
  Tensor x(chw(1, 2, 2), std::vector<Real>{1, 2, 3, 4});
  const Tensor p = replicate_pad(x, 2);
  ASSERT_EQ(p.shape(), chw(1, 6, 6));
  EXPECT_EQ(p.at(0, 0, 0), 1);
  EXPECT_EQ(p.at(0, 0, 5), 2);
  EXPECT_EQ(p.at(0, 5, 0), 3);
  EXPECT_EQ(p.at(0, 5, 5), 4);
  EXPECT_EQ(p.at(0, 2, 3), 2);
  EXPECT_EQ(p.at(0, 3, 1), 3);
}

TEST(ConcatChannels, StacksInOrder) {
  const Tensor a = random_tensor(chw(2, 3, 3), 1), b = random_tensor(chw(1, 3, 3), 2);
  const Tensor c = concat_channels(std::vector<const Tensor*>{&a, &b});
  ASSERT_EQ(c.channels(), 3u);
  for (std::size_t i = 0; i < 9; ++i) {
    EXPECT_EQ(c[i], a[i]);
    EXPECT_EQ(c[18 + i], b[i]);
  }
}

TEST(TensorBasics, SumMaxAbsAndIdentical) {
  Tensor t(chw(1, 1, 3), std::vector<Real>{1, -5, 2});
  EXPECT_EQ(t.sum(), -2);
  EXPECT_EQ(t.max_abs(), 5);
  Tensor u = t;
  EXPECT_TRUE(t.identical(u));
  u[1] = -5.0000001;
  EXPECT_FALSE(t.identical(u));
  EXPECT_THROW(max_abs_diff(t, Tensor(chw(1, 3, 1))), std::invalid_argument);
}

TEST(TensorBasics, ProbabilityMapCheck) {
  Tensor t(chw(2, 1, 1), std::vector<Real>{0.25, 0.75});
  EXPECT_TRUE(is_probability_map(t, 1e-12));
  t[1] = 0.8;
  EXPECT_FALSE(is_probability_map(t, 1e-6));
  t[0] = -0.01;
  t[1] = 1.01;
  EXPECT_FALSE(is_probability_map(t, 1e-1));
}
