#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "gsv/spatial.hpp"
#include "test_support.hpp"

using namespace gsv;
using gsv::test::random_probabilities;
using gsv::test::random_tensor;

namespace {

// Candidate d of class c via the generic conv2d on the replicate-padded map.
Tensor conv_candidate(const Tensor& seg, const KernelBank& bank, std::size_t d) {
  const std::size_t k = bank.kernel_size, r = bank.radius();
  const Tensor padded = replicate_pad(seg, r);
  Tensor out(seg.shape());
  for (std::size_t c = 0; c < seg.channels(); ++c) {
    Tensor plane(chw(1, padded.height(), padded.width()));
    std::copy(padded.channel(c).begin(), padded.channel(c).end(), plane.data().begin());
    ConvSpec spec = make_conv(1, 1, k, {1, 1, 0}, false);
    std::copy(bank.kernels.raw() + d * k * k, bank.kernels.raw() + (d + 1) * k * k, spec.weight.data().begin());
    const Tensor y = conv2d(plane, spec);
    std::copy(y.data().begin(), y.data().end(), out.channel(c).begin());
  }
  return out;
}

}  // namespace

TEST(DefaultOffsets, CountsAndIdentityFirst) {
  EXPECT_EQ(default_offsets(1).size(), 1u);
  EXPECT_EQ(default_offsets(3).size(), 9u);
  EXPECT_EQ(default_offsets(5).size(), 17u);
  for (std::size_t k : {1u, 3u, 5u}) EXPECT_EQ(default_offsets(k).front(), (Offset{0, 0}));
  const auto k5 = default_offsets(5);
  std::set<std::pair<int, int>> seen;
  for (auto o : k5) seen.insert({o.dx, o.dy});
  EXPECT_EQ(seen.size(), 17u);
  EXPECT_TRUE(seen.count({2, -2}) && seen.count({0, 2}) && seen.count({-2, 0}));
  EXPECT_FALSE(seen.count({2, 1}));
}

TEST(MakeBank, RejectsInvalidConfigurations) {
  EXPECT_THROW(make_bank(4), std::invalid_argument);
  EXPECT_THROW(make_bank(0), std::invalid_argument);
  EXPECT_THROW(make_bank(3, std::vector<Offset>{{0, 0}, {0, 0}}), std::invalid_argument);
  EXPECT_THROW(make_bank(3, std::vector<Offset>{{2, 0}}), std::invalid_argument);
  EXPECT_THROW(make_bank(3, std::vector<Offset>{}), std::invalid_argument);
}

TEST(MakeBank, KernelsAreUnitImpulses) {
  const KernelBank bank = make_bank(5);
  ASSERT_EQ(bank.kernels.shape(), (Shape{17, 1, 5, 5}));
  for (std::size_t d = 0; d < bank.size(); ++d) {
    Real s = 0;
    for (std::size_t i = 0; i < 25; ++i) s += bank.kernels[d * 25 + i];
    EXPECT_EQ(s, 1);
    const auto o = bank.offsets[d];
    EXPECT_EQ(bank.kernels[d * 25 + std::size_t(2 + o.dy) * 5 + std::size_t(2 + o.dx)], 1);
  }
}

class ShiftExactness : public ::testing::TestWithParam<std::size_t> {};

TEST_P(ShiftExactness, IndexShiftBitEqualsConv2d) {
  const std::size_t k = GetParam();
  const KernelBank bank = make_bank(k);
  const Tensor seg = random_probabilities(4, 7, 6, 3 + k);
  const ShiftStack s = propagate_spatial(SegTensor{seg}, bank);
  ASSERT_EQ(s.count, bank.size());
  ASSERT_EQ(s.classes, 4u);
  for (std::size_t d = 0; d < bank.size(); ++d) {
    EXPECT_TRUE(s.candidate(d).identical(conv_candidate(seg, bank, d))) << "candidate " << d;
  }
}

TEST_P(ShiftExactness, LearnablePathBitEqualsShiftPathOnImpulses) {
  const std::size_t k = GetParam();
  const Tensor seg = random_probabilities(3, 6, 6, 17 + k);
  const ShiftStack fixed = propagate_spatial(SegTensor{seg}, make_bank(k));
  const ShiftStack learn = propagate_spatial(SegTensor{seg}, make_bank(k, std::nullopt, true));
  EXPECT_TRUE(fixed.candidates.identical(learn.candidates));
  const KernelBank lb = make_bank(k, std::nullopt, true);
  const Var v = propagate_spatial(Var::view(seg), lb, ParamBinder{});
  EXPECT_TRUE(v.value().identical(fixed.candidates));
}

INSTANTIATE_TEST_SUITE_P(KernelSizes, ShiftExactness, ::testing::Values(1u, 3u, 5u));

TEST(ShiftClamped, ReadsOffsetSourceWithEdgeClamp) {
  const Tensor seg = random_tensor(chw(2, 5, 4), 9);
  const Tensor s = shift_clamped(seg, Offset{1, -2});
  for (std::size_t c = 0; c < 2; ++c)
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 4; ++x)
        EXPECT_EQ(s.at(c, std::size_t(y), std::size_t(x)),
                  seg.at(c, std::size_t(std::clamp(y - 2, 0, 4)), std::size_t(std::clamp(x + 1, 0, 3))));
}

TEST(PropagateSpatial, FullK3StackSumsToBoxFilterInInterior) {
  const Tensor seg = random_tensor(chw(1, 6, 6), 21);
  const ShiftStack s = propagate_spatial(SegTensor{seg}, make_bank(3));
  for (std::size_t y = 1; y < 5; ++y)
    for (std::size_t x = 1; x < 5; ++x) {
      Real sum = 0, box = 0;
      for (std::size_t d = 0; d < 9; ++d) sum += s.candidates.at(d, y, x);
      for (std::size_t yy = y - 1; yy <= y + 1; ++yy)
        for (std::size_t xx = x - 1; xx <= x + 1; ++xx) box += seg.at(0, yy, xx);
      EXPECT_NEAR(sum, box, 1e-12);
    }
}

TEST(PropagateSpatial, EveryCandidateOfAProbabilityMapIsOne) {
  const Tensor seg = random_probabilities(4, 5, 5, 22);
  const ShiftStack s = propagate_spatial(SegTensor{seg}, make_bank(5));
  for (std::size_t d = 0; d < s.count; ++d) EXPECT_TRUE(is_probability_map(s.candidate(d), 1e-12));
}
