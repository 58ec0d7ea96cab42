#include <benchmark/benchmark.h>

#include <random>

#include "gsv/guided_fusion.hpp"
#include "gsv/spatial.hpp"
#include "gsv/warp.hpp"

using namespace gsv;

namespace {

Tensor uniform(Shape s, std::uint64_t seed, double lo = -1, double hi = 1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(s);
  for (Real& v : t.data()) v = static_cast<Real>(u(rng));
  return t;
}

void BM_Conv3x3(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto hw = static_cast<std::size_t>(state.range(1));
  ConvSpec spec = make_conv(n, n, 3, {1, 1, 1});
  spec.weight = uniform(spec.weight.shape(), 1);
  const Tensor x = uniform(chw(n, hw, hw), 2);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, spec));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * 9 * hw * hw));
}
BENCHMARK(BM_Conv3x3)->Args({32, 24})->Args({32, 48})->Args({24, 96});

void BM_DilatedConv(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  ConvSpec spec = make_conv(32, 32, 3, {1, d, d});
  spec.weight = uniform(spec.weight.shape(), 1);
  const Tensor x = uniform(chw(32, 12, 12), 2);
  for (auto _ : state) benchmark::DoNotOptimize(conv2d(x, spec));
}
BENCHMARK(BM_DilatedConv)->Arg(1)->Arg(8);

void BM_Warp(benchmark::State& state) {
  const auto hw = static_cast<std::size_t>(state.range(0));
  const Tensor seg = uniform(chw(4, hw, hw), 3, 0, 1);
  const Tensor flow = uniform(chw(2, hw, hw), 4, -3, 3);
  for (auto _ : state) benchmark::DoNotOptimize(warp_bilinear(seg, flow));
}
BENCHMARK(BM_Warp)->Arg(12)->Arg(128);

void BM_SpatialShifts(benchmark::State& state) {
  const KernelBank bank = make_bank(static_cast<std::size_t>(state.range(0)));
  const SegTensor seg{uniform(chw(4, 12, 12), 5, 0, 1)};
  for (auto _ : state) benchmark::DoNotOptimize(propagate_spatial(seg, bank));
}
BENCHMARK(BM_SpatialShifts)->Arg(3)->Arg(5);

void BM_Fuse(benchmark::State& state) {
  const Tensor cand = uniform(chw(9 * 4, 12, 12), 6, 0, 1);
  const Tensor intra = uniform(chw(4, 12, 12), 7, 0, 1);
  const Tensor wts = uniform(chw(10, 12, 12), 8, 0, 0.2);
  for (auto _ : state) benchmark::DoNotOptimize(renormalize(fuse(cand, intra, wts)));
}
BENCHMARK(BM_Fuse);

}  // namespace
