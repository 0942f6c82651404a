#include <benchmark/benchmark.h>

#include <random>

#include "revprop/engine.hpp"
#include "revprop/network.hpp"
#include "revprop/ops.hpp"
#include "revprop/reversible.hpp"

namespace revprop {
namespace {

Tensor<double> noise(const Shape& s, std::uint64_t seed) {
  Tensor<double> t(s, MemoryKind::untracked);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd;
  for (auto& v : t.data()) v = nd(rng);
  return t;
}

// args: channels, extent
void BM_Conv3dForward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto e = static_cast<std::size_t>(state.range(1));
  ConvKernel<double> k(c, c, 3, 1);
  std::mt19937_64 rng(1);
  he_initialize(k, rng);
  const auto x = noise(Shape{c, e, e, e}, 2);
  for (auto _ : state) benchmark::DoNotOptimize(conv3d_forward(x, k));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(x.size()));
}
BENCHMARK(BM_Conv3dForward)->Args({8, 11})->Args({50, 11})->Unit(benchmark::kMillisecond);

void BM_Conv3dBackward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  const auto e = static_cast<std::size_t>(state.range(1));
  ConvKernel<double> k(c, c, 3, 1);
  std::mt19937_64 rng(1);
  he_initialize(k, rng);
  const auto x = noise(Shape{c, e, e, e}, 2);
  const auto g = noise(Shape{c, e, e, e}, 3);
  for (auto _ : state) benchmark::DoNotOptimize(conv3d_backward(x, k, g));
}
BENCHMARK(BM_Conv3dBackward)->Args({8, 11})->Args({50, 11})->Unit(benchmark::kMillisecond);

void BM_RevNetForward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  RevNetBlock<double> b(c);
  std::mt19937_64 rng(4);
  for (auto* fn : {&b.f1, &b.f2})
    for (auto* k : {&fn->reduce, &fn->core, &fn->expand}) he_initialize(*k, rng);
  const auto x = noise(Shape{c, 9, 9, 9}, 5);
  for (auto _ : state) benchmark::DoNotOptimize(revnet_forward(b, x));
}
BENCHMARK(BM_RevNetForward)->Arg(8)->Arg(50)->Unit(benchmark::kMillisecond);

void BM_RevNetBackward(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  RevNetBlock<double> b(c);
  std::mt19937_64 rng(4);
  for (auto* fn : {&b.f1, &b.f2})
    for (auto* k : {&fn->reduce, &fn->core, &fn->expand}) he_initialize(*k, rng);
  const auto y = revnet_forward(b, noise(Shape{c, 9, 9, 9}, 5));
  const auto g = noise(y.shape(), 6);
  for (auto _ : state) benchmark::DoNotOptimize(revnet_backward(b, y, g, nullptr));
}
BENCHMARK(BM_RevNetBackward)->Arg(8)->Arg(50)->Unit(benchmark::kMillisecond);

// args: mode (0 naive, 1 efficient), blocks per stack
void BM_TrainingStep(benchmark::State& state) {
  NetworkSpec spec;
  spec.layers = NetworkSpec::espcn_layers(6, 2, {8, 8});
  spec.blocks_per_stack = static_cast<std::size_t>(state.range(1));
  const auto mode = state.range(0) == 0 ? BackpropMode::naive : BackpropMode::efficient;
  const auto params = build<double>(spec, 1);
  const auto x = noise(Shape{6, 11, 11, 11}, 7);
  const auto t = noise(spec.output_shape(x.shape()), 8);
  std::int64_t peak = 0;
  for (auto _ : state) peak = profile_step(params, spec, x, t, mode).peak_elements;
  state.counters["peak_elements"] = static_cast<double>(peak);
}
BENCHMARK(BM_TrainingStep)
    ->ArgsProduct({{0, 1}, {0, 2, 4, 8}})
    ->ArgNames({"efficient", "blocks"})
    ->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace revprop

BENCHMARK_MAIN();
