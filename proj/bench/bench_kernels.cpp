// Serial reference vs OpenMP conv kernels on decoder-sized layers.
#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "vseg/kernels.hpp"

namespace {

using vseg::kernels::ConvGeometry;

struct Fixture {
  ConvGeometry g;
  std::vector<float> in, w, bias, out, gout, gin, gw;

  explicit Fixture(std::size_t channels, std::size_t side) {
    g.batch = 2;
    g.cin = channels;
    g.cout = channels;
    g.in = {side, side, side / 2};
    g.kernel = {3, 3, 3};
    g.pad = {1, 1, 1};
    g.resolve();
    std::mt19937 rng(3);
    std::normal_distribution<float> n(0.0f, 1.0f);
    auto fill = [&](std::vector<float>& v, std::size_t size) {
      v.resize(size);
      for (auto& x : v) x = n(rng);
    };
    fill(in, g.input_size());
    fill(w, g.weight_size());
    fill(bias, g.cout);
    fill(gout, g.output_size());
    out.resize(g.output_size());
    gin.resize(g.input_size());
    gw.resize(g.weight_size());
  }
};

template <bool Parallel>
void BM_ConvForward(benchmark::State& state) {
  Fixture f(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) {
    if constexpr (Parallel)
      vseg::kernels::conv3d_forward<float>(f.g, f.in, f.w, f.bias, f.out);
    else
      vseg::kernels::reference::conv3d_forward<float>(f.g, f.in, f.w, f.bias, f.out);
    benchmark::DoNotOptimize(f.out.data());
  }
}

template <bool Parallel>
void BM_ConvBackwardInput(benchmark::State& state) {
  Fixture f(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) {
    if constexpr (Parallel)
      vseg::kernels::conv3d_backward_input<float>(f.g, f.gout, f.w, f.gin);
    else
      vseg::kernels::reference::conv3d_backward_input<float>(f.g, f.gout, f.w, f.gin);
    benchmark::DoNotOptimize(f.gin.data());
  }
}

template <bool Parallel>
void BM_ConvBackwardWeight(benchmark::State& state) {
  Fixture f(static_cast<std::size_t>(state.range(0)), static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) {
    if constexpr (Parallel)
      vseg::kernels::conv3d_backward_weight<float>(f.g, f.in, f.gout, f.gw);
    else
      vseg::kernels::reference::conv3d_backward_weight<float>(f.g, f.in, f.gout, f.gw);
    benchmark::DoNotOptimize(f.gw.data());
  }
}

void sizes(benchmark::internal::Benchmark* b) {
  b->Args({8, 16})->Args({16, 16})->Args({8, 32})->Unit(benchmark::kMillisecond);
}

}  // namespace

BENCHMARK(BM_ConvForward<false>)->Name("conv_forward/reference")->Apply(sizes);
BENCHMARK(BM_ConvForward<true>)->Name("conv_forward/openmp")->Apply(sizes);
BENCHMARK(BM_ConvBackwardInput<false>)->Name("conv_backward_input/reference")->Apply(sizes);
BENCHMARK(BM_ConvBackwardInput<true>)->Name("conv_backward_input/openmp")->Apply(sizes);
BENCHMARK(BM_ConvBackwardWeight<false>)->Name("conv_backward_weight/reference")->Apply(sizes);
BENCHMARK(BM_ConvBackwardWeight<true>)->Name("conv_backward_weight/openmp")->Apply(sizes);

BENCHMARK_MAIN();
