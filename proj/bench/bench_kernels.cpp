// Parallel kernels against the serial reference, on shapes taken from the desk
// and default model profiles. Set OMP_NUM_THREADS to vary the thread count.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "beamwatch/numerics/kernels.hpp"

namespace {

namespace k = beamwatch::numerics::kernels;

std::vector<float> noise(std::size_t n, unsigned seed) {
  std::mt19937 gen(seed);
  std::normal_distribution<float> dist;
  std::vector<float> v(n);
  for (auto& x : v) x = dist(gen);
  return v;
}

// Arguments: batch, in_channels, height, width, out_channels.
k::Conv2dGeometry geometry(const benchmark::State& state) {
  k::Conv2dGeometry g;
  g.batch = static_cast<std::size_t>(state.range(0));
  g.in_channels = static_cast<std::size_t>(state.range(1));
  g.in_height = static_cast<std::size_t>(state.range(2));
  g.in_width = static_cast<std::size_t>(state.range(3));
  g.out_channels = static_cast<std::size_t>(state.range(4));
  g.kernel_height = g.kernel_width = 3;
  g.padding = 1;
  return g;
}

void conv_args(benchmark::internal::Benchmark* b) {
  b->Args({64, 3, 16, 48, 4})->Args({64, 4, 8, 24, 4})->Args({8, 3, 64, 64, 32})->Unit(benchmark::kMicrosecond);
}

template <bool Parallel>
void BM_ConvForward(benchmark::State& state) {
  const auto g = geometry(state);
  const auto x = noise(g.batch * g.in_channels * g.in_height * g.in_width, 1);
  const auto w = noise(g.out_channels * g.patch_size(), 2);
  std::vector<float> y(g.batch * g.out_channels * g.out_height() * g.out_width());
  for (auto _ : state) {
    if constexpr (Parallel) k::conv2d_forward<float>(g, x, w, y);
    else k::reference::conv2d_forward<float>(g, x, w, y);
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Parallel>
void BM_ConvBackward(benchmark::State& state) {
  const auto g = geometry(state);
  const auto x = noise(g.batch * g.in_channels * g.in_height * g.in_width, 1);
  const auto w = noise(g.out_channels * g.patch_size(), 2);
  const auto dy = noise(g.batch * g.out_channels * g.out_height() * g.out_width(), 3);
  std::vector<float> dx(x.size()), dw(w.size());
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::conv2d_backward_input<float>(g, w, dy, dx);
      k::conv2d_backward_kernels<float>(g, x, dy, dw);
    } else {
      k::reference::conv2d_backward_input<float>(g, w, dy, dx);
      k::reference::conv2d_backward_kernels<float>(g, x, dy, dw);
    }
    benchmark::DoNotOptimize(dx.data());
    benchmark::DoNotOptimize(dw.data());
  }
}

// Arguments: batch, in, out.
template <bool Parallel>
void BM_Dense(benchmark::State& state) {
  const auto batch = static_cast<std::size_t>(state.range(0));
  const auto in = static_cast<std::size_t>(state.range(1));
  const auto out = static_cast<std::size_t>(state.range(2));
  const auto x = noise(batch * in, 1), w = noise(out * in, 2), bias = noise(out, 3);
  std::vector<float> y(batch * out);
  for (auto _ : state) {
    if constexpr (Parallel) k::dense_forward<float>(batch, in, out, x, w, bias, y);
    else k::reference::dense_forward<float>(batch, in, out, x, w, bias, y);
    benchmark::DoNotOptimize(y.data());
  }
}

// Arguments: planes, height, width.
template <bool Parallel>
void BM_MaxPool(benchmark::State& state) {
  k::PoolGeometry g;
  g.planes = static_cast<std::size_t>(state.range(0));
  g.in_height = static_cast<std::size_t>(state.range(1));
  g.in_width = static_cast<std::size_t>(state.range(2));
  g.window = 2;
  g.stride = 2;
  const auto x = noise(g.planes * g.in_height * g.in_width, 1);
  std::vector<float> y(g.planes * g.out_height() * g.out_width());
  std::vector<std::size_t> arg(y.size());
  for (auto _ : state) {
    if constexpr (Parallel) k::maxpool2d_forward<float>(g, x, y, arg);
    else k::reference::maxpool2d_forward<float>(g, x, y, arg);
    benchmark::DoNotOptimize(y.data());
  }
}

BENCHMARK(BM_ConvForward<false>)->Name("conv_forward/reference")->Apply(conv_args);
BENCHMARK(BM_ConvForward<true>)->Name("conv_forward/parallel")->Apply(conv_args);
BENCHMARK(BM_ConvBackward<false>)->Name("conv_backward/reference")->Apply(conv_args);
BENCHMARK(BM_ConvBackward<true>)->Name("conv_backward/parallel")->Apply(conv_args);
BENCHMARK(BM_Dense<false>)->Name("dense/reference")->Args({1024, 384, 64})->Args({64, 256, 256});
BENCHMARK(BM_Dense<true>)->Name("dense/parallel")->Args({1024, 384, 64})->Args({64, 256, 256});
BENCHMARK(BM_MaxPool<false>)->Name("maxpool/reference")->Args({256, 16, 48})->Args({256, 64, 64});
BENCHMARK(BM_MaxPool<true>)->Name("maxpool/parallel")->Args({256, 16, 48})->Args({256, 64, 64});

}  // namespace

BENCHMARK_MAIN();
