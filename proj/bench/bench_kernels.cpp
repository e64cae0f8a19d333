// Parallel kernels against the serial reference on network-sized shapes.

#include <benchmark/benchmark.h>

#include <cstdint>
#include <vector>

#include "apex/core/rng.hpp"
#include "apex/nn/gemm.hpp"
#include "apex/nn/kernels.hpp"

namespace {

using namespace apex::nn;

std::vector<float> random_vec(std::size_t n, std::uint64_t seed) {
  apex::Rng rng(seed);
  std::vector<float> v(n);
  for (auto& x : v) x = static_cast<float>(rng.uniform(-1.0, 1.0));
  return v;
}

template <bool Parallel>
void BM_Gemm(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_vec(n * n, 1);
  const auto b = random_vec(n * n, 2);
  std::vector<float> c(n * n);
  for (auto _ : state) {
    if constexpr (Parallel) {
      gemm(Trans::No, Trans::No, n, n, n, 1.0f, a.data(), n, b.data(), n, 0.0f, c.data(), n);
    } else {
      gemm_reference(Trans::No, Trans::No, n, n, n, 1.0f, a.data(), n, b.data(), n, 0.0f, c.data(), n);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.counters["GFLOPS"] = benchmark::Counter(2.0 * double(n) * double(n) * double(n),
                                                benchmark::Counter::kIsIterationInvariantRate,
                                                benchmark::Counter::kIs1000);
}

// Mid-network block: 64 -> 128 channels at 64x64.
ConvGeometry conv_shape() { return {1, 64, 128, 64, 64}; }

template <bool Parallel>
void BM_Conv3x3Forward(benchmark::State& state) {
  const auto g = conv_shape();
  const auto x = random_vec(g.input_size(), 3);
  const auto w = random_vec(g.weight_size(), 4);
  const auto b = random_vec(g.out_ch, 5);
  std::vector<float> y(g.output_size());
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::conv3x3_forward(g, x, w, b, y);
    } else {
      reference::conv3x3_forward(g, x, w, b, y);
    }
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Parallel>
void BM_Conv3x3Backward(benchmark::State& state) {
  const auto g = conv_shape();
  const auto x = random_vec(g.input_size(), 6);
  const auto w = random_vec(g.weight_size(), 7);
  const auto dy = random_vec(g.output_size(), 8);
  std::vector<float> dx(g.input_size()), dw(g.weight_size()), db(g.out_ch);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::conv3x3_backward(g, x, w, dy, dx, dw, db);
    } else {
      reference::conv3x3_backward(g, x, w, dy, dx, dw, db);
    }
    benchmark::DoNotOptimize(dx.data());
  }
}

template <bool Parallel>
void BM_BatchNormTrain(benchmark::State& state) {
  const PlaneGeometry g{4, 32, 128, 128};
  const auto x = random_vec(g.size(), 9);
  const std::vector<float> gamma(g.channels, 1.0f), beta(g.channels, 0.0f);
  std::vector<float> y(g.size()), mean(g.channels), var(g.channels);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::batchnorm_train_forward(g, x, gamma, beta, 1e-5f, y, mean, var);
    } else {
      reference::batchnorm_train_forward(g, x, gamma, beta, 1e-5f, y, mean, var);
    }
    benchmark::DoNotOptimize(y.data());
  }
}

template <bool Parallel>
void BM_MaxPool(benchmark::State& state) {
  const PlaneGeometry g{4, 32, 128, 128};
  const auto x = random_vec(g.size(), 10);
  std::vector<float> y(g.size() / 4);
  std::vector<std::uint8_t> arg(g.size() / 4);
  for (auto _ : state) {
    if constexpr (Parallel) {
      kernels::maxpool2x2_forward(g, x, y, arg);
    } else {
      reference::maxpool2x2_forward(g, x, y, arg);
    }
    benchmark::DoNotOptimize(y.data());
  }
}

}  // namespace

BENCHMARK(BM_Gemm<true>)->Name("gemm/parallel")->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Gemm<false>)->Name("gemm/reference")->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Conv3x3Forward<true>)->Name("conv3x3_forward/parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Conv3x3Forward<false>)->Name("conv3x3_forward/reference")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Conv3x3Backward<true>)->Name("conv3x3_backward/parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Conv3x3Backward<false>)->Name("conv3x3_backward/reference")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchNormTrain<true>)->Name("batchnorm_train/parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BatchNormTrain<false>)->Name("batchnorm_train/reference")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MaxPool<true>)->Name("maxpool2x2/parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MaxPool<false>)->Name("maxpool2x2/reference")->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
