// Parallel kernels against the serial reference implementations. The
// reference versions run in double and single-threaded by construction, so
// the gap shown here is parallelism plus precision, not algorithm.

#include <benchmark/benchmark.h>

#include <cstdint>

#include "aggronet/kernels.hpp"
#include "aggronet/reference.hpp"
#include "aggronet/rng.hpp"
#include "aggronet/tensor.hpp"

using namespace aggronet;

namespace {

template <typename T>
TensorT<T> random_tensor(Shape shape, uint64_t seed) {
    SeededRng rng(seed);
    TensorT<T> t(std::move(shape));
    for (int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(rng.uniform(-1.0, 1.0));
    return t;
}

void bm_matmul_parallel(benchmark::State& state) {
    const int64_t n = state.range(0);
    const Tensor a = random_tensor<float>({n, n}, 1);
    const Tensor b = random_tensor<float>({n, n}, 2);
    for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
}

void bm_matmul_reference(benchmark::State& state) {
    const int64_t n = state.range(0);
    const TensorD a = random_tensor<double>({n, n}, 1);
    const TensorD b = random_tensor<double>({n, n}, 2);
    for (auto _ : state) benchmark::DoNotOptimize(ref::matmul(a, b));
}

void bm_conv2d_parallel(benchmark::State& state) {
    const int64_t hw = state.range(0);
    const Tensor input = random_tensor<float>({8, hw, hw, 16}, 3);
    const ConvParams<float> p{random_tensor<float>({3, 3, 16, 32}, 4), 1, Padding::same};
    for (auto _ : state) benchmark::DoNotOptimize(conv2d(input, p));
}

void bm_conv2d_reference(benchmark::State& state) {
    const int64_t hw = state.range(0);
    const TensorD input = random_tensor<double>({8, hw, hw, 16}, 3);
    const TensorD kernel = random_tensor<double>({3, 3, 16, 32}, 4);
    for (auto _ : state) benchmark::DoNotOptimize(ref::conv2d(input, kernel, 1, Padding::same));
}

void bm_maxpool_parallel(benchmark::State& state) {
    const int64_t hw = state.range(0);
    const Tensor input = random_tensor<float>({8, hw, hw, 32}, 5);
    for (auto _ : state) benchmark::DoNotOptimize(maxpool2d(input, 2, 2));
}

void bm_maxpool_reference(benchmark::State& state) {
    const int64_t hw = state.range(0);
    const TensorD input = random_tensor<double>({8, hw, hw, 32}, 5);
    for (auto _ : state) benchmark::DoNotOptimize(ref::maxpool2d(input, 2, 2));
}

void bm_gap_parallel(benchmark::State& state) {
    const int64_t hw = state.range(0);
    const Tensor input = random_tensor<float>({8, hw, hw, 64}, 6);
    for (auto _ : state) benchmark::DoNotOptimize(global_avg_pool(input));
}

void bm_gap_reference(benchmark::State& state) {
    const int64_t hw = state.range(0);
    const TensorD input = random_tensor<double>({8, hw, hw, 64}, 6);
    for (auto _ : state) benchmark::DoNotOptimize(ref::global_avg_pool(input));
}

void bm_resize_parallel(benchmark::State& state) {
    const int64_t hw = state.range(0);
    const Tensor img = random_tensor<float>({hw, hw, 3}, 7);
    for (auto _ : state) benchmark::DoNotOptimize(resize_bilinear(img, 32, 32));
}

void bm_resize_reference(benchmark::State& state) {
    const int64_t hw = state.range(0);
    const TensorD img = random_tensor<double>({hw, hw, 3}, 7);
    for (auto _ : state) benchmark::DoNotOptimize(ref::resize_bilinear(img, 32, 32));
}

}  // namespace

BENCHMARK(bm_matmul_parallel)->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(bm_matmul_reference)->Arg(64)->Arg(128)->Arg(256);
BENCHMARK(bm_conv2d_parallel)->Arg(16)->Arg(32);
BENCHMARK(bm_conv2d_reference)->Arg(16)->Arg(32);
BENCHMARK(bm_maxpool_parallel)->Arg(32)->Arg(64);
BENCHMARK(bm_maxpool_reference)->Arg(32)->Arg(64);
BENCHMARK(bm_gap_parallel)->Arg(32)->Arg(64);
BENCHMARK(bm_gap_reference)->Arg(32)->Arg(64);
BENCHMARK(bm_resize_parallel)->Arg(64)->Arg(256);
BENCHMARK(bm_resize_reference)->Arg(64)->Arg(256);

BENCHMARK_MAIN();
