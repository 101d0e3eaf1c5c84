#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "mfcp/conformal.hpp"
#include "mfcp/linalg.hpp"
#include "mfcp/lofi.hpp"
#include "mfcp/nn.hpp"

using mfcp::linalg::Matrix;

namespace {

Matrix uniform(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = u(rng);
  return m;
}

void BM_ThinSvd(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const Matrix a = uniform(4 * n, n, 1);
  for (auto _ : state) benchmark::DoNotOptimize(mfcp::linalg::thin_svd(a));
}
BENCHMARK(BM_ThinSvd)->Arg(16)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

void BM_PodTruncate(benchmark::State& state) {
  const Matrix s = uniform(260, static_cast<std::size_t>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(mfcp::lofi::pod_truncate(s, 0.99));
}
BENCHMARK(BM_PodTruncate)->Arg(100)->Arg(400)->Unit(benchmark::kMillisecond);

void BM_Fps(benchmark::State& state) {
  const Matrix pts = uniform(static_cast<std::size_t>(state.range(0)), 3, 3);
  const auto m = static_cast<std::size_t>(state.range(1));
  for (auto _ : state) benchmark::DoNotOptimize(mfcp::lofi::fps(pts, m, 0));
}
BENCHMARK(BM_Fps)->Args({2000, 100})->Args({20000, 500})->Unit(benchmark::kMillisecond);

void BM_KnnAverage(benchmark::State& state) {
  const Matrix pts = uniform(5000, 3, 4);
  const Matrix vals = uniform(5000, 4, 5);
  const auto centers = mfcp::lofi::fps(pts, 200, 0);
  const auto k = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(mfcp::lofi::knn_average(pts, vals, centers, k));
}
BENCHMARK(BM_KnnAverage)->Arg(4)->Arg(32)->Unit(benchmark::kMillisecond);

mfcp::nn::Mlp airfoil_like() {
  const std::vector<std::size_t> dims{260, 200, 100, 50, 25, 5, 25, 50, 100, 200, 260};
  return mfcp::nn::Mlp::build(dims, mfcp::nn::Activation::Relu, mfcp::nn::Activation::Identity,
                              6);
}

void BM_MlpForward(benchmark::State& state) {
  const auto net = airfoil_like();
  const Matrix x = uniform(static_cast<std::size_t>(state.range(0)), 260, 7);
  for (auto _ : state) benchmark::DoNotOptimize(net.forward(x));
}
BENCHMARK(BM_MlpForward)->Arg(1)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

void BM_MlpBackward(benchmark::State& state) {
  const auto net = airfoil_like();
  const Matrix x = uniform(static_cast<std::size_t>(state.range(0)), 260, 8);
  const auto cache = net.forward(x);
  const Matrix g = uniform(x.rows(), 260, 9);
  for (auto _ : state) benchmark::DoNotOptimize(net.backward(cache, g, false));
}
BENCHMARK(BM_MlpBackward)->Arg(64)->Arg(256)->Unit(benchmark::kMicrosecond);

void BM_Scores(benchmark::State& state) {
  const Matrix r = uniform(static_cast<std::size_t>(state.range(0)), 260, 10);
  const auto s = mfcp::conformal::modulation(r);
  const auto kind = state.range(1) == 0 ? mfcp::conformal::ScoreKind::LInf
                                        : mfcp::conformal::ScoreKind::NormalizedL2;
  for (auto _ : state) benchmark::DoNotOptimize(mfcp::conformal::scores(r, s, kind));
}
BENCHMARK(BM_Scores)->Args({100, 0})->Args({100, 1})->Args({1000, 1});

void BM_CriticalQuantile(benchmark::State& state) {
  const Matrix r = uniform(1, static_cast<std::size_t>(state.range(0)), 11);
  std::vector<double> v(r.data().begin(), r.data().end());
  for (auto _ : state) benchmark::DoNotOptimize(mfcp::conformal::critical_quantile(v, 0.1));
}
BENCHMARK(BM_CriticalQuantile)->Arg(100)->Arg(10000);

}  // namespace
BENCHMARK_MAIN();
