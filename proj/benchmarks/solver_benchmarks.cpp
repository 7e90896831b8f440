// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <cstdint>
#include <random>

#include <benchmark/benchmark.h>

#include "tlmor/gramians.hpp"
#include "tlmor/reductors.hpp"
#include "tlmor/relerr_system.hpp"

namespace {

using tlmor::Index;
using tlmor::Matrix;

Matrix stable_matrix(Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  Matrix A(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) A(i, j) = gauss(rng) / std::sqrt(static_cast<double>(n));
  A.diagonal().array() -= 2.5;
  return A;
}

Matrix gaussian(Index rows, Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  Matrix M(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) M(i, j) = gauss(rng);
  return M;
}

void BM_Lyapunov(benchmark::State& state) {
  const Index n = state.range(0);
  const Matrix A = stable_matrix(n, 1);
  const Matrix B = gaussian(n, 2, 2);
  const Matrix W = B * B.transpose();
  for (auto _ : state) benchmark::DoNotOptimize(tlmor::solve_lyapunov(A, W));
  state.SetComplexityN(n);
}
BENCHMARK(BM_Lyapunov)->RangeMultiplier(2)->Range(16, 256)->Complexity(benchmark::oNCubed);

void BM_Sylvester(benchmark::State& state) {
  const Index n = state.range(0);
  const Matrix K = stable_matrix(n, 3);
  const Matrix L = stable_matrix(8, 4);
  const Matrix W = gaussian(n, 8, 5);
  for (auto _ : state) benchmark::DoNotOptimize(tlmor::solve_sylvester(K, L, W));
  state.SetComplexityN(n);
}
BENCHMARK(BM_Sylvester)->RangeMultiplier(2)->Range(16, 256)->Complexity(benchmark::oNCubed);

void BM_MatrixExponential(benchmark::State& state) {
  const Index n = state.range(0);
  const Matrix A = stable_matrix(n, 6);
  for (auto _ : state) benchmark::DoNotOptimize(tlmor::matrix_exponential(A, 1.0));
  state.SetComplexityN(n);
}
BENCHMARK(BM_MatrixExponential)->RangeMultiplier(2)->Range(16, 256)->Complexity(benchmark::oNCubed);

void BM_TimeLimitedGramians(benchmark::State& state) {
  const Index n = state.range(0);
  const tlmor::StateSpaceModel model(stable_matrix(n, 7), gaussian(n, 1, 8), gaussian(1, n, 9), Matrix::Ones(1, 1));
  for (auto _ : state) benchmark::DoNotOptimize(tlmor::tl_gramians(model, {0.0, 1.0}));
}
BENCHMARK(BM_TimeLimitedGramians)->Arg(32)->Arg(128);

void BM_RelativeError(benchmark::State& state) {
  const Index n = state.range(0);
  const tlmor::StateSpaceModel model(stable_matrix(n, 10), gaussian(n, 1, 11), gaussian(1, n, 12),
                                     Matrix::Ones(1, 1));
  tlmor::ReductorConfig cfg;
  cfg.order = 4;
  cfg.interval = {0.0, 1.0};
  const auto workspace = tlmor::make_workspace(model, cfg.interval);
  const auto rom = tlmor::tlbt(model, cfg, workspace).rom;
  for (auto _ : state) benchmark::DoNotOptimize(tlmor::evaluate_relative_error(workspace, rom).value);
}
BENCHMARK(BM_RelativeError)->Arg(32)->Arg(128);

}  // namespace

BENCHMARK_MAIN();
