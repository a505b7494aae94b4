// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "pedpipe/adapters.hpp"
#include "pedpipe/ops.hpp"

using namespace pedpipe;

namespace {

Tensor filled(const Shape& shape, Rng& rng, bool grad = false) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.normal();
  return Tensor::from(shape, std::move(v), grad);
}

void BM_Matmul(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Tensor a = filled({n, n}, rng), b = filled({n, n}, rng);
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(128);

void BM_MatmulBackward(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  Tensor a = filled({n, n}, rng, true), b = filled({n, n}, rng, true);
  for (auto _ : state) {
    a.zero_grad();
    b.zero_grad();
    sum(matmul(a, b)).backward();
  }
}
BENCHMARK(BM_MatmulBackward)->Arg(32)->Arg(64);

void BM_SoftmaxRows(benchmark::State& state) {
  Rng rng(3);
  const Tensor x = filled({128, 259}, rng);
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(softmax(x, -1));
}
BENCHMARK(BM_SoftmaxRows);

void BM_GateWeights(benchmark::State& state) {
  Rng rng(4);
  RoutingGate gate{filled({32, 3}, rng), filled({32, 3}, rng), true};
  const Tensor x = filled({64, 32}, rng);
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(gate_weights(gate, x, true, &rng));
}
BENCHMARK(BM_GateWeights);

}  // namespace
