// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "pedpipe/metrics.hpp"
#include "pedpipe/rng.hpp"

using namespace pedpipe;

namespace {

Tokens words(Rng& rng, std::size_t n) {
  Tokens out(n);
  for (auto& w : out) w = std::string(1, static_cast<char>('a' + rng.below(20)));
  return out;
}

void BM_RougeL(benchmark::State& state) {
  Rng rng(1);
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const Tokens c = words(rng, n), r = words(rng, n);
  for (auto _ : state) benchmark::DoNotOptimize(rouge_l(c, r));
}
BENCHMARK(BM_RougeL)->Arg(64)->Arg(512);

void BM_Bleu4(benchmark::State& state) {
  Rng rng(2);
  const Tokens c = words(rng, 256), r = words(rng, 256);
  for (auto _ : state) benchmark::DoNotOptimize(bleu_n(c, r, 4));
}
BENCHMARK(BM_Bleu4);

void BM_EvaluateSamples(benchmark::State& state) {
  Rng rng(3);
  std::vector<EvalSample> samples;
  for (int i = 0; i < 100; ++i) {
    std::string ref, cand;
    for (const auto& w : words(rng, 40)) ref += w + " ";
    for (const auto& w : words(rng, 40)) cand += w + " ";
    samples.push_back({std::to_string(i), "q", ref, cand});
  }
  for (auto _ : state) benchmark::DoNotOptimize(evaluate_samples(samples, MetricTokenization::whitespace));
}
BENCHMARK(BM_EvaluateSamples);

}  // namespace
