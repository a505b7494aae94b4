// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <filesystem>

#include "pedpipe/checkpoint.hpp"
#include "pedpipe/config.hpp"
#include "pedpipe/model.hpp"
#include "pedpipe/objectives.hpp"
#include "pedpipe/tokenizer.hpp"

using namespace pedpipe;

namespace {

TransformerWeights desk_model() {
  Rng rng(42);
  return TransformerWeights::init(PipelineConfig::defaults(Profile::desk).model, rng);
}

TokenSeq text_of(std::size_t n) {
  TokenSeq t;
  const std::string s = "the child has a mild fever and a dry cough. ";
  while (t.size() < n) {
    const TokenSeq piece = tokenize(s);
    t.insert(t.end(), piece.begin(), piece.end());
  }
  t.resize(n);
  return t;
}

void BM_Forward(benchmark::State& state) {
  const auto w = desk_model();
  const TokenSeq tokens = text_of(static_cast<std::size_t>(state.range(0)));
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(forward(w, tokens));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Forward)->Arg(32)->Arg(128)->Arg(256);

void BM_SftStep(benchmark::State& state) {
  const auto w = desk_model();
  const TokenSeq x = text_of(48), y = text_of(24);
  for (auto _ : state) {
    w.zero_grad();
    sft_loss(w, x, y).backward();
  }
}
BENCHMARK(BM_SftStep);

void BM_MoEForward(benchmark::State& state) {
  const auto w = desk_model();
  Rng rng(5);
  AdapterSpec spec;
  spec.placement = state.range(0) ? AdapterPlacement::all : AdapterPlacement::ffn;
  const AdapterSet adapters = AdapterSet::attach(w.config, spec, rng);
  const TokenSeq tokens = text_of(64);
  ForwardOptions opts;
  opts.adapters = &adapters;
  NoGradGuard no_grad;
  for (auto _ : state) benchmark::DoNotOptimize(forward(w, tokens, opts));
}
BENCHMARK(BM_MoEForward)->Arg(0)->Arg(1);

void BM_CheckpointRoundTrip(benchmark::State& state) {
  const auto w = desk_model();
  const auto path = std::filesystem::temp_directory_path() / "pedpipe_bench.pgpt";
  for (auto _ : state) {
    save_checkpoint(path, w);
    benchmark::DoNotOptimize(load_checkpoint(path));
  }
  std::filesystem::remove(path);
}
BENCHMARK(BM_CheckpointRoundTrip);

}  // namespace
