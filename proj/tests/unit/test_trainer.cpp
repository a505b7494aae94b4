// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include "pedpipe/checkpoint.hpp"
#include "pedpipe/errors.hpp"
#include "pedpipe/trainer.hpp"
#include "support/toy_data.hpp"

using namespace pedpipe;
namespace fs = std::filesystem;
using pedpipe::testing::toy_instructions;
using pedpipe::testing::toy_plain_corpus;
using pedpipe::testing::toy_preference_records;
using pedpipe::testing::toy_preference_texts;

namespace {

ModelConfig micro_config() {
  ModelConfig c;
  c.d_model = 8;
  c.n_layers = 1;
  c.n_heads = 2;
  c.d_ff = 16;
  c.max_seq_len = 96;
  return c;
}

TransformerWeights micro_model(std::uint64_t seed = 7) {
  Rng rng(seed, 1);
  return TransformerWeights::init(micro_config(), rng);
}

StageConfig quick(Stage stage, std::size_t steps, double lr = 1e-2) {
  StageConfig c = StageConfig::defaults(stage, Profile::desk);
  c.lr = lr;
  c.batch_size = 4;
  c.max_seq_len = 96;
  c.max_steps = steps;
  c.warmup_steps = 0;
  c.eval_interval = 0;
  return c;
}

std::vector<SftExample> sft_set(std::size_t n, std::uint64_t seed) {
  return build_sft_examples(toy_instructions(n, seed), {}, 96);
}

std::vector<double> values(const TransformerWeights& w) {
  std::vector<double> out;
  for (const auto& p : w.parameters()) out.insert(out.end(), p.tensor.data().begin(), p.tensor.data().end());
  return out;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("pedpipe_trainer_" + name);
  fs::remove_all(d);
  return d;
}

PipelineConfig tiny_pipeline() {
  PipelineConfig c = PipelineConfig::defaults(Profile::desk);
  c.model = micro_config();
  for (Stage s : {Stage::cpt, Stage::fsft, Stage::dfpo, Stage::psft}) {
    StageConfig& sc = c.stage(s);
    sc.max_steps = 3;
    sc.batch_size = 2;
    sc.max_seq_len = 96;
    sc.eval_interval = 2;
  }
  c.psft.adapters.rank = 2;
  return c;
}

}  // namespace

TEST_SUITE("trainer") {
  TEST_CASE("learning rate warms up linearly") {
    StageConfig c;
    c.lr = 1.0;
    c.warmup_steps = 4;
    CHECK(lr_at(c, 1) == doctest::Approx(0.25));
    CHECK(lr_at(c, 3) == doctest::Approx(0.75));
    CHECK(lr_at(c, 4) == 1.0);
    CHECK(lr_at(c, 100) == 1.0);
    c.warmup_steps = 0;
    CHECK(lr_at(c, 1) == 1.0);
  }

  TEST_CASE("smoothing and step planning") {
    CHECK(smoothed_losses({1, 2, 3, 4, 5}, 2) == std::vector<double>{1.5, 3.5});
    CHECK(smoothed_losses({1, 2}, 0).empty());
    CHECK(strictly_decreasing({3, 2, 1}));
    CHECK_FALSE(strictly_decreasing({3, 3, 1}));
    CHECK_FALSE(strictly_decreasing({1}));
    StageConfig c;
    c.batch_size = 3;
    c.epochs = 2;
    CHECK(planned_steps(c, 10) == 8);
    c.max_steps = 5;
    CHECK(planned_steps(c, 10) == 5);
  }

  TEST_CASE("full fine-tuning lowers the loss and logs every step") {
    auto w = micro_model();
    const auto train = sft_set(12, 3);
    const double before = mean_token_sft_loss(w, train);
    TrainingLog log;
    const auto report = train_fsft(w, quick(Stage::fsft, 30), train, {}, &log);
    CHECK(report.steps == 30);
    CHECK(report.train_losses.size() == 30);
    CHECK(log.records().size() == 30);
    CHECK(log.records().back().components.count("nll_per_token") == 1);
    CHECK(mean_token_sft_loss(w, train) < before);
    CHECK_FALSE(report.best_val_loss.has_value());
  }

  TEST_CASE("validation keeps the best weights") {
    auto w = micro_model();
    auto cfg = quick(Stage::fsft, 20, 5e-2);
    cfg.eval_interval = 5;
    const auto train = sft_set(12, 3), val = sft_set(6, 99);
    const auto report = train_fsft(w, cfg, train, val);
    REQUIRE(report.best_val_loss.has_value());
    CHECK(report.evals.size() == 4);
    double best = report.evals[0].val_loss;
    for (const auto& e : report.evals) best = std::min(best, e.val_loss);
    CHECK(*report.best_val_loss == best);
    double mean = 0;
    for (const auto& ex : val) mean += sft_loss(w, ex.prompt, ex.response).item();
    CHECK(mean / static_cast<double>(val.size()) == doctest::Approx(best).epsilon(1e-12));
  }

  TEST_CASE("runs are reproducible") {
    auto a = micro_model(), b = micro_model();
    const auto train = sft_set(8, 5);
    train_fsft(a, quick(Stage::fsft, 6), train);
    train_fsft(b, quick(Stage::fsft, 6), train);
    CHECK(values(a) == values(b));
  }

  TEST_CASE("a non-finite loss aborts without touching the weights") {
    auto w = micro_model();
    Tensor(w.token_embedding).mutable_data()[256 * 8] = std::numeric_limits<double>::quiet_NaN();
    const auto before = values(w);
    const auto train = sft_set(4, 1);
    CHECK_THROWS_AS(train_fsft(w, quick(Stage::fsft, 3), train), TrainingAborted);
    const auto after = values(w);
    REQUIRE(after.size() == before.size());
    for (std::size_t i = 0; i < after.size(); ++i) {
      if (std::isnan(before[i])) CHECK(std::isnan(after[i]));
      else CHECK(after[i] == before[i]);
    }
  }

  TEST_CASE("empty training data is rejected") {
    auto w = micro_model();
    CHECK_THROWS_AS(train_fsft(w, quick(Stage::fsft, 3), {}), DataError);
  }

  TEST_CASE("preference training starts at zero margin accuracy and moves the policy") {
    auto policy = micro_model();
    const auto reference = policy.clone();
    reference.set_requires_grad(false);
    const auto records = toy_preference_records(8, 2);
    auto cfg = quick(Stage::dfpo, 10, 1e-2);
    const auto report = train_dfpo(policy, reference, cfg, records);
    CHECK(report.initial_preference_accuracy == 0.0);
    CHECK(report.steps == 10);
    const auto acc = preference_accuracy(policy, reference, records, cfg.dfpo);
    CHECK(acc.margin == report.final_preference_accuracy);
    CHECK(acc.logprob == report.final_logprob_accuracy);
    CHECK(values(policy) != values(reference));
  }

  TEST_CASE("adapter training leaves the base untouched") {
    const auto base = micro_model();
    const auto before = values(base);
    Rng rng(11, 2);
    AdapterSpec spec;
    spec.rank = 2;
    AdapterSet adapters = AdapterSet::attach(base.config, spec, rng);
    std::vector<double> adapter_before;
    for (const auto& p : adapters.parameters())
      adapter_before.insert(adapter_before.end(), p.tensor.data().begin(), p.tensor.data().end());
    auto cfg = quick(Stage::psft, 8);
    cfg.eval_interval = 4;
    const auto report = train_psft(base, adapters, cfg, sft_set(8, 4));
    CHECK(values(base) == before);
    CHECK(report.freeze_audits == 3);
    CHECK(report.trainable_parameters == AdapterSet::expected_parameter_count(base.config, spec));
    CHECK(report.base_parameters == base.parameter_count());
    std::vector<double> adapter_after;
    for (const auto& p : adapters.parameters())
      adapter_after.insert(adapter_after.end(), p.tensor.data().begin(), p.tensor.data().end());
    CHECK(adapter_after != adapter_before);
    for (const auto& p : base.parameters()) CHECK_FALSE(p.tensor.has_grad());
  }

  TEST_CASE("adapter training without specific experts uses the universal expert alone") {
    const auto base = micro_model();
    Rng rng(12, 2);
    AdapterSpec spec;
    spec.specific_experts = 0;
    spec.rank = 2;
    AdapterSet adapters = AdapterSet::attach(base.config, spec, rng);
    const auto train = sft_set(8, 4);
    const double before = mean_token_sft_loss(base, train, &adapters);
    const auto report = train_psft(base, adapters, quick(Stage::psft, 10), train);
    CHECK(report.steps == 10);
    CHECK(report.trainable_parameters == AdapterSet::expected_parameter_count(base.config, spec));
    CHECK(mean_token_sft_loss(base, train, &adapters) < before);
  }

  TEST_CASE("stages are gated on earlier checkpoints") {
    const auto dir = fresh_dir("gate");
    const auto config = tiny_pipeline();
    CHECK_THROWS_WITH_AS(run_dfpo(config, toy_preference_texts(6, 1), dir), doctest::Contains("fsft"),
                         StageGateError);
    CHECK_THROWS_AS(run_psft(config, toy_instructions(6, 1), dir), StageGateError);
    PipelineState state = PipelineState::load(dir);
    state.mark_completed(Stage::fsft, dir / "missing.pgpt", std::nullopt);
    CHECK_FALSE(state.completed(Stage::fsft));
    CHECK_THROWS_AS(state.require_ready(Stage::dfpo), StageGateError);
  }

  TEST_CASE("pipeline state survives a save and load") {
    const auto dir = fresh_dir("state");
    fs::create_directories(dir);
    std::ofstream(dir / "fsft.pgpt") << "x";
    PipelineState state = PipelineState::load(dir);
    state.seed = 9;
    state.mark_completed(Stage::fsft, dir / "fsft.pgpt", 1.5);
    state.save();
    const auto loaded = PipelineState::load(dir);
    CHECK(loaded.seed == 9);
    CHECK(loaded.completed(Stage::fsft));
    CHECK(loaded.checkpoint(Stage::fsft) == dir / "fsft.pgpt");
    CHECK_NOTHROW(loaded.require_ready(Stage::dfpo));
    std::ofstream(dir / "pipeline_state.json") << "{broken";
    CHECK_THROWS_AS(PipelineState::load(dir), DataError);
  }

  TEST_CASE("the file-level pipeline writes checkpoints, logs and state") {
    const auto dir = fresh_dir("files");
    const auto config = tiny_pipeline();
    TrainingLog log(dir / "train.jsonl");
    auto docs = toy_plain_corpus(10, 1);
    run_cpt(config, docs, dir, &log);
    run_fsft(config, toy_instructions(12, 1), dir, &log);
    const auto dfpo = run_dfpo(config, toy_preference_texts(12, 1), dir, &log);
    const auto psft = run_psft(config, toy_instructions(12, 2), dir, &log);
    for (Stage s : {Stage::cpt, Stage::fsft, Stage::dfpo, Stage::psft}) CHECK(fs::exists(checkpoint_path(dir, s)));
    CHECK(dfpo.best_val_loss.has_value());
    CHECK(psft.freeze_audits >= 1);
    const auto state = PipelineState::load(dir);
    CHECK(state.completed(Stage::psft));
    CHECK(state.seed == config.seed);
    CHECK(file_bytes(checkpoint_path(dir, Stage::dfpo)) == file_bytes(state.checkpoint(Stage::dfpo)));

    std::ifstream in(dir / "train.jsonl");
    std::string line;
    std::size_t starts = 0, steps = 0;
    while (std::getline(in, line)) {
      if (line.find("\"stage_start\"") != std::string::npos) ++starts;
      else if (line.find("\"timestamp\"") != std::string::npos && line.find("\"lr\"") != std::string::npos) ++steps;
    }
    CHECK(starts == 4);
    CHECK(steps == 12);
    const auto adapters = load_adapter_checkpoint(checkpoint_path(dir, Stage::psft), &config.model);
    CHECK(adapters.parameter_count() == AdapterSet::expected_parameter_count(config.model, config.psft.adapters));
  }
}
