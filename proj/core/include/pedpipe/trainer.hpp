// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pedpipe/adapters.hpp"
#include "pedpipe/config.hpp"
#include "pedpipe/datapipe.hpp"
#include "pedpipe/model.hpp"

namespace pedpipe {

/// Linear ramp from 0 over warmup_steps, then constant. Steps count from 1.
double lr_at(const StageConfig& config, std::size_t step);

struct LogRecord {
  std::size_t step = 0;
  Stage stage = Stage::cpt;
  double loss = 0;
  std::map<std::string, double> components;
  double lr = 0;
};

/// Append-only JSON Lines training log; also kept in memory.
class TrainingLog {
 public:
  TrainingLog() = default;
  explicit TrainingLog(const std::filesystem::path& path);

  void append(const LogRecord& record);
  /// One line describing the stage settings (optimizer constants included).
  void stage_start(const StageConfig& config);
  const std::vector<LogRecord>& records() const { return records_; }

 private:
  void write(const std::string& line);
  std::optional<std::ofstream> out_;
  std::vector<LogRecord> records_;
};

struct EvalPoint {
  std::size_t step = 0;
  double val_loss = 0;
};

struct StageReport {
  Stage stage = Stage::cpt;
  std::size_t steps = 0;
  std::vector<double> train_losses;  // one per step
  std::vector<EvalPoint> evals;
  std::optional<double> best_val_loss;
  std::size_t best_step = 0;
  std::filesystem::path checkpoint;
  std::size_t truncated_examples = 0;

  // dfpo
  double initial_preference_accuracy = 0;  // margin > 0 over the train set
  double final_preference_accuracy = 0;
  double initial_logprob_accuracy = 0;  // log pi(y^w) > log pi(y^l)
  double final_logprob_accuracy = 0;

  // psft
  std::size_t trainable_parameters = 0;
  std::size_t base_parameters = 0;
  std::size_t freeze_audits = 0;
};

/// Block means over consecutive windows (a trailing partial block is dropped).
std::vector<double> smoothed_losses(const std::vector<double>& losses, std::size_t window);
bool strictly_decreasing(const std::vector<double>& values);

/// Total optimizer steps for n examples under the config.
std::size_t planned_steps(const StageConfig& config, std::size_t examples);

// In-memory stage loops. Each selects the weights with the lowest validation
// loss when a validation set is given, and throws TrainingAborted (leaving the
// weights at their last finite state) on a non-finite loss or gradient.

StageReport train_cpt(TransformerWeights& weights, const StageConfig& config, const std::vector<TokenSeq>& train,
                      const std::vector<TokenSeq>& val = {}, TrainingLog* log = nullptr);

StageReport train_fsft(TransformerWeights& weights, const StageConfig& config, const std::vector<SftExample>& train,
                       const std::vector<SftExample>& val = {}, TrainingLog* log = nullptr);

StageReport train_dfpo(TransformerWeights& policy, const TransformerWeights& reference, const StageConfig& config,
                       const std::vector<PreferenceRecord>& train, const std::vector<PreferenceRecord>& val = {},
                       TrainingLog* log = nullptr);

/// Base weights are cloned and frozen; only adapter parameters move.
/// Throws FreezeViolation if a base weight ever holds a gradient.
StageReport train_psft(const TransformerWeights& base, AdapterSet& adapters, const StageConfig& config,
                       const std::vector<SftExample>& train, const std::vector<SftExample>& val = {},
                       TrainingLog* log = nullptr);

/// Mean NLL per response token.
double mean_token_sft_loss(const TransformerWeights& weights, const std::vector<SftExample>& examples,
                           const AdapterSet* adapters = nullptr);

struct PreferenceAccuracy {
  double margin = 0;   // fraction with beta-scaled log-ratio margin > 0
  double logprob = 0;  // fraction with log pi(y^w|x) > log pi(y^l|x)
};
PreferenceAccuracy preference_accuracy(const TransformerWeights& policy, const TransformerWeights& reference,
                                       const std::vector<PreferenceRecord>& records, const DfpoConfig& config);

/// Completed stages and their checkpoints, persisted as JSON in the output
/// directory.
class PipelineState {
 public:
  static PipelineState load(const std::filesystem::path& out_dir);
  void save() const;

  bool completed(Stage stage) const;
  std::filesystem::path checkpoint(Stage stage) const;
  void mark_completed(Stage stage, const std::filesystem::path& checkpoint, std::optional<double> best_val);
  /// StageGateError when the previous stage has not produced a checkpoint.
  void require_ready(Stage stage) const;

  std::uint64_t seed = 0;
  std::filesystem::path dir;

 private:
  struct Entry {
    std::filesystem::path checkpoint;
    std::optional<double> best_val;
  };
  std::map<Stage, Entry> stages_;
};

std::filesystem::path checkpoint_path(const std::filesystem::path& out_dir, Stage stage);

// File-level stages: gate on PipelineState, load the previous checkpoint,
// split off validation data, train, save, update the state.

StageReport run_cpt(const PipelineConfig& config, const std::vector<CompletionDoc>& corpus,
                    const std::filesystem::path& out_dir, TrainingLog* log = nullptr);
StageReport run_fsft(const PipelineConfig& config, const std::vector<InstructionRecord>& records,
                     const std::filesystem::path& out_dir, TrainingLog* log = nullptr);
StageReport run_dfpo(const PipelineConfig& config, const std::vector<PreferenceText>& records,
                     const std::filesystem::path& out_dir, TrainingLog* log = nullptr);
StageReport run_psft(const PipelineConfig& config, const std::vector<InstructionRecord>& records,
                     const std::filesystem::path& out_dir, TrainingLog* log = nullptr);

}  // namespace pedpipe
