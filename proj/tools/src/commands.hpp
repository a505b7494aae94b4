// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "pedpipe/config.hpp"

namespace pedpipe::cli {

struct Common {
  ConfigSources sources;
  std::filesystem::path out = "runs";
  bool strict = false;
};

struct BuildCorpusArgs {
  std::string op;
  std::filesystem::path input;
  std::filesystem::path seed_pool;
  std::filesystem::path prompts;
};

struct PackArgs {
  std::filesystem::path instructions;
  std::filesystem::path plain;
  std::optional<double> mix_ratio;
};

struct TrainArgs {
  std::string stage;
  std::filesystem::path data;
};

struct EvalArgs {
  std::filesystem::path samples;
  std::filesystem::path checkpoint;
  std::filesystem::path adapters;
};

struct JudgeArgs {
  std::filesystem::path samples;
  std::filesystem::path prompts;
  std::string model_a = "A";
  std::string model_b = "B";
  std::string benchmark;
};

struct RoutingArgs {
  std::filesystem::path data;
  std::filesystem::path checkpoint;
  std::filesystem::path adapters;
};

/// Resolves the configuration and prints it.
PipelineConfig announce(const Common& common);

int build_corpus(const Common& common, const BuildCorpusArgs& args);
int pack(const Common& common, const PackArgs& args);
int train(const Common& common, const TrainArgs& args);
int eval(const Common& common, const EvalArgs& args);
int judge(const Common& common, const JudgeArgs& args);
int routing_report(const Common& common, const RoutingArgs& args);
int inspect_checkpoint(const Common& common, const std::filesystem::path& path);

}  // namespace pedpipe::cli
