// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

// Checkpoint file layout (all integers little-endian):
//
//   "PGPT" | u32 version | u64 manifest length | manifest | payload
//
// The manifest is UTF-8 text of `[section]` headers and `key=value` lines.
// Section [tensors] maps each tensor name to `<d0>x<d1>...@<byte offset>`;
// the payload is the concatenated binary32 values. Adapter checkpoints add
// an [adapters] section with the expert count, rank, alpha, dropout and
// placement.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pedpipe/adapters.hpp"
#include "pedpipe/model.hpp"

namespace pedpipe {

inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class CheckpointKind { base, adapters };

struct CheckpointTensorInfo {
  std::string name;
  Shape shape;
  std::uint64_t offset = 0;  // bytes into the payload
};

struct CheckpointInfo {
  std::uint32_t version = 0;
  CheckpointKind kind = CheckpointKind::base;
  ModelConfig model;
  std::optional<AdapterSpec> adapters;
  std::vector<CheckpointTensorInfo> tensors;
  std::size_t total_parameters = 0;
  std::string manifest;
};

void save_checkpoint(const std::filesystem::path& path, const TransformerWeights& weights);
/// Throws CheckpointError on bad magic, version mismatch, truncation or a
/// manifest that does not describe the model it claims.
TransformerWeights load_checkpoint(const std::filesystem::path& path);

void save_adapter_checkpoint(const std::filesystem::path& path, const AdapterSet& adapters, const ModelConfig& model);
/// When `expected` is given the stored model config must match it.
AdapterSet load_adapter_checkpoint(const std::filesystem::path& path, const ModelConfig* expected = nullptr);

CheckpointInfo inspect_checkpoint(const std::filesystem::path& path);
/// Human-readable listing used by `pedpipe inspect-checkpoint`.
std::string describe_checkpoint(const CheckpointInfo& info);

}  // namespace pedpipe
