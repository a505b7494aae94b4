// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "pedpipe/backend.hpp"
#include "pedpipe/prompts.hpp"
#include "pedpipe/records.hpp"

namespace pedpipe {

struct SeedExample {
  std::string raw;
  std::string regularized;
};

/// Curated demonstrations; raw texts are unique.
class SeedExamplePool {
 public:
  SeedExamplePool() = default;
  explicit SeedExamplePool(std::vector<SeedExample> examples);
  /// JSON Lines of {"raw", "regularized"}.
  static SeedExamplePool load(const std::filesystem::path& path);

  void add(SeedExample example);
  std::size_t size() const { return examples_.size(); }
  const SeedExample& at(std::size_t i) const { return examples_.at(i); }

 private:
  std::vector<SeedExample> examples_;
};

inline constexpr std::size_t kRegularizerShots = 10;

struct CallLogEntry {
  std::string template_id;
  std::size_t prompt_tokens = 0;
  std::size_t completion_tokens = 0;
  double latency_ms = 0;
  bool dispatched = true;  // false in dry-run mode
  bool ok = true;
  std::string error;
  std::string prompt;  // kept only in dry-run mode
};

class CallLog {
 public:
  void record(CallLogEntry entry);
  std::vector<CallLogEntry> entries() const;
  std::size_t size() const;
  void save(const std::filesystem::path& path) const;

 private:
  mutable std::mutex mutex_;
  std::vector<CallLogEntry> entries_;
};

struct ManifestEntry {
  std::string id;
  std::string op;
  std::string status;  // ok | partial | failed | unrefined | skipped | rejected
  std::size_t calls = 0;
  std::string detail;
};

void save_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);

struct ForgeOptions {
  SamplingParams sampling;
  bool dry_run = false;
  std::size_t max_in_flight = 4;
};

struct RoleplayResult {
  std::vector<InstructionRecord> records;
  ManifestEntry manifest;
};

struct RegularizeResult {
  std::string text;
  std::vector<std::size_t> shot_ids;
  std::string prompt;
};

struct ReconstructResult {
  InstructionRecord record;
  bool refined = false;
  std::string task1_prompt, task2_prompt;
  ManifestEntry manifest;
};

struct ExpandResult {
  std::optional<CompletionDoc> doc;
  ManifestEntry manifest;
};

/// Renders prompt templates, dispatches them to a backend and logs each call.
/// Per-input call counts: roleplay 1 + (questions returned), regularize 1,
/// reconstruct 2, expand 1.
class Forge {
 public:
  Forge(const PromptLibrary& prompts, GenerationBackend& backend, ForgeOptions options = {});

  /// Renders `template_id`, calls the backend (unless dry-run) and logs it.
  std::string call(const std::string& template_id, const std::map<std::string, std::string>& values);

  RoleplayResult build_roleplay_instructions(const std::string& segment, std::size_t n_questions,
                                             const std::string& id_prefix = "roleplay");
  /// ArgumentError when the pool holds fewer than 10 examples.
  RegularizeResult regularize_dialogue(const std::string& raw_dialogue, const SeedExamplePool& pool,
                                       std::uint64_t seed);
  /// Uses the first user/assistant exchange; other turns are kept as they are.
  ReconstructResult reconstruct_instruction(const InstructionRecord& record);
  ExpandResult knowledge_expand(const InstructionRecord& record);

  // Batch forms run up to max_in_flight inputs concurrently; output order
  // follows input order.
  std::vector<RoleplayResult> roleplay_batch(const std::vector<std::string>& segments, std::size_t n_questions);
  std::vector<ReconstructResult> reconstruct_batch(const std::vector<InstructionRecord>& records);
  std::vector<ExpandResult> expand_batch(const std::vector<InstructionRecord>& records);

  const CallLog& log() const { return log_; }
  const ForgeOptions& options() const { return options_; }

 private:
  const PromptLibrary& prompts_;
  GenerationBackend& backend_;
  ForgeOptions options_;
  CallLog log_;
};

/// Runs fn(0..n-1) on up to `limit` threads. Exceptions are rethrown after
/// all workers finish (first by index).
void parallel_for(std::size_t n, std::size_t limit, const std::function<void(std::size_t)>& fn);

/// Lines of a questions reply with list markers removed; blank lines dropped.
std::vector<std::string> parse_question_lines(const std::string& text);

}  // namespace pedpipe
