// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "pedpipe/objectives.hpp"
#include "pedpipe/records.hpp"
#include "pedpipe/types.hpp"

namespace pedpipe {

/// Completion-form rendering of one user/assistant exchange. `{u}` and `{a}`
/// are replaced by the turn texts; exchanges are joined with `separator`.
struct CompletionTemplate {
  std::string exchange = "Q: {u}\nA: {a}";
  std::string separator = "\n";
  std::string render(const InstructionRecord& record) const;
};

/// Role-marked dialogue layout for supervised examples.
struct DialogueTemplate {
  std::string user_prefix = "User: ";
  std::string assistant_prefix = "Assistant: ";
  std::string separator = "\n";
  /// Renders turns [0, count).
  std::string render(const std::vector<Turn>& turns, std::size_t count) const;
};

/// mix_ratio is the fraction of output documents that are rendered
/// instructions. Every instruction appears exactly once when mix_ratio > 0;
/// plain documents are drawn (cycling through reshuffled passes) to fill the
/// remainder. mix_ratio == 0 yields a shuffle of the plain documents.
std::vector<CompletionDoc> pack_hybrid_corpus(const std::vector<InstructionRecord>& instructions,
                                              const std::vector<CompletionDoc>& plain, double mix_ratio,
                                              const CompletionTemplate& completion, std::uint64_t seed);

/// BOS + bytes + EOS, cut into windows of at most `window` tokens; pieces
/// shorter than 2 tokens are dropped.
std::vector<TokenSeq> chunk_documents(const std::vector<CompletionDoc>& docs, std::size_t window);

struct SftExample {
  TokenSeq prompt;    // x
  TokenSeq response;  // y
  std::size_t truncated = 0;  // context tokens removed from the left of x
};

/// x = BOS + dialogue through the preceding user turn + assistant prefix;
/// y = assistant text + EOS. When max_len > 0 and the pair does not fit,
/// the oldest context tokens after BOS are removed.
SftExample build_sft_example(const InstructionRecord& record, std::size_t turn_index,
                             const DialogueTemplate& dialogue = {}, std::size_t max_len = 0);

/// One example per assistant turn.
std::vector<SftExample> build_sft_examples(const std::vector<InstructionRecord>& records,
                                           const DialogueTemplate& dialogue, std::size_t max_len,
                                           std::size_t* truncated_examples = nullptr);

/// Encodes a text preference triple with the single-turn dialogue layout.
PreferenceRecord encode_preference(const PreferenceText& text, const DialogueTemplate& dialogue = {},
                                   std::size_t max_len = 0);

struct PaddedTokens {
  std::size_t rows = 0, cols = 0;
  std::vector<TokenId> ids;        // rows x cols, PAD-filled
  std::vector<std::uint8_t> mask;  // 1 on real tokens
};

PaddedTokens pad_sequences(const std::vector<TokenSeq>& seqs);

struct PreferenceBatch {
  std::vector<PreferenceRecord> records;
  PaddedTokens instructions, chosen, rejected;
};

/// Shuffles under `seed`, groups into batches (last one may be short) and pads.
std::vector<PreferenceBatch> build_preference_batch(const std::vector<PreferenceRecord>& records,
                                                    std::size_t batch_size, std::uint64_t seed);

/// Removes exact duplicates (first occurrence wins) then splits a seeded
/// shuffle; val receives round(val_fraction * n) records, at least 1 and at
/// most n - 1 when n >= 2.
template <typename T>
struct Split {
  std::vector<T> train, val;
};

template <typename T>
Split<T> split_and_dedup(const std::vector<T>& records, double val_fraction, std::uint64_t seed,
                         const std::function<std::string(const T&)>& key);

Split<InstructionRecord> split_and_dedup(const std::vector<InstructionRecord>& records, double val_fraction,
                                         std::uint64_t seed);
Split<PreferenceText> split_and_dedup(const std::vector<PreferenceText>& records, double val_fraction,
                                      std::uint64_t seed);
Split<CompletionDoc> split_and_dedup(const std::vector<CompletionDoc>& records, double val_fraction,
                                     std::uint64_t seed);

/// Deterministic batch order for one epoch.
std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                    std::size_t epoch);

}  // namespace pedpipe
