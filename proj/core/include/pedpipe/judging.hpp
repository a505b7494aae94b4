// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pedpipe/backend.hpp"
#include "pedpipe/prompts.hpp"

namespace pedpipe {

enum class Verdict { a, b, tie };
const char* to_string(Verdict v);

inline const std::array<const char*, 4> kRubricDimensions = {"usefulness", "correctness", "consistency", "smoothness"};

/// One judge's opinion, already mapped back to the true model ids.
struct JudgeVote {
  std::string judge_id;
  bool a_presented_first = true;
  Verdict verdict = Verdict::tie;
  std::map<std::string, std::array<double, 2>> scores;  // dimension -> {A, B}
  bool ok = true;
  std::string error;
};

struct PairwiseJudgement {
  std::string sample_id;
  std::string model_a, model_b;
  std::vector<JudgeVote> votes;
  std::optional<Verdict> verdict;  // empty when some judge call failed
};

struct WinRateTable {
  std::string benchmark;
  std::size_t wins = 0, ties = 0, losses = 0, unjudged = 0;
  std::size_t judged() const { return wins + ties + losses; }
  /// Percentage of judged samples won by model A.
  double win_rate() const;
  double tie_rate() const;
  double loss_rate() const;
  std::string to_json() const;
};

std::string format_winrate_tables(const std::vector<WinRateTable>& tables);

struct JudgeSample {
  std::string id;
  std::string question;
  std::string response_a;
  std::string response_b;
};

struct WinRateResult {
  WinRateTable table;
  std::vector<PairwiseJudgement> judgements;
};

/// A strict majority of the votes wins; otherwise the sample is a tie.
Verdict majority_vote(std::span<const Verdict> votes);

/// Parses a judge reply: a JSON object with "verdict" ("1", "2" or "tie")
/// and optional per-dimension "scores" [first, second]. Returns the verdict in
/// presentation terms (a = first shown). Throws BackendError when unreadable.
JudgeVote parse_judge_reply(const std::string& reply);

/// Each judge sees each pair in its own seeded random order. The number of
/// judges must be odd.
WinRateResult pairwise_winrate(const std::vector<JudgeSample>& samples, std::span<GenerationBackend* const> judges,
                               const PromptTemplate& judge_prompt, std::uint64_t seed,
                               const std::string& model_a = "A", const std::string& model_b = "B",
                               const std::string& benchmark = "");

}  // namespace pedpipe
