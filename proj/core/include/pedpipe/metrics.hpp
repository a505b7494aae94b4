// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

// Text-generation metrics on a 0-100 scale. Each takes token lists so the
// tokenization policy stays separate; `flagged`, when given, is set for the
// degenerate inputs that score 0 by convention (empty reference, empty
// candidate, no n-grams of the requested order).

#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "pedpipe/records.hpp"

namespace pedpipe {

using Tokens = std::vector<std::string>;

enum class MetricTokenization { automatic, per_char, whitespace };
const char* to_string(MetricTokenization mode);
MetricTokenization metric_tokenization_from_string(const std::string& name);

bool contains_cjk(std::string_view text);
/// automatic -> per_char when the text contains CJK code points, else
/// whitespace. Per-char mode drops whitespace characters.
Tokens metric_tokenize(std::string_view text, MetricTokenization mode);

/// F1 of clipped n-gram overlap.
double rouge_n(const Tokens& candidate, const Tokens& reference, std::size_t n, bool* flagged = nullptr);
/// F1 of longest-common-subsequence precision and recall.
double rouge_l(const Tokens& candidate, const Tokens& reference, bool* flagged = nullptr);
/// Geometric mean of clipped precisions for orders 1..min(n, |candidate|),
/// each floored at 1e-9, times the brevity penalty exp(1 - r/c) when c < r.
double bleu_n(const Tokens& candidate, const Tokens& reference, std::size_t n, bool* flagged = nullptr);
/// min(precision, recall) over all 1..4-gram matches.
double gleu(const Tokens& candidate, const Tokens& reference, bool* flagged = nullptr);
/// Unique n-grams over total n-grams across the whole candidate set.
double distinct_n(const std::vector<Tokens>& candidates, std::size_t n, bool* flagged = nullptr);

inline const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> kNames = {"rouge1", "rouge2", "rougeL", "bleu1",     "bleu2",    "bleu3",
                                                  "bleu4",  "gleu",   "distinct1", "distinct2"};
  return kNames;
}

struct SampleScores {
  std::string id;
  std::map<std::string, double> values;
  std::vector<std::string> flags;
};

struct MetricReport {
  std::string tokenization;  // mode requested
  std::vector<SampleScores> samples;
  /// Mean of per-sample scores for overlap metrics; Distinct is corpus-level.
  std::map<std::string, double> corpus;
  std::string to_json() const;
};

MetricReport evaluate_samples(const std::vector<EvalSample>& samples, MetricTokenization mode);

}  // namespace pedpipe
