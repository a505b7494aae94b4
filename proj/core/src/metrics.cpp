// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include "pedpipe/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "pedpipe/errors.hpp"
#include "pedpipe/tokenizer.hpp"

namespace pedpipe {

namespace {

using Counts = std::map<std::vector<std::string>, std::size_t>;

Counts ngram_counts(const Tokens& t, std::size_t n) {
  Counts c;
  if (n == 0 || t.size() < n) return c;
  for (std::size_t i = 0; i + n <= t.size(); ++i) ++c[Tokens(t.begin() + i, t.begin() + i + n)];
  return c;
}

std::size_t total(std::size_t len, std::size_t n) { return len >= n ? len - n + 1 : 0; }

std::size_t clipped_overlap(const Counts& cand, const Counts& ref) {
  std::size_t m = 0;
  for (const auto& [g, c] : cand) {
    auto it = ref.find(g);
    if (it != ref.end()) m += std::min(c, it->second);
  }
  return m;
}

double f1(double p, double r) { return p + r > 0 ? 2 * p * r / (p + r) : 0.0; }

void set_flag(bool* flagged, bool v) {
  if (flagged) *flagged = v;
}

bool is_cjk(char32_t c) {
  return (c >= 0x4E00 && c <= 0x9FFF) || (c >= 0x3400 && c <= 0x4DBF) || (c >= 0x20000 && c <= 0x2EBEF) ||
         (c >= 0xF900 && c <= 0xFAFF) || (c >= 0x3000 && c <= 0x30FF) || (c >= 0xFF00 && c <= 0xFFEF) ||
         (c >= 0xAC00 && c <= 0xD7AF);
}

bool is_space(char32_t c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f' || c == 0x3000 || c == 0xA0;
}

}  // namespace

const char* to_string(MetricTokenization mode) {
  switch (mode) {
    case MetricTokenization::automatic: return "auto";
    case MetricTokenization::per_char: return "char";
    case MetricTokenization::whitespace: return "whitespace";
  }
  return "?";
}

MetricTokenization metric_tokenization_from_string(const std::string& name) {
  if (name == "auto") return MetricTokenization::automatic;
  if (name == "char") return MetricTokenization::per_char;
  if (name == "whitespace") return MetricTokenization::whitespace;
  throw ArgumentError("unknown tokenization '" + name + "' (expected auto, char or whitespace)");
}

bool contains_cjk(std::string_view text) {
  for (char32_t c : utf8_codepoints(text))
    if (is_cjk(c)) return true;
  return false;
}

Tokens metric_tokenize(std::string_view text, MetricTokenization mode) {
  if (mode == MetricTokenization::automatic) {
    mode = contains_cjk(text) ? MetricTokenization::per_char : MetricTokenization::whitespace;
  }
  Tokens out;
  std::string current;
  for (char32_t c : utf8_codepoints(text)) {
    const std::string piece = is_space(c) ? std::string() : encode_utf8(c);
    if (mode == MetricTokenization::per_char) {
      if (!piece.empty()) out.push_back(piece);
    } else if (piece.empty()) {
      if (!current.empty()) out.push_back(std::move(current));
      current.clear();
    } else {
      current += piece;
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

double rouge_n(const Tokens& candidate, const Tokens& reference, std::size_t n, bool* flagged) {
  if (n == 0) throw ArgumentError("rouge_n: n must be at least 1");
  const std::size_t tc = total(candidate.size(), n), tr = total(reference.size(), n);
  set_flag(flagged, tc == 0 || tr == 0);
  if (tc == 0 || tr == 0) return 0.0;
  const double m = static_cast<double>(clipped_overlap(ngram_counts(candidate, n), ngram_counts(reference, n)));
  return 100.0 * f1(m / static_cast<double>(tc), m / static_cast<double>(tr));
}

double rouge_l(const Tokens& candidate, const Tokens& reference, bool* flagged) {
  set_flag(flagged, candidate.empty() || reference.empty());
  if (candidate.empty() || reference.empty()) return 0.0;
  std::vector<std::size_t> prev(reference.size() + 1, 0), cur(reference.size() + 1, 0);
  for (std::size_t i = 1; i <= candidate.size(); ++i) {
    for (std::size_t j = 1; j <= reference.size(); ++j) {
      cur[j] = candidate[i - 1] == reference[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  const double lcs = static_cast<double>(prev[reference.size()]);
  return 100.0 * f1(lcs / static_cast<double>(candidate.size()), lcs / static_cast<double>(reference.size()));
}

double bleu_n(const Tokens& candidate, const Tokens& reference, std::size_t n, bool* flagged) {
  if (n < 1 || n > 4) throw ArgumentError("bleu_n: n must be in 1..4");
  set_flag(flagged, candidate.empty() || reference.empty());
  if (candidate.empty() || reference.empty()) return 0.0;
  const std::size_t order = std::min(n, candidate.size());
  double log_sum = 0;
  for (std::size_t k = 1; k <= order; ++k) {
    const double m = static_cast<double>(clipped_overlap(ngram_counts(candidate, k), ngram_counts(reference, k)));
    const double p = m / static_cast<double>(total(candidate.size(), k));
    log_sum += std::log(std::max(p, 1e-9));
  }
  const double c = static_cast<double>(candidate.size()), r = static_cast<double>(reference.size());
  const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
  return 100.0 * bp * std::exp(log_sum / static_cast<double>(order));
}

double gleu(const Tokens& candidate, const Tokens& reference, bool* flagged) {
  std::size_t matches = 0, tc = 0, tr = 0;
  for (std::size_t n = 1; n <= 4; ++n) {
    matches += clipped_overlap(ngram_counts(candidate, n), ngram_counts(reference, n));
    tc += total(candidate.size(), n);
    tr += total(reference.size(), n);
  }
  set_flag(flagged, tc == 0 || tr == 0);
  if (tc == 0 || tr == 0) return 0.0;
  const double m = static_cast<double>(matches);
  return 100.0 * std::min(m / static_cast<double>(tc), m / static_cast<double>(tr));
}

double distinct_n(const std::vector<Tokens>& candidates, std::size_t n, bool* flagged) {
  if (n == 0) throw ArgumentError("distinct_n: n must be at least 1");
  std::set<Tokens> unique;
  std::size_t count = 0;
  for (const auto& c : candidates) {
    for (std::size_t i = 0; i + n <= c.size(); ++i) {
      unique.emplace(c.begin() + i, c.begin() + i + n);
      ++count;
    }
  }
  set_flag(flagged, count == 0);
  if (count == 0) return 0.0;
  return 100.0 * static_cast<double>(unique.size()) / static_cast<double>(count);
}

MetricReport evaluate_samples(const std::vector<EvalSample>& samples, MetricTokenization mode) {
  MetricReport report;
  report.tokenization = to_string(mode);
  std::vector<Tokens> all_candidates;
  for (const auto& s : samples) {
    const Tokens cand = metric_tokenize(s.candidate, mode);
    const Tokens ref = metric_tokenize(s.reference, mode);
    SampleScores row;
    row.id = s.id;
    auto put = [&](const std::string& name, double v, bool flag) {
      row.values[name] = v;
      if (flag) row.flags.push_back(name);
    };
    bool f = false;
    put("rouge1", rouge_n(cand, ref, 1, &f), f);
    put("rouge2", rouge_n(cand, ref, 2, &f), f);
    put("rougeL", rouge_l(cand, ref, &f), f);
    for (std::size_t n = 1; n <= 4; ++n) put("bleu" + std::to_string(n), bleu_n(cand, ref, n, &f), f);
    put("gleu", gleu(cand, ref, &f), f);
    put("distinct1", distinct_n({cand}, 1, &f), f);
    put("distinct2", distinct_n({cand}, 2, &f), f);
    report.samples.push_back(std::move(row));
    all_candidates.push_back(cand);
  }
  for (const auto& name : metric_names()) {
    if (name.rfind("distinct", 0) == 0) continue;
    double sum = 0;
    for (const auto& s : report.samples) sum += s.values.at(name);
    report.corpus[name] = samples.empty() ? 0.0 : sum / static_cast<double>(samples.size());
  }
  report.corpus["distinct1"] = distinct_n(all_candidates, 1);
  report.corpus["distinct2"] = distinct_n(all_candidates, 2);
  return report;
}

std::string MetricReport::to_json() const {
  nlohmann::json j;
  j["tokenization"] = tokenization;
  j["corpus"] = corpus;
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& s : samples) rows.push_back({{"id", s.id}, {"scores", s.values}, {"flags", s.flags}});
  j["samples"] = rows;
  return j.dump(2);
}

}  // namespace pedpipe
