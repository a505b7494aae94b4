// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include "pedpipe/datapipe.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "pedpipe/errors.hpp"
#include "pedpipe/rng.hpp"
#include "pedpipe/tokenizer.hpp"

namespace pedpipe {

std::string CompletionTemplate::render(const InstructionRecord& record) const {
  if (exchange.find("{u}") == std::string::npos || exchange.find("{a}") == std::string::npos) {
    throw ArgumentError("completion template must contain {u} and {a}");
  }
  record.validate();
  std::string out;
  for (std::size_t i = 0; i + 1 < record.turns.size(); i += 2) {
    std::string piece = exchange;
    const auto u = piece.find("{u}");
    const auto a = piece.find("{a}");
    if (u < a) {
      piece.replace(a, 3, record.turns[i + 1].text);
      piece.replace(u, 3, record.turns[i].text);
    } else {
      piece.replace(u, 3, record.turns[i].text);
      piece.replace(a, 3, record.turns[i + 1].text);
    }
    if (!out.empty()) out += separator;
    out += piece;
  }
  return out;
}

std::string DialogueTemplate::render(const std::vector<Turn>& turns, std::size_t count) const {
  std::string out;
  for (std::size_t i = 0; i < count && i < turns.size(); ++i) {
    if (i) out += separator;
    out += turns[i].role == Role::user ? user_prefix : assistant_prefix;
    out += turns[i].text;
  }
  return out;
}

std::vector<CompletionDoc> pack_hybrid_corpus(const std::vector<InstructionRecord>& instructions,
                                              const std::vector<CompletionDoc>& plain, double mix_ratio,
                                              const CompletionTemplate& completion, std::uint64_t seed) {
  if (!(mix_ratio >= 0.0 && mix_ratio <= 1.0)) throw ArgumentError("mix_ratio must be in [0, 1]");
  if (mix_ratio > 0.0 && instructions.empty()) throw ArgumentError("pack_hybrid_corpus: no instruction records");
  if (mix_ratio < 1.0 && plain.empty()) throw ArgumentError("pack_hybrid_corpus: no plain documents");

  Rng rng(seed, 0x7061636b);
  std::vector<CompletionDoc> out;
  std::size_t plain_needed = plain.size();
  if (mix_ratio > 0.0) {
    for (const auto& r : instructions) out.push_back({completion.render(r), DocSource::converted_instruction});
    const double n = static_cast<double>(instructions.size());
    plain_needed = static_cast<std::size_t>(std::llround(n * (1.0 - mix_ratio) / mix_ratio));
  }
  Rng draw = rng.fork(1);
  while (plain_needed > 0) {
    std::vector<std::size_t> order(plain.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    draw.shuffle(order);
    for (std::size_t i = 0; i < order.size() && plain_needed > 0; ++i, --plain_needed) out.push_back(plain[order[i]]);
  }
  rng.shuffle(out);
  return out;
}

std::vector<TokenSeq> chunk_documents(const std::vector<CompletionDoc>& docs, std::size_t window) {
  if (window < 2) throw ArgumentError("chunk_documents: window must be at least 2");
  std::vector<TokenSeq> out;
  for (const auto& doc : docs) {
    TokenSeq ids{kBosToken};
    const TokenSeq body = tokenize(doc.text);
    ids.insert(ids.end(), body.begin(), body.end());
    ids.push_back(kEosToken);
    for (std::size_t start = 0; start < ids.size(); start += window) {
      const std::size_t len = std::min(window, ids.size() - start);
      if (len >= 2) out.emplace_back(ids.begin() + start, ids.begin() + start + len);
    }
  }
  return out;
}

SftExample build_sft_example(const InstructionRecord& record, std::size_t turn_index, const DialogueTemplate& dialogue,
                             std::size_t max_len) {
  if (turn_index >= record.turns.size() || record.turns[turn_index].role != Role::assistant) {
    throw ArgumentError("build_sft_example: turn " + std::to_string(turn_index) + " of '" + record.id +
                        "' is not an assistant turn");
  }
  SftExample ex;
  std::string context = dialogue.render(record.turns, turn_index);
  if (turn_index > 0) context += dialogue.separator;
  context += dialogue.assistant_prefix;
  ex.prompt.push_back(kBosToken);
  const TokenSeq ctx = tokenize(context);
  ex.prompt.insert(ex.prompt.end(), ctx.begin(), ctx.end());
  ex.response = tokenize(record.turns[turn_index].text);
  ex.response.push_back(kEosToken);

  if (max_len > 0 && ex.prompt.size() + ex.response.size() > max_len) {
    if (ex.response.size() + 1 > max_len) {
      throw DataError("record '" + record.id + "': response of " + std::to_string(ex.response.size()) +
                      " tokens does not fit a context of " + std::to_string(max_len));
    }
    ex.truncated = ex.prompt.size() + ex.response.size() - max_len;
    ex.prompt.erase(ex.prompt.begin() + 1, ex.prompt.begin() + 1 + static_cast<std::ptrdiff_t>(ex.truncated));
  }
  return ex;
}

std::vector<SftExample> build_sft_examples(const std::vector<InstructionRecord>& records,
                                           const DialogueTemplate& dialogue, std::size_t max_len,
                                           std::size_t* truncated_examples) {
  std::vector<SftExample> out;
  std::size_t truncated = 0;
  for (const auto& r : records) {
    r.validate();
    for (std::size_t i = 1; i < r.turns.size(); i += 2) {
      out.push_back(build_sft_example(r, i, dialogue, max_len));
      if (out.back().truncated) ++truncated;
    }
  }
  if (truncated_examples) *truncated_examples = truncated;
  return out;
}

PreferenceRecord encode_preference(const PreferenceText& text, const DialogueTemplate& dialogue, std::size_t max_len) {
  // The prompt is sized against the longer response so both fit.
  const bool chosen_longer = text.chosen.size() >= text.rejected.size();
  const InstructionRecord longer{
      text.id, TaskTag::general,
      {{Role::user, text.instruction}, {Role::assistant, chosen_longer ? text.chosen : text.rejected}}};
  SftExample ex = build_sft_example(longer, 1, dialogue, max_len);
  TokenSeq other = tokenize(chosen_longer ? text.rejected : text.chosen);
  other.push_back(kEosToken);
  PreferenceRecord out{text.id, std::move(ex.prompt), std::move(ex.response), std::move(other), ""};
  if (!chosen_longer) std::swap(out.chosen, out.rejected);
  out.validate();
  return out;
}

PaddedTokens pad_sequences(const std::vector<TokenSeq>& seqs) {
  PaddedTokens out;
  out.rows = seqs.size();
  for (const auto& s : seqs) out.cols = std::max(out.cols, s.size());
  out.ids.assign(out.rows * out.cols, kPadToken);
  out.mask.assign(out.rows * out.cols, 0);
  for (std::size_t r = 0; r < seqs.size(); ++r) {
    for (std::size_t c = 0; c < seqs[r].size(); ++c) {
      out.ids[r * out.cols + c] = seqs[r][c];
      out.mask[r * out.cols + c] = 1;
    }
  }
  return out;
}

std::vector<PreferenceBatch> build_preference_batch(const std::vector<PreferenceRecord>& records,
                                                    std::size_t batch_size, std::uint64_t seed) {
  if (batch_size == 0) throw ArgumentError("build_preference_batch: batch_size must be positive");
  for (const auto& r : records) r.validate();
  std::vector<PreferenceBatch> out;
  for (const auto& idx : epoch_batches(records.size(), batch_size, seed, 0)) {
    PreferenceBatch batch;
    std::vector<TokenSeq> xs, ws, ls;
    for (std::size_t i : idx) {
      batch.records.push_back(records[i]);
      xs.push_back(records[i].instruction);
      ws.push_back(records[i].chosen);
      ls.push_back(records[i].rejected);
    }
    batch.instructions = pad_sequences(xs);
    batch.chosen = pad_sequences(ws);
    batch.rejected = pad_sequences(ls);
    out.push_back(std::move(batch));
  }
  return out;
}

template <typename T>
Split<T> split_and_dedup(const std::vector<T>& records, double val_fraction, std::uint64_t seed,
                         const std::function<std::string(const T&)>& key) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ArgumentError("val_fraction must be in (0, 1)");
  std::unordered_set<std::string> seen;
  std::vector<T> unique;
  for (const auto& r : records) {
    if (seen.insert(key(r)).second) unique.push_back(r);
  }
  Rng rng(seed, 0x73706c74);
  rng.shuffle(unique);
  const std::size_t n = unique.size();
  std::size_t n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n)));
  if (n >= 2) n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
  Split<T> out;
  out.val.assign(unique.begin(), unique.begin() + static_cast<std::ptrdiff_t>(n_val));
  out.train.assign(unique.begin() + static_cast<std::ptrdiff_t>(n_val), unique.end());
  return out;
}

template Split<InstructionRecord> split_and_dedup(const std::vector<InstructionRecord>&, double, std::uint64_t,
                                                  const std::function<std::string(const InstructionRecord&)>&);
template Split<PreferenceText> split_and_dedup(const std::vector<PreferenceText>&, double, std::uint64_t,
                                               const std::function<std::string(const PreferenceText&)>&);
template Split<CompletionDoc> split_and_dedup(const std::vector<CompletionDoc>&, double, std::uint64_t,
                                              const std::function<std::string(const CompletionDoc&)>&);

Split<InstructionRecord> split_and_dedup(const std::vector<InstructionRecord>& records, double val_fraction,
                                         std::uint64_t seed) {
  return split_and_dedup<InstructionRecord>(records, val_fraction, seed, [](const InstructionRecord& r) {
    std::string k;
    for (const auto& t : r.turns) {
      k += to_string(t.role);
      k += '\x1f';
      k += t.text;
      k += '\x1e';
    }
    return k;
  });
}

Split<PreferenceText> split_and_dedup(const std::vector<PreferenceText>& records, double val_fraction,
                                      std::uint64_t seed) {
  return split_and_dedup<PreferenceText>(records, val_fraction, seed, [](const PreferenceText& r) {
    return r.instruction + '\x1e' + r.chosen + '\x1e' + r.rejected;
  });
}

Split<CompletionDoc> split_and_dedup(const std::vector<CompletionDoc>& records, double val_fraction,
                                     std::uint64_t seed) {
  return split_and_dedup<CompletionDoc>(records, val_fraction, seed, [](const CompletionDoc& d) { return d.text; });
}

std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size, std::uint64_t seed,
                                                    std::size_t epoch) {
  if (batch_size == 0) throw ArgumentError("batch_size must be positive");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng = Rng(seed, 0x65706f63).fork(epoch);
  rng.shuffle(order);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size) {
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + batch_size)));
  }
  return out;
}

}  // namespace pedpipe
