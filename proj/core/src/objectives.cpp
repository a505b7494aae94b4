// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include "pedpipe/objectives.hpp"

#include <cmath>

#include "pedpipe/errors.hpp"
#include "pedpipe/ops.hpp"

namespace pedpipe {

void PreferenceRecord::validate() const {
  const std::string who = "preference record '" + id + "': ";
  if (instruction.empty()) throw DataError(who + "empty instruction");
  if (chosen.empty() || rejected.empty()) throw DataError(who + "empty response");
  if (chosen == rejected) throw DataError(who + "chosen and rejected responses are identical");
}

void DfpoConfig::validate() const {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw ArgumentError("dfpo beta must be positive");
  if (!(mu >= 0.0) || !std::isfinite(mu)) throw ArgumentError("dfpo mu must be non-negative");
}

Tensor cpt_loss(const TransformerWeights& weights, std::span<const TokenSeq> batch, const ForwardOptions& options) {
  if (batch.empty()) throw ArgumentError("cpt_loss: empty batch");
  Tensor total;
  std::size_t positions = 0;
  for (const auto& seq : batch) {
    if (seq.size() < 2) throw ArgumentError("cpt_loss: sequence shorter than 2 tokens");
    const std::span<const TokenId> all(seq);
    const Tensor logits = forward(weights, all.first(seq.size() - 1), options);
    const Tensor nll = cross_entropy_logits(logits, all.subspan(1), {}, Reduction::sum);
    total = total.defined() ? add(total, nll) : nll;
    positions += seq.size() - 1;
  }
  return scale(total, 1.0 / static_cast<double>(positions));
}

Tensor sft_loss(const TransformerWeights& weights, std::span<const TokenId> prompt, std::span<const TokenId> response,
                const ForwardOptions& options) {
  return neg(sequence_logprob(weights, prompt, response, options));
}

double bt_probability(double reward_w, double reward_l) { return stable_sigmoid(reward_w - reward_l); }

Tensor phi_regularizer(const TransformerWeights& policy, std::span<const TokenId> prompt,
                       std::span<const TokenId> chosen, const ForwardOptions& options) {
  return sft_loss(policy, prompt, chosen, options);
}

DfpoTerms dfpo_loss(const TransformerWeights& policy, const TransformerWeights& reference, const PreferenceRecord& record,
                    const DfpoConfig& config, const ForwardOptions& options) {
  config.validate();
  record.validate();
  if (policy.config.vocab_size != reference.config.vocab_size) {
    throw ArgumentError("dfpo_loss: policy vocabulary " + std::to_string(policy.config.vocab_size) +
                        " differs from reference vocabulary " + std::to_string(reference.config.vocab_size));
  }
  DfpoTerms out;
  {
    NoGradGuard frozen;
    ForwardOptions ref_options;
    out.reference_chosen = sequence_logprob(reference, record.instruction, record.chosen, ref_options).item();
    out.reference_rejected = sequence_logprob(reference, record.instruction, record.rejected, ref_options).item();
  }
  const Tensor chosen = sequence_logprob(policy, record.instruction, record.chosen, options);
  const Tensor rejected = sequence_logprob(policy, record.instruction, record.rejected, options);
  out.policy_chosen = chosen.item();
  out.policy_rejected = rejected.item();

  const Tensor ratio_gap =
      sub(sub(chosen, rejected), Tensor::scalar(out.reference_chosen - out.reference_rejected));
  const Tensor margin = scale(ratio_gap, config.beta);
  out.margin = margin.item();
  out.preference = neg(log_sigmoid(margin));
  out.phi = neg(chosen);
  out.total = config.mu == 0.0 ? out.preference : add(out.preference, scale(out.phi, config.mu));
  return out;
}

}  // namespace pedpipe
