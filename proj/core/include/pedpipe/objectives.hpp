// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>

#include "pedpipe/model.hpp"

namespace pedpipe {

struct PreferenceRecord {
  std::string id;
  TokenSeq instruction;  // x
  TokenSeq chosen;       // y^w
  TokenSeq rejected;     // y^l
  std::string provenance;

  /// DataError naming the id when x or a response is empty or y^w == y^l.
  void validate() const;
};

struct DfpoConfig {
  double beta = 0.1;
  double mu = 1.0;
  void validate() const;
};

/// Mean next-token NLL over every predictable position of the batch.
Tensor cpt_loss(const TransformerWeights& weights, std::span<const TokenSeq> batch, const ForwardOptions& options = {});

/// -sum_i log p(y_i | x, y_<i); prompt positions carry no loss.
Tensor sft_loss(const TransformerWeights& weights, std::span<const TokenId> prompt, std::span<const TokenId> response,
                const ForwardOptions& options = {});

/// sigma(reward_w - reward_l)
double bt_probability(double reward_w, double reward_l);

/// Following regularizer on the preferred response; same value as sft_loss.
Tensor phi_regularizer(const TransformerWeights& policy, std::span<const TokenId> prompt,
                       std::span<const TokenId> chosen, const ForwardOptions& options = {});

struct DfpoTerms {
  Tensor total;
  Tensor preference;  // -log sigma(margin)
  Tensor phi;         // NLL of y^w under the policy
  double margin = 0;  // beta * (log-ratio(y^w) - log-ratio(y^l))
  double policy_chosen = 0, policy_rejected = 0;
  double reference_chosen = 0, reference_rejected = 0;
};

/// Reference log-probabilities are computed without recording gradients.
DfpoTerms dfpo_loss(const TransformerWeights& policy, const TransformerWeights& reference, const PreferenceRecord& record,
                    const DfpoConfig& config, const ForwardOptions& options = {});

}  // namespace pedpipe
