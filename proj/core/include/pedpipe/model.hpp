// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

// Pre-norm decoder-only transformer with learned absolute positions, GELU
// feed-forward blocks and (by default) a head tied to the token embedding.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pedpipe/adapters.hpp"
#include "pedpipe/model_config.hpp"
#include "pedpipe/rng.hpp"
#include "pedpipe/tensor.hpp"
#include "pedpipe/types.hpp"

namespace pedpipe {

struct LayerWeights {
  Tensor ln1_gain, ln1_bias;
  Tensor wq, bq, wk, bk, wv, bv, wo, bo;  // [d x d], [d]
  Tensor ln2_gain, ln2_bias;
  Tensor w_up, b_up;      // [d x ff], [ff]
  Tensor w_down, b_down;  // [ff x d], [d]
};

struct TransformerWeights {
  ModelConfig config;
  Tensor token_embedding;     // [V x d]
  Tensor position_embedding;  // [max_seq_len x d]
  std::vector<LayerWeights> layers;
  Tensor final_gain, final_bias;
  Tensor head;       // [d x V]; undefined when tied
  Tensor head_bias;  // [V]

  /// N(0, 0.02) matrices, zero biases, unit gains; values on the binary32 grid.
  static TransformerWeights init(const ModelConfig& config, Rng& rng);

  /// Stable name order; handles alias the live weights.
  std::vector<NamedParam> parameters() const;
  std::size_t parameter_count() const;
  /// Independent deep copy (same requires_grad flags).
  TransformerWeights clone() const;
  void set_requires_grad(bool on) const;
  void zero_grad() const;
};

struct ForwardOptions {
  const AdapterSet* adapters = nullptr;
  bool train = false;
  Rng* rng = nullptr;             // needed for adapter noise/dropout in train mode
  RoutingTrace* trace = nullptr;  // eval-mode gate weights per adapter layer
};

/// Logits [len x V]. Throws ArgumentError on empty or over-long input and
/// IndexError on ids >= vocab_size.
Tensor forward(const TransformerWeights& weights, std::span<const TokenId> tokens, const ForwardOptions& options = {});

/// sum_i log p(y_i | x, y_<i). Requires |x| >= 1, |y| >= 1 and
/// |x| + |y| <= max_seq_len.
Tensor sequence_logprob(const TransformerWeights& weights, std::span<const TokenId> prompt,
                        std::span<const TokenId> response, const ForwardOptions& options = {});

enum class DecodeStrategy { greedy, sample };

struct GenerateOptions {
  std::size_t max_new_tokens = 64;
  DecodeStrategy strategy = DecodeStrategy::greedy;
  double temperature = 1.0;  // <= 0 falls back to greedy
  std::size_t top_k = 0;     // 0 = whole vocabulary
  std::uint64_t seed = 0;
};

/// New tokens only; stops before EOS, at max_new_tokens, or at the context limit.
TokenSeq generate(const TransformerWeights& weights, std::span<const TokenId> prompt, const GenerateOptions& options,
                  const AdapterSet* adapters = nullptr);

}  // namespace pedpipe
