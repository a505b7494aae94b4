// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>

#include "pedpipe/types.hpp"

namespace pedpipe {

struct ModelConfig {
  std::size_t vocab_size = kByteVocabSize;
  std::size_t d_model = 128;
  std::size_t n_layers = 4;
  std::size_t n_heads = 4;
  std::size_t d_ff = 512;
  std::size_t max_seq_len = 256;
  bool tie_weights = true;

  /// Throws ArgumentError on d_model % n_heads != 0, vocab below the byte
  /// vocabulary, or any zero dimension.
  void validate() const;

  /// Small configuration used by tests and toy pipeline runs.
  static ModelConfig toy();

  bool operator==(const ModelConfig&) const = default;
};

/// Linear layers inside a block that can host an adapter.
enum class LinearSite { attn_q, attn_k, attn_v, attn_o, ffn_up, ffn_down };

const char* to_string(LinearSite site);
LinearSite linear_site_from_string(const std::string& name);

}  // namespace pedpipe
