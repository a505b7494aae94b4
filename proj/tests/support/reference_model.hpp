// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "pedpipe/model.hpp"

namespace pedpipe::testing {

using Matrix = std::vector<std::vector<double>>;

/// Logits [len][V] from scalar loops over the raw weight values; no adapters.
Matrix reference_logits(const TransformerWeights& w, const TokenSeq& tokens);

/// sum log softmax(logits)[y] over the response, built from reference_logits.
double reference_sequence_logprob(const TransformerWeights& w, const TokenSeq& prompt, const TokenSeq& response);

}  // namespace pedpipe::testing
