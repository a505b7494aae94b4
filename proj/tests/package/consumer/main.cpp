// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "pedpipe/backend.hpp"
#include "pedpipe/model.hpp"

int main() {
  pedpipe::Rng rng(1);
  const auto w = pedpipe::TransformerWeights::init(pedpipe::ModelConfig::toy(), rng);
  std::cout << pedpipe::prompt_hash("abc") << " " << w.parameter_count() << "\n";
  return pedpipe::prompt_hash("abc").rfind("ba7816bf", 0) == 0 ? 0 : 1;
}
