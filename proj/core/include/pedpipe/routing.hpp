// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <vector>

#include "pedpipe/adapters.hpp"
#include "pedpipe/model.hpp"

namespace pedpipe {

struct RoutingRow {
  std::string task;
  std::vector<double> weights;  // mean gate weight per specific expert
  std::size_t routed_tokens = 0;
};

struct RoutingReport {
  std::size_t experts = 0;
  std::vector<RoutingRow> rows;
  /// task,expert_1,...,expert_T
  std::string to_csv() const;
  /// Index of the largest weight in a row.
  static std::size_t dominant_expert(const RoutingRow& row);
};

/// Noise-free gates in eval mode, averaged over every routed token of every
/// adapter layer. ArgumentError for an empty task set or adapters without
/// specific experts.
RoutingReport routing_report(const TransformerWeights& weights, const AdapterSet& adapters,
                             const std::map<std::string, std::vector<TokenSeq>>& tagged);

}  // namespace pedpipe
