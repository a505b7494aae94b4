// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include "pedpipe/routing.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "pedpipe/errors.hpp"

namespace pedpipe {

std::string RoutingReport::to_csv() const {
  std::ostringstream os;
  os << "task";
  for (std::size_t j = 0; j < experts; ++j) os << ",expert_" << (j + 1);
  os << '\n';
  char buf[40];
  for (const auto& row : rows) {
    os << row.task;
    for (double w : row.weights) {
      std::snprintf(buf, sizeof buf, ",%.6f", w);
      os << buf;
    }
    os << '\n';
  }
  return os.str();
}

std::size_t RoutingReport::dominant_expert(const RoutingRow& row) {
  return static_cast<std::size_t>(std::max_element(row.weights.begin(), row.weights.end()) - row.weights.begin());
}

RoutingReport routing_report(const TransformerWeights& weights, const AdapterSet& adapters,
                             const std::map<std::string, std::vector<TokenSeq>>& tagged) {
  if (adapters.spec().specific_experts == 0 || adapters.layers().empty()) {
    throw ArgumentError("routing_report: adapters have no specific experts");
  }
  if (tagged.empty()) throw ArgumentError("routing_report: no tagged evaluation sets");
  RoutingReport report;
  report.experts = adapters.spec().specific_experts;
  NoGradGuard no_grad;
  for (const auto& [task, seqs] : tagged) {
    if (seqs.empty()) throw ArgumentError("routing_report: task '" + task + "' has no sequences");
    RoutingTrace trace;
    ForwardOptions opts;
    opts.adapters = &adapters;
    opts.trace = &trace;
    std::size_t tokens = 0;
    for (const auto& seq : seqs) {
      const std::size_t len = std::min(seq.size(), weights.config.max_seq_len);
      forward(weights, std::span<const TokenId>(seq).first(len), opts);
      tokens += len;
    }
    report.rows.push_back({task, trace.overall_mean(), tokens});
  }
  return report;
}

}  // namespace pedpipe
