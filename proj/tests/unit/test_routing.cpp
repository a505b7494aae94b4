// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "pedpipe/errors.hpp"
#include "pedpipe/routing.hpp"
#include "pedpipe/tokenizer.hpp"

using namespace pedpipe;

namespace {

ModelConfig micro_config() {
  ModelConfig c;
  c.d_model = 8;
  c.n_layers = 2;
  c.n_heads = 2;
  c.d_ff = 16;
  c.max_seq_len = 16;
  return c;
}

struct Fixture {
  TransformerWeights weights;
  AdapterSet adapters;
};

Fixture make(std::size_t experts = 3) {
  Rng rng(5, 3);
  Fixture f{TransformerWeights::init(micro_config(), rng), {}};
  AdapterSpec spec;
  spec.specific_experts = experts;
  spec.rank = 2;
  f.adapters = AdapterSet::attach(f.weights.config, spec, rng);
  for (auto& layer : f.adapters.layers())
    for (auto& v : Tensor(layer.gate.w_gate).mutable_data()) v *= 50.0;
  return f;
}

}  // namespace

TEST_SUITE("routing") {
  TEST_CASE("zero gates route uniformly") {
    Fixture f = make();
    for (auto& layer : f.adapters.layers())
      for (auto& v : Tensor(layer.gate.w_gate).mutable_data()) v = 0.0;
    const auto report = routing_report(f.weights, f.adapters, {{"a", {tokenize("hello")}}, {"b", {tokenize("xy")}}});
    REQUIRE(report.rows.size() == 2);
    for (const auto& row : report.rows)
      for (double w : row.weights) CHECK(w == doctest::Approx(1.0 / 3).epsilon(1e-12));
    CHECK(report.rows[0].routed_tokens == 5);
  }

  TEST_CASE("rows are token-weighted means over sequences") {
    const Fixture f = make();
    const TokenSeq s1 = tokenize("abc"), s2 = tokenize("zzzzzzz");
    const auto both = routing_report(f.weights, f.adapters, {{"t", {s1, s2}}});
    const auto r1 = routing_report(f.weights, f.adapters, {{"t", {s1}}});
    const auto r2 = routing_report(f.weights, f.adapters, {{"t", {s2}}});
    double total = 0;
    for (std::size_t j = 0; j < 3; ++j) {
      const double expect = (3 * r1.rows[0].weights[j] + 7 * r2.rows[0].weights[j]) / 10;
      CHECK(both.rows[0].weights[j] == doctest::Approx(expect).epsilon(1e-12));
      total += both.rows[0].weights[j];
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(both.rows[0].routed_tokens == 10);
  }

  TEST_CASE("over-long sequences are truncated to the context") {
    const Fixture f = make();
    const auto report = routing_report(f.weights, f.adapters, {{"t", {TokenSeq(40, 'a')}}});
    CHECK(report.rows[0].routed_tokens == 16);
  }

  TEST_CASE("csv layout and dominant expert") {
    RoutingReport report;
    report.experts = 2;
    report.rows = {{"medkqa", {0.25, 0.75}, 4}, {"evidiag", {0.5, 0.5}, 2}};
    CHECK(report.to_csv() == "task,expert_1,expert_2\nmedkqa,0.250000,0.750000\nevidiag,0.500000,0.500000\n");
    CHECK(RoutingReport::dominant_expert(report.rows[0]) == 1);
    CHECK(RoutingReport::dominant_expert(report.rows[1]) == 0);
  }

  TEST_CASE("invalid requests are rejected") {
    const Fixture f = make();
    CHECK_THROWS_AS(routing_report(f.weights, f.adapters, {}), ArgumentError);
    CHECK_THROWS_AS(routing_report(f.weights, f.adapters, {{"t", {}}}), ArgumentError);
    const Fixture none = make(0);
    CHECK_THROWS_AS(routing_report(none.weights, none.adapters, {{"t", {tokenize("a")}}}), ArgumentError);
  }
}
