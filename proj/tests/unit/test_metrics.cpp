// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "pedpipe/errors.hpp"
#include "pedpipe/metrics.hpp"
#include "pedpipe/rng.hpp"
#include "support/oracles.hpp"

using namespace pedpipe;
namespace t = pedpipe::testing;

namespace {

Tokens random_words(Rng& rng, std::size_t max_len, std::size_t vocab) {
  Tokens out(rng.below(max_len + 1));
  for (auto& w : out) w = std::string(1, static_cast<char>('a' + rng.below(vocab)));
  return out;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("library metrics equal the brute-force oracles") {
    Rng rng(51);
    double worst = 0;
    std::vector<Tokens> cands;
    for (int i = 0; i < 1000; ++i) {
      const Tokens c = random_words(rng, 12, 4), r = random_words(rng, 12, 4);
      cands.push_back(c);
      for (std::size_t n : {1u, 2u}) worst = std::max(worst, std::abs(rouge_n(c, r, n) - t::oracle_rouge_n(c, r, n)));
      worst = std::max(worst, std::abs(rouge_l(c, r) - t::oracle_rouge_l(c, r)));
      for (std::size_t n = 1; n <= 4; ++n) worst = std::max(worst, std::abs(bleu_n(c, r, n) - t::oracle_bleu(c, r, n)));
      worst = std::max(worst, std::abs(gleu(c, r) - t::oracle_gleu(c, r)));
      for (std::size_t n : {1u, 2u})
        worst = std::max(worst, std::abs(distinct_n({c}, n) - t::oracle_distinct({c}, n)));
    }
    for (std::size_t n : {1u, 2u}) worst = std::max(worst, std::abs(distinct_n(cands, n) - t::oracle_distinct(cands, n)));
    CHECK(worst < 1e-9);
  }

  TEST_CASE("identical texts score 100 on every overlap metric") {
    Rng rng(52);
    for (int i = 0; i < 100; ++i) {
      Tokens s = random_words(rng, 10, 6);
      while (s.size() < 4) s.push_back("z");
      CHECK(rouge_n(s, s, 1) == doctest::Approx(100.0));
      CHECK(rouge_n(s, s, 2) == doctest::Approx(100.0));
      CHECK(rouge_l(s, s) == doctest::Approx(100.0));
      for (std::size_t n = 1; n <= 4; ++n) CHECK(bleu_n(s, s, n) == doctest::Approx(100.0));
      CHECK(gleu(s, s) == doctest::Approx(100.0));
    }
  }

  TEST_CASE("hand-computed values") {
    const Tokens cand = {"the", "cat", "sat"}, ref = {"the", "cat", "sat", "down"};
    // p1 = 1, p2 = 1, p3 = 1; brevity exp(1 - 4/3)
    CHECK(bleu_n(cand, ref, 4) == doctest::Approx(100.0 * std::exp(1.0 - 4.0 / 3.0)).epsilon(1e-12));
    CHECK(rouge_n(cand, ref, 1) == doctest::Approx(100.0 * 2 * 0.75 / 1.75).epsilon(1e-12));
    CHECK(gleu(cand, ref) == doctest::Approx(100.0 * 6.0 / 10.0).epsilon(1e-12));
    CHECK(distinct_n({{"a", "a", "b"}}, 1) == doctest::Approx(200.0 / 3.0));
  }

  TEST_CASE("degenerate inputs score zero and are flagged") {
    bool flagged = false;
    CHECK(rouge_n({}, {"a"}, 1, &flagged) == 0.0);
    CHECK(flagged);
    CHECK(rouge_n({"a"}, {"a"}, 2, &flagged) == 0.0);
    CHECK(flagged);
    CHECK(bleu_n({"a"}, {}, 4, &flagged) == 0.0);
    CHECK(flagged);
    CHECK(distinct_n({{}}, 1, &flagged) == 0.0);
    CHECK(flagged);
    CHECK(rouge_l({"a"}, {"b"}, &flagged) == 0.0);
    CHECK_FALSE(flagged);
    CHECK_THROWS_AS(bleu_n({"a"}, {"a"}, 5), ArgumentError);
  }

  TEST_CASE("tokenization follows the script") {
    CHECK(metric_tokenize("孩子 发烧了", MetricTokenization::automatic) == Tokens{"孩", "子", "发", "烧", "了"});
    CHECK(metric_tokenize("the  child\nhas fever", MetricTokenization::automatic) ==
          Tokens{"the", "child", "has", "fever"});
    CHECK(metric_tokenize("ab c", MetricTokenization::per_char) == Tokens{"a", "b", "c"});
    CHECK(contains_cjk("fever 发烧"));
    CHECK_FALSE(contains_cjk("fever"));
    CHECK_THROWS_AS(metric_tokenization_from_string("bpe"), ArgumentError);
  }

  TEST_CASE("sample evaluation reports every metric") {
    const std::vector<EvalSample> samples = {{"1", "q", "a b c d", "a b c d"}, {"2", "q", "a b", "c d"}};
    const auto report = evaluate_samples(samples, MetricTokenization::whitespace);
    REQUIRE(report.samples.size() == 2);
    for (const auto& name : metric_names()) CHECK(report.corpus.count(name) == 1);
    CHECK(report.corpus.at("rouge1") == doctest::Approx(50.0));
    CHECK(report.corpus.at("distinct1") == doctest::Approx(100.0 * 4 / 6));
    CHECK(report.to_json().find("\"rougeL\"") != std::string::npos);
  }
}
