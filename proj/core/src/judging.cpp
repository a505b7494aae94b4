// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include "pedpipe/judging.hpp"

#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "pedpipe/errors.hpp"
#include "pedpipe/rng.hpp"

namespace pedpipe {

using nlohmann::json;

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::a: return "A";
    case Verdict::b: return "B";
    case Verdict::tie: return "tie";
  }
  return "?";
}

namespace {

double pct(std::size_t part, std::size_t whole) {
  return whole ? 100.0 * static_cast<double>(part) / static_cast<double>(whole) : 0.0;
}

}  // namespace

double WinRateTable::win_rate() const { return pct(wins, judged()); }
double WinRateTable::tie_rate() const { return pct(ties, judged()); }
double WinRateTable::loss_rate() const { return pct(losses, judged()); }

std::string WinRateTable::to_json() const {
  return json{{"benchmark", benchmark}, {"wins", wins},           {"ties", ties},
              {"losses", losses},       {"unjudged", unjudged},   {"win_rate", win_rate()},
              {"tie_rate", tie_rate()}, {"loss_rate", loss_rate()}}
      .dump(2);
}

std::string format_winrate_tables(const std::vector<WinRateTable>& tables) {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-20s %6s %6s %6s %8s %8s\n", "benchmark", "win", "tie", "loss", "unjudged",
                "win %");
  os << line;
  for (const auto& t : tables) {
    std::snprintf(line, sizeof line, "%-20s %6zu %6zu %6zu %8zu %8.2f\n",
                  t.benchmark.empty() ? "-" : t.benchmark.c_str(), t.wins, t.ties, t.losses, t.unjudged,
                  t.win_rate());
    os << line;
  }
  return os.str();
}

Verdict majority_vote(std::span<const Verdict> votes) {
  std::size_t a = 0, b = 0, tie = 0;
  for (Verdict v : votes) {
    if (v == Verdict::a) ++a;
    else if (v == Verdict::b) ++b;
    else ++tie;
  }
  const std::size_t half = votes.size() / 2;
  if (a > half) return Verdict::a;
  if (b > half) return Verdict::b;
  return Verdict::tie;
}

JudgeVote parse_judge_reply(const std::string& reply) {
  const auto open = reply.find('{');
  const auto close = reply.rfind('}');
  if (open == std::string::npos || close == std::string::npos || close < open) {
    throw BackendError("judge reply has no JSON object");
  }
  json j;
  try {
    j = json::parse(reply.substr(open, close - open + 1));
  } catch (const std::exception& e) {
    throw BackendError(std::string("judge reply is not valid JSON: ") + e.what());
  }
  JudgeVote vote;
  if (!j.contains("verdict")) throw BackendError("judge reply lacks a verdict");
  const json& v = j.at("verdict");
  const std::string verdict = v.is_string() ? v.get<std::string>() : v.dump();
  if (verdict == "1") {
    vote.verdict = Verdict::a;
  } else if (verdict == "2") {
    vote.verdict = Verdict::b;
  } else if (verdict == "tie") {
    vote.verdict = Verdict::tie;
  } else {
    throw BackendError("judge verdict '" + verdict + "' is not 1, 2 or tie");
  }
  if (j.contains("scores") && j.at("scores").is_object()) {
    for (const char* dim : kRubricDimensions) {
      if (!j.at("scores").contains(dim)) continue;
      const json& s = j.at("scores").at(dim);
      if (s.is_array() && s.size() == 2 && s[0].is_number() && s[1].is_number()) {
        vote.scores[dim] = {s[0].get<double>(), s[1].get<double>()};
      }
    }
  }
  return vote;
}

WinRateResult pairwise_winrate(const std::vector<JudgeSample>& samples, std::span<GenerationBackend* const> judges,
                               const PromptTemplate& judge_prompt, std::uint64_t seed, const std::string& model_a,
                               const std::string& model_b, const std::string& benchmark) {
  if (judges.empty() || judges.size() % 2 == 0) throw ArgumentError("pairwise_winrate: the number of judges must be odd");
  WinRateResult out;
  out.table.benchmark = benchmark;
  Rng order_rng(seed, 0x6a756467);
  const SamplingParams params{0.0, 512};
  for (const auto& sample : samples) {
    PairwiseJudgement pj;
    pj.sample_id = sample.id;
    pj.model_a = model_a;
    pj.model_b = model_b;
    std::vector<Verdict> verdicts;
    bool failed = false;
    for (std::size_t k = 0; k < judges.size(); ++k) {
      const bool a_first = order_rng.below(2) == 0;
      JudgeVote vote;
      try {
        const std::string prompt = judge_prompt.render({{"question", sample.question},
                                                        {"response_1", a_first ? sample.response_a : sample.response_b},
                                                        {"response_2", a_first ? sample.response_b : sample.response_a}});
        vote = parse_judge_reply(judges[k]->complete(prompt, params));
        if (!a_first) {
          if (vote.verdict == Verdict::a) {
            vote.verdict = Verdict::b;
          } else if (vote.verdict == Verdict::b) {
            vote.verdict = Verdict::a;
          }
          for (auto& [dim, s] : vote.scores) std::swap(s[0], s[1]);
        }
        verdicts.push_back(vote.verdict);
      } catch (const BackendError& e) {
        vote.ok = false;
        vote.error = e.what();
        failed = true;
      }
      vote.judge_id = "judge-" + std::to_string(k + 1);
      vote.a_presented_first = a_first;
      pj.votes.push_back(std::move(vote));
    }
    if (failed) {
      ++out.table.unjudged;
    } else {
      pj.verdict = majority_vote(verdicts);
      if (*pj.verdict == Verdict::a) ++out.table.wins;
      else if (*pj.verdict == Verdict::b) ++out.table.losses;
      else ++out.table.ties;
    }
    out.judgements.push_back(std::move(pj));
  }
  return out;
}

}  // namespace pedpipe
