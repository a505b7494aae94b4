// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include "support/toy_data.hpp"


#include "pedpipe/datapipe.hpp"

namespace pedpipe::testing {
namespace {

std::string word(Rng& rng, const std::string& alphabet, std::size_t lo, std::size_t hi) {
  const std::size_t len = lo + rng.below(hi - lo + 1);
  std::string w;
  for (std::size_t i = 0; i < len; ++i) w += alphabet[rng.below(alphabet.size())];
  return w;
}

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) out += (i ? " " : "") + parts[i];
  return out;
}

}  // namespace

TaskTag toy_task_tag(std::size_t task) {
  static const TaskTag tags[] = {TaskTag::medkqa, TaskTag::evidiag, TaskTag::trerecom};
  return tags[task % kToyTasks];
}

ToyPair toy_task_pair(std::size_t task, Rng& rng) {
  std::vector<std::string> words, answer;
  switch (task % kToyTasks) {
    case 0:
      for (int i = 0; i < 3; ++i) words.push_back(word(rng, "abcdefgh", 2, 4));
      answer.assign(words.rbegin(), words.rend());
      break;
    case 1:
      for (int i = 0; i < 3; ++i) words.push_back(word(rng, "0123456789", 2, 3));
      for (const auto& w : words) {
        std::string s = w;
        for (auto& c : s) c = static_cast<char>('0' + (c - '0' + 1) % 10);
        answer.push_back(s);
      }
      break;
    default:
      for (int i = 0; i < 2; ++i) words.push_back(word(rng, "QRSTUVWXYZ", 2, 3));
      for (const auto& w : words) {
        answer.push_back(w);
        answer.push_back(w);
      }
      break;
  }
  return {join(words), join(answer)};
}

std::vector<InstructionRecord> toy_task_records(std::size_t task, std::size_t n, std::uint64_t seed) {
  Rng rng(seed, 0x7461736b + task);
  std::vector<InstructionRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    const ToyPair p = toy_task_pair(task, rng);
    out.push_back({"t" + std::to_string(task) + "-" + std::to_string(i), toy_task_tag(task),
                   {{Role::user, p.question}, {Role::assistant, p.answer}}});
  }
  return out;
}

std::vector<InstructionRecord> toy_instructions(std::size_t n, std::uint64_t seed) {
  Rng rng(seed, 0x696e7374);
  std::vector<InstructionRecord> out;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t task = i % kToyTasks;
    const ToyPair p = toy_task_pair(task, rng);
    out.push_back({"toy-" + std::to_string(i), toy_task_tag(task),
                   {{Role::user, p.question}, {Role::assistant, p.answer}}});
  }
  return out;
}

std::vector<PreferenceText> toy_preference_texts(std::size_t n, std::uint64_t seed) {
  Rng rng(seed, 0x70726566);
  std::vector<PreferenceText> out;
  for (std::size_t i = 0; i < n; ++i) {
    const ToyPair p = toy_task_pair(i % kToyTasks, rng);
    std::string rejected = p.question;
    if (rejected == p.answer) rejected += " ?";
    out.push_back({"pref-" + std::to_string(i), p.question, p.answer, rejected});
  }
  return out;
}

std::vector<PreferenceRecord> toy_preference_records(std::size_t n, std::uint64_t seed) {
  std::vector<PreferenceRecord> out;
  for (const auto& t : toy_preference_texts(n, seed)) out.push_back(encode_preference(t));
  return out;
}

std::vector<CompletionDoc> toy_plain_corpus(std::size_t n, std::uint64_t seed) {
  static const char* subjects[] = {"the child", "the infant", "a toddler", "the baby"};
  static const char* verbs[] = {"has", "shows", "reports", "presents with"};
  static const char* findings[] = {"a mild fever", "a dry cough", "a skin rash", "poor appetite", "ear pain"};
  static const char* advice[] = {"rest and fluids help.", "see a doctor if it lasts.", "keep the child warm.",
                                 "check the temperature often."};
  Rng rng(seed, 0x706c6169);
  std::vector<CompletionDoc> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::string s = std::string(subjects[rng.below(4)]) + " " + verbs[rng.below(4)] + " " + findings[rng.below(5)] +
                    ", " + advice[rng.below(4)];
    out.push_back({s, DocSource::plain});
  }
  return out;
}

}  // namespace pedpipe::testing
