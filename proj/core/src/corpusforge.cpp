// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include "pedpipe/corpusforge.hpp"

#include <atomic>
#include <chrono>
#include <exception>
#include <fstream>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "pedpipe/errors.hpp"
#include "pedpipe/rng.hpp"

namespace pedpipe {

using nlohmann::json;

SeedExamplePool::SeedExamplePool(std::vector<SeedExample> examples) {
  for (auto& e : examples) add(std::move(e));
}

SeedExamplePool SeedExamplePool::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open seed pool " + path.string());
  SeedExamplePool pool;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      pool.add({j.at("raw").get<std::string>(), j.at("regularized").get<std::string>()});
    } catch (const std::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return pool;
}

void SeedExamplePool::add(SeedExample example) {
  for (const auto& e : examples_) {
    if (e.raw == example.raw) throw DataError("seed pool already holds this raw dialogue");
  }
  examples_.push_back(std::move(example));
}

void CallLog::record(CallLogEntry entry) {
  std::lock_guard lock(mutex_);
  entries_.push_back(std::move(entry));
}

std::vector<CallLogEntry> CallLog::entries() const {
  std::lock_guard lock(mutex_);
  return entries_;
}

std::size_t CallLog::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

void CallLog::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& e : entries()) {
    json j = {{"template", e.template_id},  {"prompt_tokens", e.prompt_tokens}, {"completion_tokens", e.completion_tokens},
              {"latency_ms", e.latency_ms}, {"dispatched", e.dispatched},      {"ok", e.ok}};
    if (!e.error.empty()) j["error"] = e.error;
    if (!e.dispatched) j["prompt"] = e.prompt;
    out << j.dump() << '\n';
  }
}

void save_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& e : entries) {
    out << json{{"id", e.id}, {"op", e.op}, {"status", e.status}, {"calls", e.calls}, {"detail", e.detail}}.dump()
        << '\n';
  }
}

void parallel_for(std::size_t n, std::size_t limit, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min(n, std::max<std::size_t>(1, limit));
  std::vector<std::exception_ptr> errors(n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) {
          try {
            fn(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::vector<std::string> parse_question_lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::size_t i = line.find_first_not_of(" \t\r");
    if (i == std::string::npos) continue;
    std::size_t j = i;
    while (j < line.size() && line[j] >= '0' && line[j] <= '9') ++j;
    if (j > i && j < line.size() && (line[j] == '.' || line[j] == ')')) {
      i = j + 1;
    } else if (line[i] == '-' || line[i] == '*') {
      ++i;
    }
    i = line.find_first_not_of(" \t", i);
    if (i == std::string::npos) continue;
    std::size_t end = line.find_last_not_of(" \t\r");
    out.push_back(line.substr(i, end - i + 1));
  }
  return out;
}

Forge::Forge(const PromptLibrary& prompts, GenerationBackend& backend, ForgeOptions options)
    : prompts_(prompts), backend_(backend), options_(options) {}

std::string Forge::call(const std::string& template_id, const std::map<std::string, std::string>& values) {
  const std::string prompt = prompts_.get(template_id).render(values);
  CallLogEntry entry;
  entry.template_id = template_id;
  entry.prompt_tokens = prompt.size();
  if (options_.dry_run) {
    entry.dispatched = false;
    entry.prompt = prompt;
    log_.record(std::move(entry));
    return {};
  }
  const auto start = std::chrono::steady_clock::now();
  try {
    std::string out = backend_.complete(prompt, options_.sampling);
    entry.completion_tokens = out.size();
    entry.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    log_.record(std::move(entry));
    return out;
  } catch (const std::exception& e) {
    entry.ok = false;
    entry.error = e.what();
    entry.latency_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    log_.record(std::move(entry));
    throw;
  }
}

RoleplayResult Forge::build_roleplay_instructions(const std::string& segment, std::size_t n_questions,
                                                  const std::string& id_prefix) {
  if (segment.empty()) throw ArgumentError("build_roleplay_instructions: empty disease segment");
  RoleplayResult out;
  out.manifest = {id_prefix, "roleplay", "ok", 0, ""};
  if (n_questions == 0) return out;

  std::vector<std::string> questions;
  try {
    ++out.manifest.calls;
    questions = parse_question_lines(call("inquirer", {{"segment", segment}, {"n_questions", std::to_string(n_questions)}}));
  } catch (const BackendError& e) {
    out.manifest.status = "failed";
    out.manifest.detail = std::string("inquirer: ") + e.what();
    return out;
  }
  if (questions.size() > n_questions) questions.resize(n_questions);

  std::vector<std::string> failures;
  for (std::size_t q = 0; q < questions.size(); ++q) {
    try {
      ++out.manifest.calls;
      std::string answer = call("expert_pediatrician", {{"segment", segment}, {"question", questions[q]}});
      out.records.push_back({id_prefix + "-q" + std::to_string(q + 1), TaskTag::medkqa,
                             {{Role::user, questions[q]}, {Role::assistant, std::move(answer)}}});
    } catch (const BackendError& e) {
      failures.push_back("question " + std::to_string(q + 1) + ": " + e.what());
    }
  }
  if (!failures.empty()) {
    out.manifest.status = out.records.empty() ? "failed" : "partial";
    for (const auto& f : failures) out.manifest.detail += (out.manifest.detail.empty() ? "" : "; ") + f;
  }
  return out;
}

RegularizeResult Forge::regularize_dialogue(const std::string& raw_dialogue, const SeedExamplePool& pool,
                                            std::uint64_t seed) {
  if (pool.size() < kRegularizerShots) {
    throw ArgumentError("regularize_dialogue: seed pool has " + std::to_string(pool.size()) + " examples, needs " +
                        std::to_string(kRegularizerShots));
  }
  RegularizeResult out;
  Rng rng(seed, 0x73686f74);
  out.shot_ids = rng.sample_without_replacement(pool.size(), kRegularizerShots);
  std::string examples;
  for (std::size_t k = 0; k < out.shot_ids.size(); ++k) {
    const auto& shot = pool.at(out.shot_ids[k]);
    if (k) examples += "\n";
    examples += "Example " + std::to_string(k + 1) + "\nOriginal:\n" + shot.raw + "\nRewritten:\n" + shot.regularized + "\n";
  }
  const std::map<std::string, std::string> values{{"examples", examples}, {"dialogue", raw_dialogue}};
  out.prompt = prompts_.get("regularizer").render(values);
  out.text = call("regularizer", values);
  return out;
}

ReconstructResult Forge::reconstruct_instruction(const InstructionRecord& record) {
  if (record.turns.size() < 2 || record.turns[0].role != Role::user || record.turns[1].role != Role::assistant) {
    throw ArgumentError("reconstruct_instruction: record '" + record.id + "' lacks an instruction/answer pair");
  }
  const std::string& instruction = record.turns[0].text;
  const std::string& answer = record.turns[1].text;
  if (instruction.empty()) throw ArgumentError("reconstruct_instruction: record '" + record.id + "' has an empty instruction");
  if (answer.empty()) throw ArgumentError("reconstruct_instruction: record '" + record.id + "' has an empty answer");

  ReconstructResult out;
  out.record = record;
  out.manifest = {record.id, "reconstruct", "ok", 0, ""};
  try {
    const std::map<std::string, std::string> v1{{"instruction", instruction}, {"answer", answer}};
    out.task1_prompt = prompts_.get("reconstruct_task1").render(v1);
    ++out.manifest.calls;
    std::string refined_instruction = call("reconstruct_task1", v1);
    const std::map<std::string, std::string> v2{{"refined_instruction", refined_instruction}, {"answer", answer}};
    out.task2_prompt = prompts_.get("reconstruct_task2").render(v2);
    ++out.manifest.calls;
    std::string refined_answer = call("reconstruct_task2", v2);
    out.record.turns[0].text = std::move(refined_instruction);
    out.record.turns[1].text = std::move(refined_answer);
    out.refined = true;
  } catch (const BackendError& e) {
    out.record = record;
    out.manifest.status = "unrefined";
    out.manifest.detail = e.what();
  }
  return out;
}

ExpandResult Forge::knowledge_expand(const InstructionRecord& record) {
  if (record.turns.size() < 2 || record.turns[0].role != Role::user || record.turns[1].role != Role::assistant) {
    throw ArgumentError("knowledge_expand: record '" + record.id + "' lacks an instruction/answer pair");
  }
  ExpandResult out;
  out.manifest = {record.id, "expand", "ok", 1, ""};
  try {
    std::string text = call("knowledge_expand", {{"instruction", record.turns[0].text}, {"answer", record.turns[1].text}});
    out.doc = CompletionDoc{std::move(text), DocSource::expanded};
  } catch (const BackendError& e) {
    out.manifest.status = "skipped";
    out.manifest.detail = e.what();
  }
  return out;
}

std::vector<RoleplayResult> Forge::roleplay_batch(const std::vector<std::string>& segments, std::size_t n_questions) {
  std::vector<RoleplayResult> out(segments.size());
  parallel_for(segments.size(), options_.max_in_flight, [&](std::size_t i) {
    out[i] = build_roleplay_instructions(segments[i], n_questions, "segment" + std::to_string(i + 1));
  });
  return out;
}

std::vector<ReconstructResult> Forge::reconstruct_batch(const std::vector<InstructionRecord>& records) {
  std::vector<ReconstructResult> out(records.size());
  parallel_for(records.size(), options_.max_in_flight, [&](std::size_t i) {
    try {
      out[i] = reconstruct_instruction(records[i]);
    } catch (const ArgumentError& e) {
      out[i].record = records[i];
      out[i].manifest = {records[i].id, "reconstruct", "rejected", 0, e.what()};
    }
  });
  return out;
}

std::vector<ExpandResult> Forge::expand_batch(const std::vector<InstructionRecord>& records) {
  std::vector<ExpandResult> out(records.size());
  parallel_for(records.size(), options_.max_in_flight, [&](std::size_t i) {
    try {
      out[i] = knowledge_expand(records[i]);
    } catch (const ArgumentError& e) {
      out[i].manifest = {records[i].id, "expand", "rejected", 0, e.what()};
    }
  });
  return out;
}

}  // namespace pedpipe
