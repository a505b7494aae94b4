// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include "support/corpus_replay.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "pedpipe/backend.hpp"
#include "pedpipe/corpusforge.hpp"
#include "pedpipe/prompts.hpp"
#include "pedpipe/records.hpp"

namespace pedpipe::testing {

std::vector<std::string> replay_corpus_workflows(const std::filesystem::path& dir) {
  std::vector<std::string> failures;
  auto expect = [&](bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  };
  const nlohmann::json want = nlohmann::json::parse(std::ifstream(dir / "expected.json"));
  const PromptLibrary prompts = PromptLibrary::load(PEDPIPE_TEST_PROMPT_DIR);
  ReplayBackend backend = ReplayBackend::from_file(dir / "fixture.jsonl");
  Forge forge(prompts, backend);

  const auto& rp = want.at("roleplay");
  const auto roleplay = forge.build_roleplay_instructions(rp.at("segment").get<std::string>(),
                                                          rp.at("n_questions").get<std::size_t>(),
                                                          rp.at("id_prefix").get<std::string>());
  expect(roleplay.manifest.status == "ok", "roleplay status " + roleplay.manifest.status);
  expect(roleplay.manifest.calls == 1 + rp.at("records").size(), "roleplay call count");
  expect(roleplay.records.size() == rp.at("records").size(), "roleplay record count");
  for (std::size_t i = 0; i < std::min(roleplay.records.size(), rp.at("records").size()); ++i) {
    const auto& r = roleplay.records[i];
    const auto& e = rp.at("records")[i];
    expect(r.id == e.at("id").get<std::string>(), "roleplay id " + r.id);
    expect(r.turns.at(0).text == e.at("question").get<std::string>(), "roleplay question " + r.id);
    expect(r.turns.at(1).text == e.at("answer").get<std::string>(), "roleplay answer " + r.id);
  }

  const auto& rg = want.at("regularize");
  const auto pool = SeedExamplePool::load(dir / "seed_pool.jsonl");
  const auto reg = forge.regularize_dialogue(rg.at("dialogue").get<std::string>(), pool, rg.at("seed").get<std::uint64_t>());
  expect(reg.text == rg.at("text").get<std::string>(), "regularized text");
  expect(reg.shot_ids == rg.at("shot_ids").get<std::vector<std::size_t>>(), "regularizer shot ids");
  expect(reg.shot_ids.size() == kRegularizerShots, "regularizer shot count");
  expect(std::set<std::size_t>(reg.shot_ids.begin(), reg.shot_ids.end()).size() == kRegularizerShots,
         "regularizer shots are not distinct");

  const auto records = load_instruction_records(dir / "records.jsonl", ParseMode::strict).records;
  const auto& rc = want.at("reconstruct");
  const auto rec = forge.reconstruct_instruction(records.at(0));
  expect(rec.refined, "reconstruct did not refine");
  expect(rec.record.turns.at(0).text == rc.at("instruction").get<std::string>(), "reconstructed instruction");
  expect(rec.record.turns.at(1).text == rc.at("answer").get<std::string>(), "reconstructed answer");
  expect(rec.task2_prompt.find(rc.at("task1_output").get<std::string>()) != std::string::npos,
         "task 2 prompt lacks the task 1 output");

  const auto exp = forge.knowledge_expand(records.at(0));
  expect(exp.doc.has_value() && exp.doc->text == want.at("expand").at("text").get<std::string>(), "expanded text");
  expect(exp.doc.has_value() && exp.doc->source == DocSource::expanded, "expanded doc source");
  return failures;
}

}  // namespace pedpipe::testing
