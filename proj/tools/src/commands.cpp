// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include "commands.hpp"

#include <fstream>
#include <iostream>
#include <memory>

#include <json.hpp>

#include "pedpipe/backend.hpp"
#include "pedpipe/checkpoint.hpp"
#include "pedpipe/corpusforge.hpp"
#include "pedpipe/datapipe.hpp"
#include "pedpipe/errors.hpp"
#include "pedpipe/judging.hpp"
#include "pedpipe/metrics.hpp"
#include "pedpipe/prompts.hpp"
#include "pedpipe/records.hpp"
#include "pedpipe/routing.hpp"
#include "pedpipe/tokenizer.hpp"
#include "pedpipe/trainer.hpp"

namespace pedpipe::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

ParseMode mode(const Common& common) { return common.strict ? ParseMode::strict : ParseMode::lenient; }

void require_path(const fs::path& p, const char* flag) {
  if (p.empty()) throw ArgumentError(std::string("missing required ") + flag);
}

template <typename T>
std::vector<T> take(LoadResult<T> loaded, const fs::path& path) {
  if (!loaded.issues.empty()) {
    std::cerr << "warning: skipped " << loaded.issues.size() << " malformed line(s) in " << path.string() << "\n";
    for (std::size_t i = 0; i < loaded.issues.size() && i < 5; ++i)
      std::cerr << "  line " << loaded.issues[i].line << ": " << loaded.issues[i].message << "\n";
  }
  return std::move(loaded.records);
}

std::unique_ptr<GenerationBackend> make_backend(const CorpusConfig& c) {
  if (c.backend == "echo") return std::make_unique<EchoBackend>();
  if (c.backend == "replay") {
    if (c.fixture.empty()) throw ArgumentError("corpus.fixture must name a replay fixture file");
    return std::make_unique<ReplayBackend>(ReplayBackend::from_file(c.fixture));
  }
  if (c.backend == "remote") {
    RemoteConfig rc;
    rc.endpoint = c.endpoint;
    rc.model = c.model;
    rc.max_retries = c.max_retries;
    rc.rate_limit_per_second = c.rate_limit;
    return std::make_unique<RemoteBackend>(rc);
  }
  throw ArgumentError("unknown corpus.backend '" + c.backend + "' (expected replay, echo or remote)");
}

PromptLibrary prompts_from(const fs::path& dir) {
  return PromptLibrary::load(dir.empty() ? PromptLibrary::default_dir() : dir);
}

void print_report(const StageReport& r) {
  std::cout << to_string(r.stage) << ": " << r.steps << " steps";
  if (!r.train_losses.empty()) std::cout << ", last train loss " << r.train_losses.back();
  if (r.best_val_loss) std::cout << ", best val loss " << *r.best_val_loss << " at step " << r.best_step;
  std::cout << "\n";
  if (r.truncated_examples) std::cout << "  truncated examples: " << r.truncated_examples << "\n";
  if (r.stage == Stage::dfpo) {
    std::cout << "  margin accuracy " << r.initial_preference_accuracy << " -> " << r.final_preference_accuracy
              << ", logprob accuracy " << r.initial_logprob_accuracy << " -> " << r.final_logprob_accuracy << "\n";
  }
  if (r.stage == Stage::psft) {
    std::cout << "  trainable parameters " << r.trainable_parameters << " (base " << r.base_parameters
              << " frozen, " << r.freeze_audits << " audits)\n";
  }
  std::cout << "  checkpoint: " << r.checkpoint.string() << "\n";
}

std::vector<JudgeSample> load_judge_samples(const fs::path& path, ParseMode mode) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<JudgeSample> out;
  std::string line;
  std::size_t n = 0, skipped = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      out.push_back({j.at("id").get<std::string>(), j.at("question").get<std::string>(),
                     j.at("response_a").get<std::string>(), j.at("response_b").get<std::string>()});
    } catch (const json::exception& e) {
      if (mode == ParseMode::strict) throw DataError(path.string() + ":" + std::to_string(n) + ": " + e.what());
      ++skipped;
    }
  }
  if (skipped) std::cerr << "warning: skipped " << skipped << " malformed line(s) in " << path.string() << "\n";
  return out;
}

}  // namespace

PipelineConfig announce(const Common& common) {
  PipelineConfig config = resolve_config(common.sources);
  std::cout << "# resolved configuration\n" << config.to_toml() << "\n";
  std::cout.flush();
  return config;
}

int build_corpus(const Common& common, const BuildCorpusArgs& args) {
  const PipelineConfig config = announce(common);
  require_path(args.input, "--input");
  const auto backend = make_backend(config.corpus);
  const PromptLibrary prompts = prompts_from(args.prompts);
  ForgeOptions options;
  options.sampling = {config.corpus.temperature, config.corpus.max_tokens};
  options.dry_run = config.corpus.dry_run;
  options.max_in_flight = config.corpus.max_in_flight;
  Forge forge(prompts, *backend, options);

  const fs::path dir = common.out / "corpus";
  fs::create_directories(dir);
  std::vector<ManifestEntry> manifest;
  std::size_t produced = 0;
  fs::path output;

  if (args.op == "roleplay") {
    std::vector<std::string> segments;
    for (auto& d : take(load_plain_corpus(args.input, mode(common)), args.input)) segments.push_back(d.text);
    std::vector<InstructionRecord> records;
    for (auto& r : forge.roleplay_batch(segments, config.corpus.n_questions)) {
      records.insert(records.end(), r.records.begin(), r.records.end());
      manifest.push_back(r.manifest);
    }
    output = dir / "roleplay.jsonl";
    save_json_lines(output, records);
    produced = records.size();
  } else if (args.op == "regularize") {
    require_path(args.seed_pool, "--seed-pool");
    const SeedExamplePool pool = SeedExamplePool::load(args.seed_pool);
    const auto dialogues = take(load_plain_corpus(args.input, mode(common)), args.input);
    std::vector<CompletionDoc> docs;
    for (std::size_t i = 0; i < dialogues.size(); ++i) {
      const std::string id = "dialogue-" + std::to_string(i + 1);
      try {
        auto r = forge.regularize_dialogue(dialogues[i].text, pool, config.seed + i);
        docs.push_back({std::move(r.text), DocSource::plain});
        manifest.push_back({id, "regularize", "ok", 1, ""});
      } catch (const BackendError& e) {
        manifest.push_back({id, "regularize", "failed", 1, e.what()});
      }
    }
    output = dir / "regularized.jsonl";
    save_json_lines(output, docs);
    produced = docs.size();
  } else if (args.op == "reconstruct") {
    const auto records = take(load_instruction_records(args.input, mode(common)), args.input);
    std::vector<InstructionRecord> out;
    for (auto& r : forge.reconstruct_batch(records)) {
      out.push_back(r.record);
      manifest.push_back(r.manifest);
      produced += r.refined;
    }
    output = dir / "reconstructed.jsonl";
    save_json_lines(output, out);
  } else if (args.op == "expand") {
    const auto records = take(load_instruction_records(args.input, mode(common)), args.input);
    std::vector<CompletionDoc> docs;
    for (auto& r : forge.expand_batch(records)) {
      if (r.doc) docs.push_back(*r.doc);
      manifest.push_back(r.manifest);
    }
    output = dir / "expanded.jsonl";
    save_json_lines(output, docs);
    produced = docs.size();
  } else {
    throw ArgumentError("unknown --op '" + args.op + "'");
  }

  save_manifest(dir / "manifest.jsonl", manifest);
  forge.log().save(dir / "calls.jsonl");
  std::size_t not_ok = 0;
  for (const auto& m : manifest) not_ok += m.status != "ok";
  std::cout << args.op << ": " << manifest.size() << " inputs, " << produced << " outputs, " << not_ok
            << " not ok -> " << output.string() << "\n";

  const auto calls = forge.log().entries();
  const bool any_ok = std::any_of(calls.begin(), calls.end(), [](const CallLogEntry& e) { return e.ok; });
  if (!options.dry_run && !calls.empty() && !any_ok)
    throw BackendError("every backend call failed; first error: " + calls.front().error);
  return 0;
}

int pack(const Common& common, const PackArgs& args) {
  const PipelineConfig config = announce(common);
  const double ratio = args.mix_ratio.value_or(config.cpt.mix_ratio);
  std::vector<InstructionRecord> instructions;
  std::vector<CompletionDoc> plain;
  if (!args.instructions.empty())
    instructions = take(load_instruction_records(args.instructions, mode(common)), args.instructions);
  if (!args.plain.empty()) plain = take(load_plain_corpus(args.plain, mode(common)), args.plain);
  const auto docs = pack_hybrid_corpus(instructions, plain, ratio, {}, config.seed);
  fs::create_directories(common.out);
  const fs::path output = common.out / "cpt_corpus.jsonl";
  save_json_lines(output, docs);
  std::size_t converted = 0;
  for (const auto& d : docs) converted += d.source == DocSource::converted_instruction;
  std::cout << "packed " << docs.size() << " documents (" << converted << " converted instructions, "
            << docs.size() - converted << " plain) -> " << output.string() << "\n";
  return 0;
}

int train(const Common& common, const TrainArgs& args) {
  const PipelineConfig config = announce(common);
  const Stage stage = stage_from_string(args.stage);
  PipelineState::load(common.out).require_ready(stage);
  require_path(args.data, "--data");
  TrainingLog log(common.out / "train_log.jsonl");
  StageReport report;
  switch (stage) {
    case Stage::cpt:
      report = run_cpt(config, take(load_plain_corpus(args.data, mode(common)), args.data), common.out, &log);
      break;
    case Stage::fsft:
      report = run_fsft(config, take(load_instruction_records(args.data, mode(common)), args.data), common.out, &log);
      break;
    case Stage::dfpo:
      report = run_dfpo(config, take(load_preference_texts(args.data, mode(common)), args.data), common.out, &log);
      break;
    case Stage::psft:
      report = run_psft(config, take(load_instruction_records(args.data, mode(common)), args.data), common.out, &log);
      break;
  }
  print_report(report);
  return 0;
}

int eval(const Common& common, const EvalArgs& args) {
  const PipelineConfig config = announce(common);
  require_path(args.samples, "--samples");
  auto samples = take(load_eval_samples(args.samples, mode(common)), args.samples);
  if (!args.checkpoint.empty()) {
    const TransformerWeights weights = load_checkpoint(args.checkpoint);
    std::optional<AdapterSet> adapters;
    if (!args.adapters.empty()) adapters = load_adapter_checkpoint(args.adapters, &weights.config);
    GenerateOptions g;
    g.max_new_tokens = config.eval.max_new_tokens;
    g.seed = config.seed;
    for (auto& s : samples) {
      const InstructionRecord r{s.id, TaskTag::general, {{Role::user, s.prompt}, {Role::assistant, "-"}}};
      const SftExample ex = build_sft_example(r, 1, {}, weights.config.max_seq_len);
      s.candidate = detokenize(generate(weights, ex.prompt, g, adapters ? &*adapters : nullptr));
    }
    fs::create_directories(common.out);
    save_json_lines(common.out / "eval_samples.jsonl", samples);
  }
  const MetricReport report = evaluate_samples(samples, metric_tokenization_from_string(config.eval.tokenization));
  fs::create_directories(common.out);
  std::ofstream(common.out / "eval_report.json") << report.to_json() << "\n";
  for (const auto& name : metric_names()) {
    auto it = report.corpus.find(name);
    if (it != report.corpus.end()) std::printf("%-10s %8.3f\n", name.c_str(), it->second);
  }
  std::cout << "report: " << (common.out / "eval_report.json").string() << "\n";
  return 0;
}

int judge(const Common& common, const JudgeArgs& args) {
  const PipelineConfig config = announce(common);
  require_path(args.samples, "--samples");
  const auto samples = load_judge_samples(args.samples, mode(common));
  const PromptLibrary prompts = prompts_from(args.prompts);
  std::vector<std::unique_ptr<GenerationBackend>> owned;
  std::vector<GenerationBackend*> judges;
  for (std::size_t i = 0; i < config.eval.n_judges; ++i) {
    owned.push_back(make_backend(config.corpus));
    judges.push_back(owned.back().get());
  }
  const auto result =
      pairwise_winrate(samples, judges, prompts.get("judge"), config.seed, args.model_a, args.model_b, args.benchmark);
  fs::create_directories(common.out);
  std::ofstream(common.out / "winrate.json") << result.table.to_json() << "\n";
  std::cout << format_winrate_tables({result.table});
  if (!samples.empty() && result.table.judged() == 0) {
    std::string first;
    for (const auto& v : result.judgements.front().votes)
      if (!v.ok) first = v.error;
    throw BackendError("no sample could be judged; first error: " + first);
  }
  return 0;
}

int routing_report(const Common& common, const RoutingArgs& args) {
  announce(common);
  require_path(args.data, "--data");
  const fs::path base_path = args.checkpoint.empty() ? checkpoint_path(common.out, Stage::dfpo) : args.checkpoint;
  const fs::path adapter_path = args.adapters.empty() ? checkpoint_path(common.out, Stage::psft) : args.adapters;
  const TransformerWeights weights = load_checkpoint(base_path);
  const AdapterSet adapters = load_adapter_checkpoint(adapter_path, &weights.config);
  std::map<std::string, std::vector<TokenSeq>> tagged;
  for (const auto& r : take(load_instruction_records(args.data, mode(common)), args.data))
    tagged[to_string(r.task)].push_back(tokenize(r.turns.front().text));
  const RoutingReport report = pedpipe::routing_report(weights, adapters, tagged);
  fs::create_directories(common.out);
  std::ofstream(common.out / "routing.csv") << report.to_csv();
  std::cout << report.to_csv();
  return 0;
}

int inspect_checkpoint(const Common& common, const fs::path& path) {
  announce(common);
  std::cout << describe_checkpoint(pedpipe::inspect_checkpoint(path));
  return 0;
}

}  // namespace pedpipe::cli
