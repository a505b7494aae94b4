// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>
#include <set>

#include <CLI11.hpp>

#include "commands.hpp"
#include "pedpipe/errors.hpp"
#include "suggest.hpp"

using namespace pedpipe;
using namespace pedpipe::cli;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kAborted = 3, kBackend = 4 };

void add_common(CLI::App& app, Common& common, std::string& profile, std::vector<std::string>& sets,
                std::uint64_t& seed) {
  app.add_option("--config", common.sources.file, "Configuration file");
  app.add_option("--profile", profile, "Default set")->check(CLI::IsMember({"desk", "paper"}));
  app.add_option("--seed", seed, "Seed for every random stream");
  app.add_option("--out", common.out, "Output directory")->capture_default_str();
  app.add_flag("--strict", common.strict, "Reject malformed input lines instead of skipping them");
  app.add_option("--set", sets, "Override one setting: section.key=value")->allow_extra_args(false);
}

std::vector<std::string> known_flags(const CLI::App& app) {
  std::vector<std::string> out;
  for (const CLI::Option* o : app.get_options())
    for (const auto& n : o->get_lnames()) out.push_back("--" + n);
  for (const CLI::App* sub : app.get_subcommands({}))
    for (const CLI::Option* o : sub->get_options())
      for (const auto& n : o->get_lnames()) out.push_back("--" + n);
  return out;
}

void suggest(const CLI::App& app, int argc, char** argv) {
  const auto flags = known_flags(app);
  const std::set<std::string> known(flags.begin(), flags.end());
  for (int i = 1; i < argc; ++i) {
    std::string arg = argv[i];
    if (arg.rfind("--", 0) != 0) continue;
    arg = arg.substr(0, arg.find('='));
    if (known.count(arg)) continue;
    if (auto m = closest_match(arg, flags)) std::cerr << "unknown flag " << arg << "; did you mean " << *m << "?\n";
  }
  if (argc > 1 && argv[1][0] != '-') {
    std::vector<std::string> names;
    for (const CLI::App* sub : app.get_subcommands({})) names.push_back(sub->get_name());
    const std::string word = argv[1];
    if (std::find(names.begin(), names.end(), word) == names.end())
      if (auto m = closest_match(word, names)) std::cerr << "unknown command " << word << "; did you mean " << *m << "?\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Staged training, corpus building and evaluation for small pediatric assistants", "pedpipe"};
  app.require_subcommand(1);
  app.fallthrough();

  Common common;
  std::string profile;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  add_common(app, common, profile, sets, seed);

  BuildCorpusArgs corpus_args;
  auto* build = app.add_subcommand("build-corpus", "Run a corpus workflow against the configured backend");
  build->add_option("--op", corpus_args.op, "Workflow")
      ->required()
      ->check(CLI::IsMember({"roleplay", "regularize", "reconstruct", "expand"}));
  build->add_option("--input", corpus_args.input, "Input JSONL (segments, dialogues or instruction records)");
  build->add_option("--seed-pool", corpus_args.seed_pool, "Regularizer demonstrations (JSONL raw/regularized)");
  build->add_option("--prompts", corpus_args.prompts, "Prompt template directory");

  PackArgs pack_args;
  auto* pack_cmd = app.add_subcommand("pack", "Build the hybrid pre-training corpus");
  pack_cmd->add_option("--instructions", pack_args.instructions, "Instruction records JSONL");
  pack_cmd->add_option("--plain", pack_args.plain, "Plain documents JSONL");
  pack_cmd->add_option("--mix-ratio", pack_args.mix_ratio, "Fraction of documents that are converted instructions")
      ->check(CLI::Range(0.0, 1.0));

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Run one training stage");
  train_cmd->add_option("--stage", train_args.stage, "Stage")
      ->required()
      ->check(CLI::IsMember({"cpt", "fsft", "dfpo", "psft"}));
  train_cmd->add_option("--data", train_args.data, "Training data JSONL for the stage");

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Score candidates against references");
  eval_cmd->add_option("--samples", eval_args.samples, "Samples JSONL (id, prompt, reference, candidate)");
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "Generate candidates with this base checkpoint");
  eval_cmd->add_option("--adapters", eval_args.adapters, "Adapter checkpoint used while generating");

  JudgeArgs judge_args;
  auto* judge_cmd = app.add_subcommand("judge", "Pairwise win rates from judge backends");
  judge_cmd->add_option("--samples", judge_args.samples, "JSONL (id, question, response_a, response_b)");
  judge_cmd->add_option("--prompts", judge_args.prompts, "Prompt template directory");
  judge_cmd->add_option("--model-a", judge_args.model_a, "Name of model A")->capture_default_str();
  judge_cmd->add_option("--model-b", judge_args.model_b, "Name of model B")->capture_default_str();
  judge_cmd->add_option("--benchmark", judge_args.benchmark, "Benchmark label");

  RoutingArgs routing_args;
  auto* routing_cmd = app.add_subcommand("routing-report", "Mean gate weight per task and expert");
  routing_cmd->add_option("--data", routing_args.data, "Task-tagged instruction records JSONL");
  routing_cmd->add_option("--checkpoint", routing_args.checkpoint, "Base checkpoint (default <out>/dfpo.pgpt)");
  routing_cmd->add_option("--adapters", routing_args.adapters, "Adapters (default <out>/psft_adapters.pgpt)");

  std::filesystem::path inspect_path;
  auto* inspect_cmd = app.add_subcommand("inspect-checkpoint", "Print a checkpoint manifest");
  inspect_cmd->add_option("path", inspect_path, "Checkpoint file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    suggest(app, argc, argv);
    return kUsage;
  }

  try {
    if (!profile.empty()) common.sources.profile = profile_from_string(profile);
    if (app.count("--seed")) common.sources.seed = seed;
    common.sources.overrides = sets;

    if (*build) return build_corpus(common, corpus_args);
    if (*pack_cmd) return pack(common, pack_args);
    if (*train_cmd) return train(common, train_args);
    if (*eval_cmd) return eval(common, eval_args);
    if (*judge_cmd) return judge(common, judge_args);
    if (*routing_cmd) return routing_report(common, routing_args);
    if (*inspect_cmd) return inspect_checkpoint(common, inspect_path);
  } catch (const TrainingAborted& e) {
    std::cerr << "error: training aborted: " << e.what() << "\n";
    if (!e.checkpoint().empty()) std::cerr << "last good weights: " << e.checkpoint() << "\n";
    return kAborted;
  } catch (const BackendError& e) {
    std::cerr << "error: backend: " << e.what() << "\n";
    return kBackend;
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}
