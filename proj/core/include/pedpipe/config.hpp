// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

// Pipeline configuration. Resolution order, lowest first:
// built-in defaults < profile preset < config file < command-line overrides.
//
// Config files use a TOML subset: `[section]` headers, `key = value` lines,
// `#` comments; values are integers, reals, true/false or "strings".
// Sections: pipeline, model, cpt, fsft, dfpo, psft, corpus, eval.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pedpipe/adapters.hpp"
#include "pedpipe/model_config.hpp"
#include "pedpipe/objectives.hpp"

namespace pedpipe {

enum class Stage { cpt, fsft, dfpo, psft };
const char* to_string(Stage stage);
Stage stage_from_string(const std::string& name);
inline constexpr Stage kStages[] = {Stage::cpt, Stage::fsft, Stage::dfpo, Stage::psft};

enum class Profile { desk, paper };
const char* to_string(Profile profile);
Profile profile_from_string(const std::string& name);

struct StageConfig {
  Stage stage = Stage::cpt;
  std::size_t epochs = 1;
  double lr = 1e-6;
  std::size_t batch_size = 128;
  std::size_t max_seq_len = 4096;
  std::size_t warmup_steps = 0;
  std::size_t eval_interval = 0;  // 0 disables periodic evaluation
  std::uint64_t seed = 42;
  std::size_t max_steps = 0;      // 0 = run all epochs
  double val_fraction = 0.1;
  double weight_decay = 0.0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  double mix_ratio = 0.5;  // cpt hybrid packing
  DfpoConfig dfpo;         // dfpo only
  AdapterSpec adapters;    // psft only

  void validate() const;
  /// Recorded defaults for `stage` under `profile`.
  static StageConfig defaults(Stage stage, Profile profile);
};

struct CorpusConfig {
  std::string backend = "replay";  // replay | echo | remote
  std::string fixture;             // replay fixture path
  std::string endpoint;
  std::string model;
  double temperature = 0.7;
  std::size_t max_tokens = 1024;
  std::size_t max_in_flight = 4;
  double rate_limit = 1.0;  // calls per second
  std::size_t max_retries = 3;
  bool dry_run = false;
  std::size_t n_questions = 5;
};

struct EvalConfig {
  std::string tokenization = "auto";  // auto | char | whitespace
  std::size_t n_judges = 3;
  std::size_t max_new_tokens = 128;
};

struct PipelineConfig {
  Profile profile = Profile::desk;
  std::uint64_t seed = 42;
  ModelConfig model;
  StageConfig cpt, fsft, dfpo, psft;
  CorpusConfig corpus;
  EvalConfig eval;

  static PipelineConfig defaults(Profile profile);
  StageConfig& stage(Stage s);
  const StageConfig& stage(Stage s) const;
  /// Sets the pipeline seed and every stage seed.
  void set_seed(std::uint64_t seed);
  void validate() const;
  /// Every key in file syntax; parsing the result reproduces this config.
  std::string to_toml() const;
};

/// section -> key -> raw value text (strings unquoted).
using ConfigTable = std::map<std::string, std::map<std::string, std::string>>;

/// Throws ArgumentError with the line number on syntax errors.
ConfigTable parse_config_text(const std::string& text);
ConfigTable parse_config_file(const std::filesystem::path& path);

/// ArgumentError for unknown sections/keys or unparsable values.
void apply_setting(PipelineConfig& config, const std::string& section, const std::string& key, const std::string& value);
void apply_table(PipelineConfig& config, const ConfigTable& table);

struct ConfigSources {
  std::optional<Profile> profile;           // --profile
  std::optional<std::filesystem::path> file;  // --config
  std::vector<std::string> overrides;       // "section.key=value"
  std::optional<std::uint64_t> seed;        // --seed
};

/// Applies defaults < profile < file < overrides < seed. The file may name a
/// profile under [pipeline]; an explicit profile source wins.
PipelineConfig resolve_config(const ConfigSources& sources);

}  // namespace pedpipe
