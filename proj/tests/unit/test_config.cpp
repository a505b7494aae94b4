// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "pedpipe/config.hpp"
#include "pedpipe/errors.hpp"

using namespace pedpipe;
namespace fs = std::filesystem;

namespace {

fs::path write_config(const std::string& name, const std::string& text) {
  const fs::path dir = fs::temp_directory_path() / "pedpipe_config_tests";
  fs::create_directories(dir);
  std::ofstream(dir / name) << text;
  return dir / name;
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("the full-scale profile carries the recorded stage settings") {
    const auto c = PipelineConfig::defaults(Profile::paper);
    CHECK(c.cpt.epochs == 1);
    CHECK(c.cpt.lr == 1e-6);
    CHECK(c.cpt.batch_size == 128);
    CHECK(c.cpt.max_seq_len == 4096);
    CHECK(c.fsft.epochs == 3);
    CHECK(c.fsft.lr == 5e-5);
    CHECK(c.fsft.batch_size == 64);
    CHECK(c.fsft.max_seq_len == 2048);
    CHECK(c.fsft.warmup_steps == 200);
    CHECK(c.fsft.eval_interval == 100);
    CHECK(c.dfpo.epochs == 5);
    CHECK(c.dfpo.lr == 1e-6);
    CHECK(c.dfpo.batch_size == 64);
    CHECK(c.psft.epochs == 3);
    CHECK(c.psft.lr == 1e-6);
    CHECK(c.psft.batch_size == 32);
    CHECK(c.psft.adapters.specific_experts == 3);
    CHECK(c.psft.adapters.rank == 8);
    CHECK(c.psft.adapters.alpha == 16.0);
    CHECK(c.psft.adapters.dropout == 0.05);
    CHECK(c.dfpo.dfpo.beta == 0.1);
    CHECK(c.dfpo.dfpo.mu == 1.0);
    CHECK(c.seed == 42);
  }

  TEST_CASE("desk profile is small enough for a laptop") {
    const auto c = PipelineConfig::defaults(Profile::desk);
    CHECK(c.model.d_model <= 64);
    CHECK(c.cpt.max_steps == 200);
    CHECK(c.fsft.max_steps == 2000);
    CHECK(c.dfpo.max_steps == 300);
    CHECK_NOTHROW(c.validate());
  }

  TEST_CASE("printed configs parse back to the same config") {
    for (Profile p : {Profile::desk, Profile::paper}) {
      auto c = PipelineConfig::defaults(p);
      c.corpus.endpoint = "https://example.invalid/v1/chat/completions";
      c.psft.adapters.placement = AdapterPlacement::all;
      c.cpt.mix_ratio = 0.3;
      PipelineConfig back = PipelineConfig::defaults(Profile::desk);
      apply_table(back, parse_config_text(c.to_toml()));
      CHECK(back.to_toml() == c.to_toml());
    }
  }

  TEST_CASE("sources apply in precedence order") {
    const fs::path file = write_config("run.toml",
                                       "# run settings\n[pipeline]\nprofile = \"paper\"\n\n[fsft]\nlr = 0.01\n"
                                       "batch_size = 4 # small\n[corpus]\nbackend = \"echo\"\n");
    ConfigSources src;
    src.file = file;
    auto c = resolve_config(src);
    CHECK(c.profile == Profile::paper);
    CHECK(c.fsft.lr == 0.01);
    CHECK(c.fsft.batch_size == 4);
    CHECK(c.fsft.epochs == 3);
    CHECK(c.corpus.backend == "echo");

    src.profile = Profile::desk;
    src.overrides = {"fsft.lr=0.5", "psft.rank=2"};
    src.seed = 7;
    c = resolve_config(src);
    CHECK(c.profile == Profile::desk);
    CHECK(c.fsft.lr == 0.5);
    CHECK(c.fsft.batch_size == 4);
    CHECK(c.psft.adapters.rank == 2);
    CHECK(c.seed == 7);
    for (Stage s : kStages) CHECK(c.stage(s).seed == 7);
  }

  TEST_CASE("bad input is reported precisely") {
    CHECK_THROWS_WITH_AS(parse_config_text("[a]\nx = 1\nbroken\n"), doctest::Contains("line 3"), ArgumentError);
    CHECK_THROWS_AS(parse_config_text("x = 1\n"), ArgumentError);
    PipelineConfig c;
    CHECK_THROWS_WITH_AS(apply_setting(c, "fsft", "learning_rate", "1"), doctest::Contains("fsft.learning_rate"),
                         ArgumentError);
    CHECK_THROWS_AS(apply_setting(c, "fsft", "lr", "fast"), ArgumentError);
    CHECK_THROWS_AS(apply_setting(c, "fsft", "batch_size", "-2"), ArgumentError);
    ConfigSources src;
    src.overrides = {"nodot=1"};
    CHECK_THROWS_AS(resolve_config(src), ArgumentError);
    src.overrides = {"cpt.mix_ratio=2"};
    CHECK_THROWS_AS(resolve_config(src), ArgumentError);
    CHECK_THROWS_AS(stage_from_string("rlhf"), ArgumentError);
    CHECK_THROWS_AS(profile_from_string("huge"), ArgumentError);
  }
}
