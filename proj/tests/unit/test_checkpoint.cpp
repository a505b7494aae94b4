// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <iterator>

#include "pedpipe/checkpoint.hpp"
#include "pedpipe/errors.hpp"

using namespace pedpipe;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "pedpipe_ckpt_tests";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const fs::path& p, const std::string& bytes) {
  std::ofstream out(p, std::ios::binary);
  out << bytes;
}

void require_same(const std::vector<NamedParam>& a, const std::vector<NamedParam>& b) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    REQUIRE(a[i].name == b[i].name);
    REQUIRE(a[i].tensor.shape() == b[i].tensor.shape());
    for (std::size_t j = 0; j < a[i].tensor.numel(); ++j) REQUIRE(a[i].tensor.data()[j] == b[i].tensor.data()[j]);
  }
}

}  // namespace

TEST_SUITE("checkpoint") {
  TEST_CASE("base weights round-trip exactly") {
    for (bool tied : {true, false}) {
      ModelConfig cfg = ModelConfig::toy();
      cfg.tie_weights = tied;
      Rng rng(31);
      const auto w = TransformerWeights::init(cfg, rng);
      const fs::path p = scratch(tied ? "tied.pgpt" : "untied.pgpt");
      save_checkpoint(p, w);
      const auto back = load_checkpoint(p);
      CHECK(back.config == cfg);
      require_same(w.parameters(), back.parameters());
    }
  }

  TEST_CASE("saving is byte-deterministic") {
    Rng r1(32), r2(32);
    save_checkpoint(scratch("a.pgpt"), TransformerWeights::init(ModelConfig::toy(), r1));
    save_checkpoint(scratch("b.pgpt"), TransformerWeights::init(ModelConfig::toy(), r2));
    CHECK(slurp(scratch("a.pgpt")) == slurp(scratch("b.pgpt")));
  }

  TEST_CASE("adapter checkpoints round-trip exactly") {
    const ModelConfig cfg = ModelConfig::toy();
    Rng rng(33);
    AdapterSpec spec;
    spec.placement = AdapterPlacement::all;
    spec.specific_experts = 2;
    spec.rank = 3;
    spec.alpha = 6.0;
    auto set = AdapterSet::attach(cfg, spec, rng);
    for (const auto& p : set.parameters())
      for (auto& v : Tensor(p.tensor).mutable_data()) v = static_cast<float>(rng.normal());
    const fs::path p = scratch("adapters.pgpt");
    save_adapter_checkpoint(p, set, cfg);
    const auto back = load_adapter_checkpoint(p, &cfg);
    CHECK(back.spec() == spec);
    require_same(set.parameters(), back.parameters());

    const auto info = inspect_checkpoint(p);
    CHECK(info.kind == CheckpointKind::adapters);
    CHECK(info.total_parameters == set.parameter_count());

    ModelConfig other = cfg;
    other.d_ff = 32;
    CHECK_THROWS_AS(load_adapter_checkpoint(p, &other), CheckpointError);
    CHECK_THROWS_AS(load_checkpoint(p), CheckpointError);
  }

  TEST_CASE("inspection lists every tensor") {
    Rng rng(34);
    const auto w = TransformerWeights::init(ModelConfig::toy(), rng);
    const fs::path p = scratch("inspect.pgpt");
    save_checkpoint(p, w);
    const auto info = inspect_checkpoint(p);
    CHECK(info.version == kCheckpointVersion);
    CHECK(info.kind == CheckpointKind::base);
    CHECK(info.tensors.size() == w.parameters().size());
    CHECK(info.total_parameters == w.parameter_count());
    const std::string text = describe_checkpoint(info);
    CHECK(text.find("tok_emb") != std::string::npos);
  }

  TEST_CASE("damaged files are refused") {
    Rng rng(35);
    const fs::path good = scratch("good.pgpt"), bad = scratch("bad.pgpt");
    save_checkpoint(good, TransformerWeights::init(ModelConfig::toy(), rng));
    const std::string bytes = slurp(good);

    std::string b = bytes;
    b[0] = 'X';
    spit(bad, b);
    CHECK_THROWS_AS(load_checkpoint(bad), CheckpointError);

    b = bytes;
    b[4] = 2;
    spit(bad, b);
    CHECK_THROWS_WITH_AS(load_checkpoint(bad), doctest::Contains("version"), CheckpointError);

    spit(bad, bytes.substr(0, bytes.size() - 3));
    CHECK_THROWS_AS(load_checkpoint(bad), CheckpointError);
    spit(bad, bytes.substr(0, 10));
    CHECK_THROWS_AS(load_checkpoint(bad), CheckpointError);
    spit(bad, bytes + "junk");
    CHECK_THROWS_AS(load_checkpoint(bad), CheckpointError);
    CHECK_THROWS_AS(load_checkpoint(scratch("missing.pgpt")), CheckpointError);
  }
}
