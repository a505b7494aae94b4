// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include "pedpipe/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "pedpipe/errors.hpp"

namespace pedpipe {

const char* to_string(Stage stage) {
  switch (stage) {
    case Stage::cpt: return "cpt";
    case Stage::fsft: return "fsft";
    case Stage::dfpo: return "dfpo";
    case Stage::psft: return "psft";
  }
  return "?";
}

Stage stage_from_string(const std::string& name) {
  for (Stage s : kStages)
    if (name == to_string(s)) return s;
  throw ArgumentError("unknown stage '" + name + "' (expected cpt, fsft, dfpo or psft)");
}

const char* to_string(Profile profile) { return profile == Profile::desk ? "desk" : "paper"; }

Profile profile_from_string(const std::string& name) {
  if (name == "desk") return Profile::desk;
  if (name == "paper") return Profile::paper;
  throw ArgumentError("unknown profile '" + name + "' (expected desk or paper)");
}

void StageConfig::validate() const {
  const std::string who = std::string("[") + to_string(stage) + "] ";
  if (epochs == 0) throw ArgumentError(who + "epochs must be positive");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ArgumentError(who + "lr must be a non-negative number");
  if (batch_size == 0) throw ArgumentError(who + "batch_size must be positive");
  if (max_seq_len < 2) throw ArgumentError(who + "max_seq_len must be at least 2");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ArgumentError(who + "val_fraction must be in (0, 1)");
  if (!(mix_ratio >= 0.0 && mix_ratio <= 1.0)) throw ArgumentError(who + "mix_ratio must be in [0, 1]");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ArgumentError(who + "optimizer betas must be in [0, 1)");
  }
  if (!(eps > 0.0)) throw ArgumentError(who + "eps must be positive");
  if (!(weight_decay >= 0.0)) throw ArgumentError(who + "weight_decay must be non-negative");
  if (stage == Stage::dfpo) dfpo.validate();
  if (stage == Stage::psft) adapters.validate();
}

StageConfig StageConfig::defaults(Stage stage, Profile profile) {
  StageConfig c;
  c.stage = stage;
  switch (stage) {
    case Stage::cpt:
      c.epochs = 1;
      c.lr = 1e-6;
      c.batch_size = 128;
      c.max_seq_len = 4096;
      break;
    case Stage::fsft:
      c.epochs = 3;
      c.lr = 5e-5;
      c.batch_size = 64;
      c.max_seq_len = 2048;
      c.warmup_steps = 200;
      c.eval_interval = 100;
      break;
    case Stage::dfpo:
      c.epochs = 5;
      c.lr = 1e-6;
      c.batch_size = 64;
      c.max_seq_len = 2048;
      c.eval_interval = 100;
      break;
    case Stage::psft:
      c.epochs = 3;
      c.lr = 1e-6;
      c.batch_size = 32;
      c.max_seq_len = 2048;
      c.eval_interval = 100;
      break;
  }
  if (profile == Profile::desk) {
    switch (stage) {
      case Stage::cpt:
        c.lr = 3e-3;
        c.batch_size = 8;
        c.max_seq_len = 256;
        c.max_steps = 200;
        break;
      case Stage::fsft:
        c.lr = 3e-3;
        c.batch_size = 8;
        c.max_seq_len = 192;
        c.warmup_steps = 20;
        c.eval_interval = 50;
        c.epochs = 500;
        c.max_steps = 2000;
        break;
      case Stage::dfpo:
        c.lr = 1e-3;
        c.batch_size = 4;
        c.max_seq_len = 192;
        c.eval_interval = 50;
        c.epochs = 100;
        c.max_steps = 300;
        break;
      case Stage::psft:
        c.lr = 1e-2;
        c.batch_size = 8;
        c.max_seq_len = 192;
        c.eval_interval = 50;
        c.epochs = 100;
        c.max_steps = 300;
        break;
    }
  }
  return c;
}

PipelineConfig PipelineConfig::defaults(Profile profile) {
  PipelineConfig c;
  c.profile = profile;
  if (profile == Profile::desk) {
    c.model.d_model = 32;
    c.model.n_layers = 2;
    c.model.n_heads = 2;
    c.model.d_ff = 64;
    c.model.max_seq_len = 256;
  } else {
    c.model.max_seq_len = 4096;
  }
  for (Stage s : kStages) c.stage(s) = StageConfig::defaults(s, profile);
  c.set_seed(c.seed);
  return c;
}

StageConfig& PipelineConfig::stage(Stage s) {
  switch (s) {
    case Stage::cpt: return cpt;
    case Stage::fsft: return fsft;
    case Stage::dfpo: return dfpo;
    case Stage::psft: return psft;
  }
  return cpt;
}

const StageConfig& PipelineConfig::stage(Stage s) const { return const_cast<PipelineConfig*>(this)->stage(s); }

void PipelineConfig::set_seed(std::uint64_t value) {
  seed = value;
  for (Stage s : kStages) stage(s).seed = value;
}

void PipelineConfig::validate() const {
  model.validate();
  for (Stage s : kStages) {
    const auto& st = stage(s);
    st.validate();
    if (st.max_seq_len > model.max_seq_len) {
      throw ArgumentError(std::string("[") + to_string(s) + "] max_seq_len " + std::to_string(st.max_seq_len) +
                          " exceeds the model context " + std::to_string(model.max_seq_len));
    }
  }
  if (corpus.backend != "replay" && corpus.backend != "echo" && corpus.backend != "remote") {
    throw ArgumentError("[corpus] backend must be replay, echo or remote");
  }
  if (corpus.max_in_flight == 0) throw ArgumentError("[corpus] max_in_flight must be positive");
  if (eval.tokenization != "auto" && eval.tokenization != "char" && eval.tokenization != "whitespace") {
    throw ArgumentError("[eval] tokenization must be auto, char or whitespace");
  }
  if (eval.n_judges == 0 || eval.n_judges % 2 == 0) throw ArgumentError("[eval] n_judges must be odd");
}

namespace {

std::string fmt_real(double v) {
  char buf[40];
  const auto end = std::to_chars(buf, buf + sizeof buf, v).ptr;
  std::string s(buf, end);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out + "\"";
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::size_t as_size(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
    const auto n = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return static_cast<std::size_t>(n);
  } catch (const std::exception&) {
    throw ArgumentError(key + ": expected a non-negative integer, got '" + v + "'");
  }
}

double as_real(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ArgumentError(key + ": expected a number, got '" + v + "'");
  }
}

bool as_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  throw ArgumentError(key + ": expected true or false, got '" + v + "'");
}

using Setter = std::function<void(PipelineConfig&, const std::string&)>;

void add_stage_keys(std::map<std::string, Setter>& keys, Stage s) {
  const std::string p = std::string(to_string(s)) + ".";
  auto st = [s](PipelineConfig& c) -> StageConfig& { return c.stage(s); };
  keys[p + "epochs"] = [=](PipelineConfig& c, const std::string& v) { st(c).epochs = as_size(p + "epochs", v); };
  keys[p + "lr"] = [=](PipelineConfig& c, const std::string& v) { st(c).lr = as_real(p + "lr", v); };
  keys[p + "batch_size"] = [=](PipelineConfig& c, const std::string& v) { st(c).batch_size = as_size(p + "batch_size", v); };
  keys[p + "max_seq_len"] = [=](PipelineConfig& c, const std::string& v) { st(c).max_seq_len = as_size(p + "max_seq_len", v); };
  keys[p + "warmup_steps"] = [=](PipelineConfig& c, const std::string& v) { st(c).warmup_steps = as_size(p + "warmup_steps", v); };
  keys[p + "eval_interval"] = [=](PipelineConfig& c, const std::string& v) { st(c).eval_interval = as_size(p + "eval_interval", v); };
  keys[p + "max_steps"] = [=](PipelineConfig& c, const std::string& v) { st(c).max_steps = as_size(p + "max_steps", v); };
  keys[p + "val_fraction"] = [=](PipelineConfig& c, const std::string& v) { st(c).val_fraction = as_real(p + "val_fraction", v); };
  keys[p + "weight_decay"] = [=](PipelineConfig& c, const std::string& v) { st(c).weight_decay = as_real(p + "weight_decay", v); };
  keys[p + "beta1"] = [=](PipelineConfig& c, const std::string& v) { st(c).beta1 = as_real(p + "beta1", v); };
  keys[p + "beta2"] = [=](PipelineConfig& c, const std::string& v) { st(c).beta2 = as_real(p + "beta2", v); };
  keys[p + "eps"] = [=](PipelineConfig& c, const std::string& v) { st(c).eps = as_real(p + "eps", v); };
  if (s == Stage::cpt) {
    keys[p + "mix_ratio"] = [=](PipelineConfig& c, const std::string& v) { st(c).mix_ratio = as_real(p + "mix_ratio", v); };
  }
  if (s == Stage::dfpo) {
    keys[p + "beta"] = [=](PipelineConfig& c, const std::string& v) { st(c).dfpo.beta = as_real(p + "beta", v); };
    keys[p + "mu"] = [=](PipelineConfig& c, const std::string& v) { st(c).dfpo.mu = as_real(p + "mu", v); };
  }
  if (s == Stage::psft) {
    keys[p + "specific_experts"] = [=](PipelineConfig& c, const std::string& v) {
      st(c).adapters.specific_experts = as_size(p + "specific_experts", v);
    };
    keys[p + "rank"] = [=](PipelineConfig& c, const std::string& v) { st(c).adapters.rank = as_size(p + "rank", v); };
    keys[p + "alpha"] = [=](PipelineConfig& c, const std::string& v) { st(c).adapters.alpha = as_real(p + "alpha", v); };
    keys[p + "dropout"] = [=](PipelineConfig& c, const std::string& v) { st(c).adapters.dropout = as_real(p + "dropout", v); };
    keys[p + "placement"] = [=](PipelineConfig& c, const std::string& v) {
      st(c).adapters.placement = adapter_placement_from_string(v);
    };
    keys[p + "noise"] = [=](PipelineConfig& c, const std::string& v) { st(c).adapters.noise = as_bool(p + "noise", v); };
  }
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> kSetters = [] {
    std::map<std::string, Setter> k;
    k["pipeline.profile"] = [](PipelineConfig& c, const std::string& v) { c.profile = profile_from_string(v); };
    k["pipeline.seed"] = [](PipelineConfig& c, const std::string& v) { c.set_seed(as_size("pipeline.seed", v)); };
    k["model.vocab_size"] = [](PipelineConfig& c, const std::string& v) { c.model.vocab_size = as_size("model.vocab_size", v); };
    k["model.d_model"] = [](PipelineConfig& c, const std::string& v) { c.model.d_model = as_size("model.d_model", v); };
    k["model.n_layers"] = [](PipelineConfig& c, const std::string& v) { c.model.n_layers = as_size("model.n_layers", v); };
    k["model.n_heads"] = [](PipelineConfig& c, const std::string& v) { c.model.n_heads = as_size("model.n_heads", v); };
    k["model.d_ff"] = [](PipelineConfig& c, const std::string& v) { c.model.d_ff = as_size("model.d_ff", v); };
    k["model.max_seq_len"] = [](PipelineConfig& c, const std::string& v) { c.model.max_seq_len = as_size("model.max_seq_len", v); };
    k["model.tie_weights"] = [](PipelineConfig& c, const std::string& v) { c.model.tie_weights = as_bool("model.tie_weights", v); };
    for (Stage s : kStages) add_stage_keys(k, s);
    k["corpus.backend"] = [](PipelineConfig& c, const std::string& v) { c.corpus.backend = v; };
    k["corpus.fixture"] = [](PipelineConfig& c, const std::string& v) { c.corpus.fixture = v; };
    k["corpus.endpoint"] = [](PipelineConfig& c, const std::string& v) { c.corpus.endpoint = v; };
    k["corpus.model"] = [](PipelineConfig& c, const std::string& v) { c.corpus.model = v; };
    k["corpus.temperature"] = [](PipelineConfig& c, const std::string& v) { c.corpus.temperature = as_real("corpus.temperature", v); };
    k["corpus.max_tokens"] = [](PipelineConfig& c, const std::string& v) { c.corpus.max_tokens = as_size("corpus.max_tokens", v); };
    k["corpus.max_in_flight"] = [](PipelineConfig& c, const std::string& v) { c.corpus.max_in_flight = as_size("corpus.max_in_flight", v); };
    k["corpus.rate_limit"] = [](PipelineConfig& c, const std::string& v) { c.corpus.rate_limit = as_real("corpus.rate_limit", v); };
    k["corpus.max_retries"] = [](PipelineConfig& c, const std::string& v) { c.corpus.max_retries = as_size("corpus.max_retries", v); };
    k["corpus.dry_run"] = [](PipelineConfig& c, const std::string& v) { c.corpus.dry_run = as_bool("corpus.dry_run", v); };
    k["corpus.n_questions"] = [](PipelineConfig& c, const std::string& v) { c.corpus.n_questions = as_size("corpus.n_questions", v); };
    k["eval.tokenization"] = [](PipelineConfig& c, const std::string& v) { c.eval.tokenization = v; };
    k["eval.n_judges"] = [](PipelineConfig& c, const std::string& v) { c.eval.n_judges = as_size("eval.n_judges", v); };
    k["eval.max_new_tokens"] = [](PipelineConfig& c, const std::string& v) { c.eval.max_new_tokens = as_size("eval.max_new_tokens", v); };
    return k;
  }();
  return kSetters;
}

}  // namespace

std::string PipelineConfig::to_toml() const {
  std::ostringstream os;
  os << "[pipeline]\nprofile = " << quote(to_string(profile)) << "\nseed = " << seed << "\n\n";
  os << "[model]\nvocab_size = " << model.vocab_size << "\nd_model = " << model.d_model << "\nn_layers = "
     << model.n_layers << "\nn_heads = " << model.n_heads << "\nd_ff = " << model.d_ff
     << "\nmax_seq_len = " << model.max_seq_len << "\ntie_weights = " << (model.tie_weights ? "true" : "false")
     << "\n";
  for (Stage s : kStages) {
    const auto& st = stage(s);
    os << "\n[" << to_string(s) << "]\n"
       << "epochs = " << st.epochs << "\nlr = " << fmt_real(st.lr) << "\nbatch_size = " << st.batch_size
       << "\nmax_seq_len = " << st.max_seq_len << "\nwarmup_steps = " << st.warmup_steps
       << "\neval_interval = " << st.eval_interval << "\nmax_steps = " << st.max_steps
       << "\nval_fraction = " << fmt_real(st.val_fraction) << "\nweight_decay = " << fmt_real(st.weight_decay)
       << "\nbeta1 = " << fmt_real(st.beta1) << "\nbeta2 = " << fmt_real(st.beta2) << "\neps = " << fmt_real(st.eps)
       << "\n";
    if (s == Stage::cpt) os << "mix_ratio = " << fmt_real(st.mix_ratio) << "\n";
    if (s == Stage::dfpo) os << "beta = " << fmt_real(st.dfpo.beta) << "\nmu = " << fmt_real(st.dfpo.mu) << "\n";
    if (s == Stage::psft) {
      const auto& a = st.adapters;
      os << "specific_experts = " << a.specific_experts << "\nrank = " << a.rank << "\nalpha = " << fmt_real(a.alpha)
         << "\ndropout = " << fmt_real(a.dropout) << "\nplacement = " << quote(to_string(a.placement))
         << "\nnoise = " << (a.noise ? "true" : "false") << "\n";
    }
  }
  os << "\n[corpus]\nbackend = " << quote(corpus.backend) << "\nfixture = " << quote(corpus.fixture)
     << "\nendpoint = " << quote(corpus.endpoint) << "\nmodel = " << quote(corpus.model)
     << "\ntemperature = " << fmt_real(corpus.temperature) << "\nmax_tokens = " << corpus.max_tokens
     << "\nmax_in_flight = " << corpus.max_in_flight << "\nrate_limit = " << fmt_real(corpus.rate_limit)
     << "\nmax_retries = " << corpus.max_retries << "\ndry_run = " << (corpus.dry_run ? "true" : "false")
     << "\nn_questions = " << corpus.n_questions << "\n";
  os << "\n[eval]\ntokenization = " << quote(eval.tokenization) << "\nn_judges = " << eval.n_judges
     << "\nmax_new_tokens = " << eval.max_new_tokens << "\n";
  return os.str();
}

ConfigTable parse_config_text(const std::string& text) {
  ConfigTable table;
  std::istringstream in(text);
  std::string raw, section;
  std::size_t number = 0;
  while (std::getline(in, raw)) {
    ++number;
    const std::string where = "config line " + std::to_string(number) + ": ";
    std::string line;
    bool in_string = false;
    for (char c : raw) {
      if (c == '"') in_string = !in_string;
      if (c == '#' && !in_string) break;
      line.push_back(c);
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ArgumentError(where + "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      table[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ArgumentError(where + "expected key = value");
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ArgumentError(where + "empty key");
    if (section.empty()) throw ArgumentError(where + "key outside a [section]");
    if (!value.empty() && value.front() == '"') {
      if (value.size() < 2 || value.back() != '"') throw ArgumentError(where + "unterminated string");
      std::string unq;
      for (std::size_t i = 1; i + 1 < value.size(); ++i) {
        if (value[i] == '\\' && i + 2 < value.size()) ++i;
        unq.push_back(value[i]);
      }
      value = unq;
    }
    table[section][key] = value;
  }
  return table;
}

ConfigTable parse_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_config_text(text.str());
  } catch (const ArgumentError& e) {
    throw ArgumentError(path.string() + ": " + e.what());
  }
}

void apply_setting(PipelineConfig& config, const std::string& section, const std::string& key, const std::string& value) {
  const std::string full = section + "." + key;
  auto it = setters().find(full);
  if (it == setters().end()) throw ArgumentError("unknown config key '" + full + "'");
  it->second(config, value);
}

void apply_table(PipelineConfig& config, const ConfigTable& table) {
  if (auto p = table.find("pipeline"); p != table.end()) {
    if (auto s = p->second.find("seed"); s != p->second.end()) apply_setting(config, "pipeline", "seed", s->second);
  }
  for (const auto& [section, keys] : table) {
    for (const auto& [key, value] : keys) {
      if (section == "pipeline" && key == "seed") continue;
      apply_setting(config, section, key, value);
    }
  }
}

PipelineConfig resolve_config(const ConfigSources& sources) {
  ConfigTable file;
  if (sources.file) file = parse_config_file(*sources.file);
  Profile profile = Profile::desk;
  if (sources.profile) {
    profile = *sources.profile;
  } else if (auto p = file.find("pipeline"); p != file.end() && p->second.count("profile")) {
    profile = profile_from_string(p->second.at("profile"));
  }
  PipelineConfig config = PipelineConfig::defaults(profile);
  apply_table(config, file);
  config.profile = profile;
  for (const auto& o : sources.overrides) {
    const auto eq = o.find('=');
    const auto dot = o.find('.');
    if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
      throw ArgumentError("override '" + o + "' is not of the form section.key=value");
    }
    apply_setting(config, o.substr(0, dot), o.substr(dot + 1, eq - dot - 1), o.substr(eq + 1));
  }
  if (sources.seed) config.set_seed(*sources.seed);
  config.validate();
  return config;
}

}  // namespace pedpipe
