// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include "pedpipe/trainer.hpp"

#include <chrono>
#include <cmath>
#include <ctime>
#include <functional>

#include <json.hpp>

#include "pedpipe/checkpoint.hpp"
#include "pedpipe/errors.hpp"
#include "pedpipe/objectives.hpp"
#include "pedpipe/ops.hpp"
#include "pedpipe/optim.hpp"

namespace pedpipe {

using nlohmann::json;

double lr_at(const StageConfig& config, std::size_t step) {
  if (config.warmup_steps == 0 || step >= config.warmup_steps) return config.lr;
  return config.lr * static_cast<double>(step) / static_cast<double>(config.warmup_steps);
}

namespace {

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

TrainingLog::TrainingLog(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  out_.emplace(path, std::ios::app);
  if (!*out_) throw DataError("cannot open training log " + path.string());
}

void TrainingLog::write(const std::string& line) {
  if (out_) {
    *out_ << line << '\n';
    out_->flush();
  }
}

void TrainingLog::append(const LogRecord& record) {
  records_.push_back(record);
  json components = json::object();
  for (const auto& [k, v] : record.components) components[k] = finite_or_null(v);
  write(json{{"step", record.step},
             {"stage", to_string(record.stage)},
             {"loss", finite_or_null(record.loss)},
             {"components", components},
             {"lr", record.lr},
             {"timestamp", utc_timestamp()}}
            .dump());
}

void TrainingLog::stage_start(const StageConfig& c) {
  write(json{{"event", "stage_start"},
             {"stage", to_string(c.stage)},
             {"optimizer", {{"name", "adamw"}, {"beta1", c.beta1}, {"beta2", c.beta2}, {"eps", c.eps},
                            {"weight_decay", c.weight_decay}}},
             {"lr", c.lr},
             {"warmup_steps", c.warmup_steps},
             {"batch_size", c.batch_size},
             {"seed", c.seed},
             {"timestamp", utc_timestamp()}}
            .dump());
}

std::vector<double> smoothed_losses(const std::vector<double>& losses, std::size_t window) {
  std::vector<double> out;
  if (window == 0) return out;
  for (std::size_t start = 0; start + window <= losses.size(); start += window) {
    double s = 0;
    for (std::size_t i = start; i < start + window; ++i) s += losses[i];
    out.push_back(s / static_cast<double>(window));
  }
  return out;
}

bool strictly_decreasing(const std::vector<double>& values) {
  for (std::size_t i = 1; i < values.size(); ++i)
    if (!(values[i] < values[i - 1])) return false;
  return values.size() >= 2;
}

std::size_t planned_steps(const StageConfig& config, std::size_t examples) {
  const std::size_t per_epoch = (examples + config.batch_size - 1) / config.batch_size;
  const std::size_t total = per_epoch * config.epochs;
  return config.max_steps ? std::min(total, config.max_steps) : total;
}

namespace {

struct BatchTerms {
  double loss = 0;
  std::map<std::string, double> components;
};

struct LoopHooks {
  // Accumulates gradients for the batch and returns the batch loss.
  std::function<BatchTerms(const std::vector<std::size_t>&, Rng&)> batch;
  std::function<std::optional<double>()> validate;
  std::function<void()> snapshot_best;
  std::function<void()> restore_best;
  std::function<void()> audit;
};

void copy_values(const std::vector<NamedParam>& from, const std::vector<NamedParam>& to) {
  for (std::size_t i = 0; i < from.size(); ++i) {
    Tensor dst = to[i].tensor;
    auto d = dst.mutable_data();
    const auto s = from[i].tensor.data();
    std::copy(s.begin(), s.end(), d.begin());
  }
}

std::vector<NamedParam> snapshot(const std::vector<NamedParam>& params) {
  std::vector<NamedParam> out;
  for (const auto& p : params) {
    out.push_back({p.name, Tensor::from(p.tensor.shape(), {p.tensor.data().begin(), p.tensor.data().end()})});
  }
  return out;
}

void clear_grads(const std::vector<NamedParam>& params) {
  for (const auto& p : params) Tensor(p.tensor).zero_grad();
}

StageReport run_loop(const std::vector<NamedParam>& params, const StageConfig& config, std::size_t n_train,
                     const LoopHooks& hooks, TrainingLog* log) {
  config.validate();
  if (n_train == 0) throw DataError(std::string(to_string(config.stage)) + ": no training examples");
  StageReport report;
  report.stage = config.stage;
  if (log) log->stage_start(config);

  AdamW optimizer(params, {config.lr, config.beta1, config.beta2, config.eps, config.weight_decay});
  Rng rng(config.seed, 0x7472616e + static_cast<std::uint64_t>(config.stage));
  const std::size_t total = planned_steps(config, n_train);

  auto evaluate = [&](std::size_t step) {
    const std::optional<double> v = hooks.validate ? hooks.validate() : std::nullopt;
    if (!v) return;
    report.evals.push_back({step, *v});
    if (!report.best_val_loss || *v < *report.best_val_loss) {
      report.best_val_loss = *v;
      report.best_step = step;
      if (hooks.snapshot_best) hooks.snapshot_best();
    }
  };

  std::size_t step = 0;
  for (std::size_t epoch = 0; step < total; ++epoch) {
    for (const auto& batch : epoch_batches(n_train, config.batch_size, config.seed, epoch)) {
      if (step == total) break;
      ++step;
      optimizer.zero_grad();
      const BatchTerms terms = hooks.batch(batch, rng);
      const double lr = lr_at(config, step);
      const std::string where = std::string(to_string(config.stage)) + " step " + std::to_string(step);
      if (!std::isfinite(terms.loss)) {
        clear_grads(params);
        throw TrainingAborted(where + ": non-finite loss", "");
      }
      optimizer.set_lr(lr);
      try {
        optimizer.step();
      } catch (const NonFiniteError& e) {
        clear_grads(params);
        throw TrainingAborted(where + ": " + e.what(), "");
      }
      report.train_losses.push_back(terms.loss);
      if (log) log->append({step, config.stage, terms.loss, terms.components, lr});
      if (config.eval_interval && step % config.eval_interval == 0) {
        if (hooks.audit) {
          hooks.audit();
          ++report.freeze_audits;
        }
        evaluate(step);
      }
    }
  }
  report.steps = step;
  if (hooks.audit) {
    hooks.audit();
    ++report.freeze_audits;
  }
  if (report.evals.empty() || report.evals.back().step != step) evaluate(step);
  if (report.best_val_loss && report.best_step != step && hooks.restore_best) hooks.restore_best();
  clear_grads(params);
  return report;
}

double mean_sft_loss(const TransformerWeights& weights, const std::vector<SftExample>& examples,
                     const AdapterSet* adapters) {
  NoGradGuard no_grad;
  ForwardOptions opts;
  opts.adapters = adapters;
  double total = 0;
  for (const auto& ex : examples) total += sft_loss(weights, ex.prompt, ex.response, opts).item();
  return total / static_cast<double>(examples.size());
}

LoopHooks best_tracking(const std::vector<NamedParam>& params) {
  auto best = std::make_shared<std::vector<NamedParam>>();
  LoopHooks hooks;
  hooks.snapshot_best = [params, best] { *best = snapshot(params); };
  hooks.restore_best = [params, best] {
    if (!best->empty()) copy_values(*best, params);
  };
  return hooks;
}

}  // namespace

StageReport train_cpt(TransformerWeights& weights, const StageConfig& config, const std::vector<TokenSeq>& train,
                      const std::vector<TokenSeq>& val, TrainingLog* log) {
  const auto params = weights.parameters();
  LoopHooks hooks = best_tracking(params);
  hooks.batch = [&](const std::vector<std::size_t>& batch, Rng&) {
    std::size_t positions = 0;
    for (std::size_t i : batch) positions += train[i].size() - 1;
    BatchTerms out;
    for (std::size_t i : batch) {
      if (train[i].size() < 2) throw ArgumentError("cpt: sequence shorter than 2 tokens");
      const std::span<const TokenId> seq(train[i]);
      const Tensor logits = forward(weights, seq.first(seq.size() - 1));
      const Tensor nll = cross_entropy_logits(logits, seq.subspan(1), {}, Reduction::sum);
      scale(nll, 1.0 / static_cast<double>(positions)).backward();
      out.loss += nll.item() / static_cast<double>(positions);
    }
    return out;
  };
  if (!val.empty()) {
    hooks.validate = [&]() -> std::optional<double> {
      NoGradGuard no_grad;
      return cpt_loss(weights, val).item();
    };
  }
  return run_loop(params, config, train.size(), hooks, log);
}

StageReport train_fsft(TransformerWeights& weights, const StageConfig& config, const std::vector<SftExample>& train,
                       const std::vector<SftExample>& val, TrainingLog* log) {
  const auto params = weights.parameters();
  LoopHooks hooks = best_tracking(params);
  hooks.batch = [&](const std::vector<std::size_t>& batch, Rng&) {
    BatchTerms out;
    const double b = static_cast<double>(batch.size());
    std::size_t tokens = 0;
    for (std::size_t i : batch) {
      const Tensor loss = sft_loss(weights, train[i].prompt, train[i].response);
      scale(loss, 1.0 / b).backward();
      out.loss += loss.item() / b;
      tokens += train[i].response.size();
    }
    out.components["nll_per_token"] = out.loss * b / static_cast<double>(tokens);
    return out;
  };
  if (!val.empty()) hooks.validate = [&]() -> std::optional<double> { return mean_sft_loss(weights, val, nullptr); };
  StageReport report = run_loop(params, config, train.size(), hooks, log);
  return report;
}

PreferenceAccuracy preference_accuracy(const TransformerWeights& policy, const TransformerWeights& reference,
                                       const std::vector<PreferenceRecord>& records, const DfpoConfig& config) {
  PreferenceAccuracy acc;
  if (records.empty()) return acc;
  NoGradGuard no_grad;
  std::size_t by_margin = 0, by_logprob = 0;
  for (const auto& r : records) {
    const DfpoTerms t = dfpo_loss(policy, reference, r, config);
    if (t.margin > 0) ++by_margin;
    if (t.policy_chosen > t.policy_rejected) ++by_logprob;
  }
  acc.margin = static_cast<double>(by_margin) / static_cast<double>(records.size());
  acc.logprob = static_cast<double>(by_logprob) / static_cast<double>(records.size());
  return acc;
}

StageReport train_dfpo(TransformerWeights& policy, const TransformerWeights& reference, const StageConfig& config,
                       const std::vector<PreferenceRecord>& train, const std::vector<PreferenceRecord>& val,
                       TrainingLog* log) {
  for (const auto& r : train) r.validate();
  const auto params = policy.parameters();
  const PreferenceAccuracy before = preference_accuracy(policy, reference, train, config.dfpo);
  LoopHooks hooks = best_tracking(params);
  hooks.batch = [&](const std::vector<std::size_t>& batch, Rng&) {
    BatchTerms out;
    const double b = static_cast<double>(batch.size());
    double pref = 0, phi = 0, margin = 0, correct = 0;
    for (std::size_t i : batch) {
      const DfpoTerms t = dfpo_loss(policy, reference, train[i], config.dfpo);
      scale(t.total, 1.0 / b).backward();
      out.loss += t.total.item() / b;
      pref += t.preference.item() / b;
      phi += t.phi.item() / b;
      margin += t.margin / b;
      if (t.margin > 0) correct += 1.0 / b;
    }
    out.components = {{"preference", pref}, {"phi", phi}, {"margin", margin}, {"accuracy", correct}};
    return out;
  };
  if (!val.empty()) {
    hooks.validate = [&]() -> std::optional<double> {
      NoGradGuard no_grad;
      double total = 0;
      for (const auto& r : val) total += dfpo_loss(policy, reference, r, config.dfpo).total.item();
      return total / static_cast<double>(val.size());
    };
  }
  StageReport report = run_loop(params, config, train.size(), hooks, log);
  const PreferenceAccuracy after = preference_accuracy(policy, reference, train, config.dfpo);
  report.initial_preference_accuracy = before.margin;
  report.initial_logprob_accuracy = before.logprob;
  report.final_preference_accuracy = after.margin;
  report.final_logprob_accuracy = after.logprob;
  return report;
}

StageReport train_psft(const TransformerWeights& base, AdapterSet& adapters, const StageConfig& config,
                       const std::vector<SftExample>& train, const std::vector<SftExample>& val, TrainingLog* log) {
  const TransformerWeights frozen = base.clone();
  frozen.set_requires_grad(false);
  const auto base_params = frozen.parameters();
  const auto params = adapters.parameters();
  for (const auto& p : params) Tensor(p.tensor).set_requires_grad(true);

  LoopHooks hooks = best_tracking(params);
  hooks.batch = [&](const std::vector<std::size_t>& batch, Rng& rng) {
    BatchTerms out;
    ForwardOptions opts;
    opts.adapters = &adapters;
    opts.train = true;
    opts.rng = &rng;
    const double b = static_cast<double>(batch.size());
    for (std::size_t i : batch) {
      const Tensor loss = sft_loss(frozen, train[i].prompt, train[i].response, opts);
      scale(loss, 1.0 / b).backward();
      out.loss += loss.item() / b;
    }
    return out;
  };
  hooks.audit = [&] {
    for (const auto& p : base_params) {
      if (p.tensor.requires_grad() || p.tensor.has_grad()) {
        throw FreezeViolation("psft: base weight " + p.name + " is trainable");
      }
    }
  };
  if (!val.empty()) hooks.validate = [&]() -> std::optional<double> { return mean_sft_loss(frozen, val, &adapters); };
  StageReport report = run_loop(params, config, train.size(), hooks, log);
  report.trainable_parameters = adapters.parameter_count();
  report.base_parameters = frozen.parameter_count();
  return report;
}

double mean_token_sft_loss(const TransformerWeights& weights, const std::vector<SftExample>& examples,
                           const AdapterSet* adapters) {
  if (examples.empty()) throw ArgumentError("mean_token_sft_loss: no examples");
  NoGradGuard no_grad;
  ForwardOptions opts;
  opts.adapters = adapters;
  double total = 0;
  std::size_t tokens = 0;
  for (const auto& ex : examples) {
    total += sft_loss(weights, ex.prompt, ex.response, opts).item();
    tokens += ex.response.size();
  }
  return total / static_cast<double>(tokens);
}


PipelineState PipelineState::load(const std::filesystem::path& out_dir) {
  PipelineState state;
  state.dir = out_dir;
  const auto path = out_dir / "pipeline_state.json";
  std::ifstream in(path);
  if (!in) return state;
  try {
    const json j = json::parse(in);
    state.seed = j.value("seed", std::uint64_t{0});
    for (const auto& [name, entry] : j.at("stages").items()) {
      Entry e;
      e.checkpoint = entry.at("checkpoint").get<std::string>();
      if (entry.contains("best_val") && !entry.at("best_val").is_null()) e.best_val = entry.at("best_val").get<double>();
      state.stages_[stage_from_string(name)] = e;
    }
  } catch (const std::exception& e) {
    throw DataError("corrupt pipeline state " + path.string() + ": " + e.what());
  }
  return state;
}

void PipelineState::save() const {
  std::filesystem::create_directories(dir);
  json stages = json::object();
  for (const auto& [stage, e] : stages_) {
    stages[to_string(stage)] = {{"checkpoint", e.checkpoint.string()},
                                {"best_val", e.best_val ? json(*e.best_val) : json(nullptr)}};
  }
  std::ofstream out(dir / "pipeline_state.json", std::ios::trunc);
  out << json{{"seed", seed}, {"stages", stages}}.dump(2) << '\n';
}

bool PipelineState::completed(Stage stage) const {
  auto it = stages_.find(stage);
  return it != stages_.end() && std::filesystem::exists(it->second.checkpoint);
}

std::filesystem::path PipelineState::checkpoint(Stage stage) const {
  auto it = stages_.find(stage);
  return it == stages_.end() ? std::filesystem::path() : it->second.checkpoint;
}

void PipelineState::mark_completed(Stage stage, const std::filesystem::path& ckpt, std::optional<double> best_val) {
  stages_[stage] = {ckpt, best_val};
}

void PipelineState::require_ready(Stage stage) const {
  auto need = [&](Stage prev) {
    if (!completed(prev)) {
      throw StageGateError(std::string("stage ") + to_string(stage) + " requires a " + to_string(prev) +
                           " checkpoint; run `train --stage " + to_string(prev) + "` first (looked in " +
                           dir.string() + ")");
    }
  };
  if (stage == Stage::dfpo) need(Stage::fsft);
  if (stage == Stage::psft) need(Stage::dfpo);
}

std::filesystem::path checkpoint_path(const std::filesystem::path& out_dir, Stage stage) {
  if (stage == Stage::psft) return out_dir / "psft_adapters.pgpt";
  return out_dir / (std::string(to_string(stage)) + ".pgpt");
}

namespace {

template <typename Fn>
StageReport guarded(Stage stage, const std::filesystem::path& out_dir, const Fn& train_and_save,
                    const std::function<void(const std::filesystem::path&)>& save_last_good) {
  try {
    return train_and_save();
  } catch (const TrainingAborted& e) {
    const auto path = out_dir / (std::string(to_string(stage)) + ".last_good.pgpt");
    save_last_good(path);
    throw TrainingAborted(e.what(), path.string());
  }
}

TransformerWeights initial_weights(const PipelineConfig& config, const PipelineState& state, Stage previous) {
  if (state.completed(previous)) {
    TransformerWeights w = load_checkpoint(state.checkpoint(previous));
    if (!(w.config == config.model)) {
      throw DataError("checkpoint " + state.checkpoint(previous).string() + " does not match the configured model");
    }
    return w;
  }
  Rng rng(config.seed, 0x696e6974);
  return TransformerWeights::init(config.model, rng);
}

void finish(PipelineState& state, const PipelineConfig& config, Stage stage, StageReport& report,
            const std::filesystem::path& path) {
  report.checkpoint = path;
  state.seed = config.seed;
  state.mark_completed(stage, path, report.best_val_loss);
  state.save();
}

}  // namespace

StageReport run_cpt(const PipelineConfig& config, const std::vector<CompletionDoc>& corpus,
                    const std::filesystem::path& out_dir, TrainingLog* log) {
  PipelineState state = PipelineState::load(out_dir);
  state.require_ready(Stage::cpt);
  config.validate();
  const StageConfig& sc = config.cpt;
  Rng rng(config.seed, 0x696e6974);
  TransformerWeights weights = TransformerWeights::init(config.model, rng);
  std::vector<TokenSeq> train, val;
  if (corpus.size() >= 2) {
    const auto split = split_and_dedup(corpus, sc.val_fraction, sc.seed);
    train = chunk_documents(split.train, sc.max_seq_len);
    val = chunk_documents(split.val, sc.max_seq_len);
  } else {
    train = chunk_documents(corpus, sc.max_seq_len);
  }
  const auto path = checkpoint_path(out_dir, Stage::cpt);
  StageReport report = guarded(
      Stage::cpt, out_dir, [&] { return train_cpt(weights, sc, train, val, log); },
      [&](const std::filesystem::path& p) { save_checkpoint(p, weights); });
  save_checkpoint(path, weights);
  finish(state, config, Stage::cpt, report, path);
  return report;
}

StageReport run_fsft(const PipelineConfig& config, const std::vector<InstructionRecord>& records,
                     const std::filesystem::path& out_dir, TrainingLog* log) {
  PipelineState state = PipelineState::load(out_dir);
  state.require_ready(Stage::fsft);
  config.validate();
  const StageConfig& sc = config.fsft;
  TransformerWeights weights = initial_weights(config, state, Stage::cpt);
  const auto split = split_and_dedup(records, sc.val_fraction, sc.seed);
  std::size_t truncated_train = 0, truncated_val = 0;
  const auto train = build_sft_examples(split.train, {}, sc.max_seq_len, &truncated_train);
  const auto val = build_sft_examples(split.val, {}, sc.max_seq_len, &truncated_val);
  const auto path = checkpoint_path(out_dir, Stage::fsft);
  StageReport report = guarded(
      Stage::fsft, out_dir, [&] { return train_fsft(weights, sc, train, val, log); },
      [&](const std::filesystem::path& p) { save_checkpoint(p, weights); });
  report.truncated_examples = truncated_train + truncated_val;
  save_checkpoint(path, weights);
  finish(state, config, Stage::fsft, report, path);
  return report;
}

StageReport run_dfpo(const PipelineConfig& config, const std::vector<PreferenceText>& records,
                     const std::filesystem::path& out_dir, TrainingLog* log) {
  PipelineState state = PipelineState::load(out_dir);
  state.require_ready(Stage::dfpo);
  config.validate();
  const StageConfig& sc = config.dfpo;
  TransformerWeights policy = load_checkpoint(state.checkpoint(Stage::fsft));
  const TransformerWeights reference = policy.clone();
  reference.set_requires_grad(false);
  const auto split = split_and_dedup(records, sc.val_fraction, sc.seed);
  std::vector<PreferenceRecord> train, val;
  for (const auto& r : split.train) train.push_back(encode_preference(r, {}, sc.max_seq_len));
  for (const auto& r : split.val) val.push_back(encode_preference(r, {}, sc.max_seq_len));
  const auto path = checkpoint_path(out_dir, Stage::dfpo);
  StageReport report = guarded(
      Stage::dfpo, out_dir, [&] { return train_dfpo(policy, reference, sc, train, val, log); },
      [&](const std::filesystem::path& p) { save_checkpoint(p, policy); });
  save_checkpoint(path, policy);
  finish(state, config, Stage::dfpo, report, path);
  return report;
}

StageReport run_psft(const PipelineConfig& config, const std::vector<InstructionRecord>& records,
                     const std::filesystem::path& out_dir, TrainingLog* log) {
  PipelineState state = PipelineState::load(out_dir);
  state.require_ready(Stage::psft);
  config.validate();
  const StageConfig& sc = config.psft;
  const TransformerWeights base = load_checkpoint(state.checkpoint(Stage::dfpo));
  Rng rng(config.seed, 0x61647074);
  AdapterSet adapters = AdapterSet::attach(base.config, sc.adapters, rng);
  const auto split = split_and_dedup(records, sc.val_fraction, sc.seed);
  std::size_t truncated_train = 0, truncated_val = 0;
  const auto train = build_sft_examples(split.train, {}, sc.max_seq_len, &truncated_train);
  const auto val = build_sft_examples(split.val, {}, sc.max_seq_len, &truncated_val);
  const auto path = checkpoint_path(out_dir, Stage::psft);
  StageReport report = guarded(
      Stage::psft, out_dir, [&] { return train_psft(base, adapters, sc, train, val, log); },
      [&](const std::filesystem::path& p) { save_adapter_checkpoint(p, adapters, base.config); });
  report.truncated_examples = truncated_train + truncated_val;
  save_adapter_checkpoint(path, adapters, base.config);
  finish(state, config, Stage::psft, report, path);
  return report;
}

}  // namespace pedpipe
