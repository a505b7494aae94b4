// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include "pedpipe/adapters.hpp"

#include <cmath>

#include "pedpipe/errors.hpp"
#include "pedpipe/ops.hpp"

namespace pedpipe {

const char* to_string(AdapterPlacement placement) {
  switch (placement) {
    case AdapterPlacement::ffn: return "ffn";
    case AdapterPlacement::all: return "all";
  }
  return "?";
}

AdapterPlacement adapter_placement_from_string(const std::string& name) {
  if (name == "ffn") return AdapterPlacement::ffn;
  if (name == "all") return AdapterPlacement::all;
  throw ArgumentError("unknown adapter placement '" + name + "' (expected ffn or all)");
}

void AdapterSpec::validate() const {
  if (rank == 0) throw ArgumentError("adapter rank must be positive");
  if (!(alpha > 0.0)) throw ArgumentError("adapter alpha must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw ArgumentError("adapter dropout must be in [0, 1)");
}

LoraExpert LoraExpert::init(std::size_t d_in, std::size_t d_out, std::size_t rank, Rng& rng) {
  // Uniform(-1/sqrt(d_in), 1/sqrt(d_in)) for A; B starts at zero so the
  // expert contributes nothing until trained.
  const double bound = 1.0 / std::sqrt(static_cast<double>(d_in));
  std::vector<double> a(rank * d_in);
  for (auto& v : a) v = static_cast<float>((2.0 * rng.uniform() - 1.0) * bound);
  return LoraExpert{Tensor::from({rank, d_in}, std::move(a), true), Tensor::zeros({d_out, rank}, true)};
}

Tensor LoraExpert::apply(const Tensor& x) const { return matmul(matmul(x, transpose(a)), transpose(b)); }

std::string MoEAdapterLayer::name() const { return "layers." + std::to_string(layer) + "." + to_string(site); }

void RoutingTrace::record(std::size_t adapter_index, const Tensor& gate_rows) {
  if (weight_sums.size() <= adapter_index) {
    weight_sums.resize(adapter_index + 1);
    rows.resize(adapter_index + 1, 0);
  }
  const std::size_t n = gate_rows.dim(0), t = gate_rows.dim(1);
  auto& sums = weight_sums[adapter_index];
  if (sums.empty()) sums.assign(t, 0.0);
  const auto g = gate_rows.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < t; ++j) sums[j] += g[i * t + j];
  rows[adapter_index] += n;
}

std::vector<std::vector<double>> RoutingTrace::layer_means() const {
  std::vector<std::vector<double>> out(weight_sums.size());
  for (std::size_t k = 0; k < weight_sums.size(); ++k) {
    if (rows[k] == 0) continue;
    out[k] = weight_sums[k];
    for (auto& v : out[k]) v /= static_cast<double>(rows[k]);
  }
  return out;
}

std::vector<double> RoutingTrace::overall_mean() const {
  std::vector<double> total;
  std::size_t count = 0;
  for (std::size_t k = 0; k < weight_sums.size(); ++k) {
    if (rows[k] == 0) continue;
    if (total.empty()) total.assign(weight_sums[k].size(), 0.0);
    for (std::size_t j = 0; j < total.size(); ++j) total[j] += weight_sums[k][j];
    count += rows[k];
  }
  for (auto& v : total) v /= static_cast<double>(count);
  return total;
}

Tensor gate_weights(const RoutingGate& gate, const Tensor& x, bool train_mode, Rng* rng) {
  const bool vector_input = x.rank() == 1;
  const Tensor rows = vector_input ? reshape(x, {1, x.dim(0)}) : x;
  if (rows.rank() != 2 || rows.dim(1) != gate.d_in()) {
    throw DimensionError("gate_weights: input " + shape_str(x.shape()) + " does not match gate " +
                         shape_str(gate.w_gate.shape()));
  }
  Tensor logits = matmul(rows, gate.w_gate);
  if (train_mode && gate.noise_enabled) {
    if (!rng) throw ArgumentError("gate_weights: noisy gating needs an rng");
    const Tensor noise = sample_standard_normal(logits.shape(), *rng);
    logits = add(logits, mul(noise, softplus(matmul(rows, gate.w_noise))));
  }
  Tensor weights = softmax(logits, -1);
  return vector_input ? reshape(weights, {gate.experts()}) : weights;
}

Tensor moe_forward(const MoEAdapterLayer& layer, const Tensor& x, const Tensor& base_output, bool train_mode, Rng* rng,
                   RoutingTrace* trace, std::size_t adapter_index) {
  if (x.rank() != 2 || x.dim(1) != layer.d_in() || base_output.rank() != 2 || base_output.dim(0) != x.dim(0) ||
      base_output.dim(1) != layer.d_out()) {
    throw DimensionError("moe_forward: input " + shape_str(x.shape()) + " / base " + shape_str(base_output.shape()) +
                         " do not match adapter " + std::to_string(layer.d_in()) + "->" +
                         std::to_string(layer.d_out()));
  }
  const bool drop = train_mode && layer.dropout > 0.0;
  if (drop && !rng) throw ArgumentError("moe_forward: dropout in train mode needs an rng");
  auto expert_input = [&]() { return drop ? dropout(x, layer.dropout, *rng) : x; };

  Tensor mixed = layer.universal.apply(expert_input());
  if (!layer.specific.empty()) {
    const Tensor g = gate_weights(layer.gate, x, train_mode, rng);
    if (trace && !train_mode) trace->record(adapter_index, g);
    for (std::size_t j = 0; j < layer.specific.size(); ++j) {
      const Tensor routed = layer.specific[j].apply(expert_input());
      mixed = add(mixed, scale_rows(routed, slice_cols(g, j, 1)));
    }
  }
  return add(base_output, scale(mixed, layer.scale()));
}

std::vector<double> utilization_stats(const MoEAdapterLayer& layer, const Tensor& batch) {
  if (batch.numel() == 0) throw ArgumentError("utilization_stats: empty batch");
  NoGradGuard no_grad;
  const Tensor rows = batch.rank() == 1 ? reshape(batch, {1, batch.dim(0)}) : batch;
  const Tensor g = gate_weights(layer.gate, rows, false, nullptr);
  RoutingTrace trace;
  trace.record(0, g);
  return trace.overall_mean();
}

std::vector<NamedParam> trainable_parameters(const MoEAdapterLayer& layer) {
  const std::string base = layer.name();
  std::vector<NamedParam> out;
  out.push_back({base + ".universal.a", layer.universal.a});
  out.push_back({base + ".universal.b", layer.universal.b});
  for (std::size_t j = 0; j < layer.specific.size(); ++j) {
    const std::string prefix = base + ".specific." + std::to_string(j);
    out.push_back({prefix + ".a", layer.specific[j].a});
    out.push_back({prefix + ".b", layer.specific[j].b});
  }
  out.push_back({base + ".gate.w_gate", layer.gate.w_gate});
  out.push_back({base + ".gate.w_noise", layer.gate.w_noise});
  return out;
}

std::size_t adapter_parameter_count(std::size_t specific_experts, std::size_t rank, std::size_t d_in,
                                    std::size_t d_out) {
  return (specific_experts + 1) * rank * (d_in + d_out) + 2 * d_in * specific_experts;
}

AdapterSet AdapterSet::attach(const ModelConfig& config, const AdapterSpec& spec, Rng& rng) {
  config.validate();
  spec.validate();
  AdapterSet set;
  set.spec_ = spec;
  const std::size_t t = spec.specific_experts;
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    for (LinearSite site : sites_for(spec.placement)) {
      const auto [d_in, d_out] = site_dims(config, site);
      MoEAdapterLayer layer;
      layer.layer = l;
      layer.site = site;
      layer.alpha = spec.alpha;
      layer.dropout = spec.dropout;
      layer.universal = LoraExpert::init(d_in, d_out, spec.rank, rng);
      for (std::size_t j = 0; j < t; ++j) layer.specific.push_back(LoraExpert::init(d_in, d_out, spec.rank, rng));
      std::vector<double> wg(d_in * t);
      for (auto& v : wg) v = static_cast<float>(0.02 * rng.normal());
      layer.gate.w_gate = Tensor::from({d_in, t}, std::move(wg), true);
      layer.gate.w_noise = Tensor::zeros({d_in, t}, true);
      layer.gate.noise_enabled = spec.noise;
      set.layers_.push_back(std::move(layer));
    }
  }
  return set;
}

std::optional<std::size_t> AdapterSet::find(std::size_t layer, LinearSite site) const {
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].layer == layer && layers_[i].site == site) return i;
  }
  return std::nullopt;
}

std::vector<NamedParam> AdapterSet::parameters() const {
  std::vector<NamedParam> out;
  for (const auto& layer : layers_) {
    auto p = trainable_parameters(layer);
    out.insert(out.end(), p.begin(), p.end());
  }
  return out;
}

std::size_t AdapterSet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.tensor.numel();
  return n;
}

std::size_t AdapterSet::expected_parameter_count(const ModelConfig& config, const AdapterSpec& spec) {
  std::size_t n = 0;
  for (LinearSite site : sites_for(spec.placement)) {
    const auto [d_in, d_out] = site_dims(config, site);
    n += adapter_parameter_count(spec.specific_experts, spec.rank, d_in, d_out);
  }
  return n * config.n_layers;
}

void AdapterSet::set_noise(bool enabled) {
  spec_.noise = enabled;
  for (auto& layer : layers_) layer.gate.noise_enabled = enabled;
}

AdapterSet AdapterSet::clone() const {
  auto copy_leaf = [](const Tensor& t) {
    return Tensor::from(t.shape(), std::vector<double>(t.data().begin(), t.data().end()), t.requires_grad());
  };
  auto copy_expert = [&](const LoraExpert& e) { return LoraExpert{copy_leaf(e.a), copy_leaf(e.b)}; };
  AdapterSet out;
  out.spec_ = spec_;
  for (const auto& layer : layers_) {
    MoEAdapterLayer c = layer;
    c.universal = copy_expert(layer.universal);
    for (auto& e : c.specific) e = copy_expert(e);
    c.gate.w_gate = copy_leaf(layer.gate.w_gate);
    c.gate.w_noise = copy_leaf(layer.gate.w_noise);
    out.layers_.push_back(std::move(c));
  }
  return out;
}

std::vector<LinearSite> AdapterSet::sites_for(AdapterPlacement placement) {
  if (placement == AdapterPlacement::ffn) return {LinearSite::ffn_up, LinearSite::ffn_down};
  return {LinearSite::attn_q, LinearSite::attn_k,  LinearSite::attn_v,
          LinearSite::attn_o, LinearSite::ffn_up, LinearSite::ffn_down};
}

std::pair<std::size_t, std::size_t> AdapterSet::site_dims(const ModelConfig& config, LinearSite site) {
  switch (site) {
    case LinearSite::ffn_up: return {config.d_model, config.d_ff};
    case LinearSite::ffn_down: return {config.d_ff, config.d_model};
    default: return {config.d_model, config.d_model};
  }
}

AdapterSet AdapterSet::from_layers(AdapterSpec spec, std::vector<MoEAdapterLayer> layers) {
  AdapterSet set;
  set.spec_ = spec;
  set.layers_ = std::move(layers);
  for (auto& layer : set.layers_) layer.gate.noise_enabled = spec.noise;
  return set;
}

}  // namespace pedpipe
