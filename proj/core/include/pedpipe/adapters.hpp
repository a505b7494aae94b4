// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

// Mixture of universal and specific LoRA experts.
//
// For an input row x attached to a base linear layer,
//   G(x) = softmax(x.Wg + n * softplus(x.Wn)),  n ~ N(0, 1) per expert
//   z    = (alpha / r) * (sum_j G(x)_j * E_j(x) + E_u(x))
// where E(x) = B.(A.x). The noise term is drawn only in train mode with
// noise enabled. Routing is per row (per token).

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "pedpipe/model_config.hpp"
#include "pedpipe/rng.hpp"
#include "pedpipe/tensor.hpp"

namespace pedpipe {

enum class AdapterPlacement {
  ffn,  // up- and down-projections of every feed-forward block
  all,  // additionally Q, K, V and O attention projections
};

const char* to_string(AdapterPlacement placement);
AdapterPlacement adapter_placement_from_string(const std::string& name);

struct AdapterSpec {
  std::size_t specific_experts = 3;
  std::size_t rank = 8;
  double alpha = 16.0;
  double dropout = 0.05;
  AdapterPlacement placement = AdapterPlacement::ffn;
  bool noise = true;

  void validate() const;
  bool operator==(const AdapterSpec&) const = default;
};

struct LoraExpert {
  Tensor a;  // [rank x d_in], small random at init
  Tensor b;  // [d_out x rank], zero at init

  static LoraExpert init(std::size_t d_in, std::size_t d_out, std::size_t rank, Rng& rng);
  std::size_t rank() const { return a.dim(0); }
  std::size_t d_in() const { return a.dim(1); }
  std::size_t d_out() const { return b.dim(0); }
  /// Unscaled B.(A.x) for each row of x[n x d_in].
  Tensor apply(const Tensor& x) const;
};

struct RoutingGate {
  Tensor w_gate;   // [d_in x T]
  Tensor w_noise;  // [d_in x T]
  bool noise_enabled = true;

  std::size_t experts() const { return w_gate.dim(1); }
  std::size_t d_in() const { return w_gate.dim(0); }
};

struct MoEAdapterLayer {
  std::size_t layer = 0;
  LinearSite site = LinearSite::ffn_up;
  double alpha = 16.0;
  double dropout = 0.0;
  LoraExpert universal;
  std::vector<LoraExpert> specific;
  RoutingGate gate;

  std::size_t rank() const { return universal.rank(); }
  std::size_t d_in() const { return universal.d_in(); }
  std::size_t d_out() const { return universal.d_out(); }
  double scale() const { return alpha / static_cast<double>(rank()); }
  std::string name() const;
};

/// Accumulates noise-free gate weights per adapter layer during a forward.
struct RoutingTrace {
  std::vector<std::vector<double>> weight_sums;  // [adapter layer][expert]
  std::vector<std::size_t> rows;                 // routed rows per adapter layer

  void record(std::size_t adapter_index, const Tensor& gate_rows);
  /// Per-layer mean weights; empty rows for layers that saw no tokens.
  std::vector<std::vector<double>> layer_means() const;
  /// Mean over every routed row of every adapter layer.
  std::vector<double> overall_mean() const;
};

/// Gate weights for x (a vector of length d_in, or rows [n x d_in]).
/// Returns [T] or [n x T]. `rng` is required only when noise is drawn.
Tensor gate_weights(const RoutingGate& gate, const Tensor& x, bool train_mode, Rng* rng);

/// base_output + z for rows x[n x d_in], base_output[n x d_out].
Tensor moe_forward(const MoEAdapterLayer& layer, const Tensor& x, const Tensor& base_output, bool train_mode,
                   Rng* rng, RoutingTrace* trace = nullptr, std::size_t adapter_index = 0);

/// Mean noise-free gate weight per specific expert over batch[n x d_in].
std::vector<double> utilization_stats(const MoEAdapterLayer& layer, const Tensor& batch);

/// Exactly {A, B of every expert, Wg, Wn}.
std::vector<NamedParam> trainable_parameters(const MoEAdapterLayer& layer);

/// (T + 1) * r * (d_in + d_out) + 2 * d_in * T
std::size_t adapter_parameter_count(std::size_t specific_experts, std::size_t rank, std::size_t d_in,
                                    std::size_t d_out);

/// The adapters attached to one model.
class AdapterSet {
 public:
  AdapterSet() = default;

  /// Fresh adapters on every site selected by spec.placement.
  static AdapterSet attach(const ModelConfig& config, const AdapterSpec& spec, Rng& rng);

  const AdapterSpec& spec() const { return spec_; }
  const std::vector<MoEAdapterLayer>& layers() const { return layers_; }
  std::vector<MoEAdapterLayer>& layers() { return layers_; }

  /// Index of the adapter on (layer, site), if any.
  std::optional<std::size_t> find(std::size_t layer, LinearSite site) const;

  std::vector<NamedParam> parameters() const;
  std::size_t parameter_count() const;
  /// Closed-form count for this architecture; equals parameter_count().
  static std::size_t expected_parameter_count(const ModelConfig& config, const AdapterSpec& spec);

  void set_noise(bool enabled);
  AdapterSet clone() const;

  static std::vector<LinearSite> sites_for(AdapterPlacement placement);
  static std::pair<std::size_t, std::size_t> site_dims(const ModelConfig& config, LinearSite site);

  // Used by checkpoint loading.
  static AdapterSet from_layers(AdapterSpec spec, std::vector<MoEAdapterLayer> layers);

 private:
  AdapterSpec spec_;
  std::vector<MoEAdapterLayer> layers_;
};

}  // namespace pedpipe
