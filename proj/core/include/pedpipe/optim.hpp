// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pedpipe/tensor.hpp"

namespace pedpipe {

struct AdamWOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

/// First and second moments for one parameter.
struct AdamMoments {
  std::vector<double> m;
  std::vector<double> v;
};

struct AdamWState {
  std::size_t step = 0;
  std::vector<AdamMoments> moments;  // parallel to the parameter list
};

/// One decoupled-weight-decay Adam step with bias correction over every
/// parameter that holds a gradient. All gradients are checked before any
/// value is touched; a non-finite entry raises NonFiniteError naming the
/// parameter and leaves params and state unchanged.
void adamw_step(std::span<const NamedParam> params, AdamWState& state, const AdamWOptions& options);

/// Convenience owner of parameter list + state.
class AdamW {
 public:
  AdamW(std::vector<NamedParam> params, AdamWOptions options);

  void step();
  void zero_grad();
  void set_lr(double lr) { options_.lr = lr; }
  const AdamWOptions& options() const { return options_; }
  const AdamWState& state() const { return state_; }
  const std::vector<NamedParam>& params() const { return params_; }

 private:
  std::vector<NamedParam> params_;
  AdamWOptions options_;
  AdamWState state_;
};

/// Rounds every value to the nearest binary32 so checkpoints round-trip
/// bit-exactly.
void round_to_f32(std::span<const NamedParam> params);

}  // namespace pedpipe
