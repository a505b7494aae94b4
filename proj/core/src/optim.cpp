// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include "pedpipe/optim.hpp"

#include <cmath>

#include "pedpipe/errors.hpp"

namespace pedpipe {

void adamw_step(std::span<const NamedParam> params, AdamWState& state, const AdamWOptions& options) {
  if (state.moments.empty()) state.moments.resize(params.size());
  if (state.moments.size() != params.size()) {
    throw DimensionError("adamw_step: state holds " + std::to_string(state.moments.size()) + " moment slots for " +
                         std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& p = params[i].tensor;
    const auto& mom = state.moments[i];
    if (!mom.m.empty() && mom.m.size() != p.numel()) {
      throw DimensionError("adamw_step: moment shape mismatch for " + params[i].name);
    }
    if (!p.has_grad()) continue;
    for (double g : p.grad()) {
      if (!std::isfinite(g)) throw NonFiniteError("non-finite gradient in parameter " + params[i].name);
    }
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(options.beta1, t);
  const double bias2 = 1.0 - std::pow(options.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor p = params[i].tensor;
    if (!p.has_grad()) continue;
    auto& mom = state.moments[i];
    if (mom.m.empty()) {
      mom.m.assign(p.numel(), 0.0);
      mom.v.assign(p.numel(), 0.0);
    }
    auto w = p.mutable_data();
    const auto g = p.grad();
    for (std::size_t j = 0; j < w.size(); ++j) {
      mom.m[j] = options.beta1 * mom.m[j] + (1.0 - options.beta1) * g[j];
      mom.v[j] = options.beta2 * mom.v[j] + (1.0 - options.beta2) * g[j] * g[j];
      const double m_hat = mom.m[j] / bias1;
      const double v_hat = mom.v[j] / bias2;
      w[j] -= options.lr * options.weight_decay * w[j];
      w[j] -= options.lr * m_hat / (std::sqrt(v_hat) + options.eps);
    }
  }
}

AdamW::AdamW(std::vector<NamedParam> params, AdamWOptions options)
    : params_(std::move(params)), options_(options) {
  state_.moments.resize(params_.size());
}

void AdamW::step() { adamw_step(params_, state_, options_); }

void AdamW::zero_grad() {
  for (auto& p : params_) p.tensor.zero_grad();
}

void round_to_f32(std::span<const NamedParam> params) {
  for (const auto& p : params) {
    Tensor t = p.tensor;
    for (double& v : t.mutable_data()) v = static_cast<double>(static_cast<float>(v));
  }
}

}  // namespace pedpipe
