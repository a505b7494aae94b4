// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

// Differentiable primitives. All 2-D ops treat tensors as row-major
// [rows x cols]. The only broadcast is add_bias over the trailing dimension;
// everything else requires exact shape agreement and throws DimensionError
// naming both shapes otherwise.

#pragma once

#include <cstdint>
#include <span>

#include "pedpipe/rng.hpp"
#include "pedpipe/tensor.hpp"
#include "pedpipe/types.hpp"

namespace pedpipe {

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double factor);
/// x[..., n] + bias[n]
Tensor add_bias(const Tensor& x, const Tensor& bias);
/// a[m x k] . b[k x n]
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);
Tensor slice_rows(const Tensor& a, std::size_t start, std::size_t count);
Tensor slice_cols(const Tensor& a, std::size_t start, std::size_t count);
Tensor concat_rows(std::span<const Tensor> parts);
Tensor concat_cols(std::span<const Tensor> parts);
/// Multiplies row i of x[n x d] by weights[i]; weights has n elements.
Tensor scale_rows(const Tensor& x, const Tensor& weights);

/// Rows of table[V x d] selected by ids -> [len x d]. Throws IndexError.
Tensor embedding_lookup(const Tensor& table, std::span<const TokenId> ids);
/// Normalizes each row of x[n x d], then applies gain[d] and bias[d].
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-5);
/// Exact (erf) GELU.
Tensor gelu(const Tensor& x);

/// Max-subtracted softmax along `axis` (negative counts from the back).
Tensor softmax(const Tensor& x, int axis = -1);
Tensor sigmoid(const Tensor& x);
/// log(sigmoid(x)) = -softplus(-x), finite for every finite x.
Tensor log_sigmoid(const Tensor& x);
/// log(1 + exp(x)) with an overflow-safe branch.
Tensor softplus(const Tensor& x);

/// Square score matrix with entries above the diagonal replaced by a large
/// negative constant, so a following softmax gives them exactly zero weight.
Tensor mask_future(const Tensor& scores);
/// Inverted dropout; identity when p == 0.
Tensor dropout(const Tensor& x, double p, Rng& rng);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

enum class Reduction { mean, sum };

/// Negative log-likelihood of `targets` under softmax(logits) row-wise,
/// reduced over rows whose mask flag is set (an empty mask selects all).
/// A mean over zero selected rows is 0 with zero gradient.
Tensor cross_entropy_logits(const Tensor& logits, std::span<const TokenId> targets, std::span<const std::uint8_t> mask,
                            Reduction reduction = Reduction::mean);

/// Fresh constant tensor of N(0, 1) draws.
Tensor sample_standard_normal(Shape shape, Rng& rng);

// Scalar helpers shared by ops and callers that work outside the tape.
double stable_softplus(double x);
double stable_sigmoid(double x);
double stable_log_sigmoid(double x);

}  // namespace pedpipe
