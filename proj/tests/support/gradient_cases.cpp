// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include "support/gradient_cases.hpp"

#include <algorithm>

#include "pedpipe/adapters.hpp"
#include "pedpipe/objectives.hpp"
#include "pedpipe/ops.hpp"
#include "support/oracles.hpp"

namespace pedpipe::testing {
namespace {

std::size_t dim(Rng& rng, std::size_t lo = 1, std::size_t hi = 4) { return lo + rng.below(hi - lo + 1); }

Tensor weights_like(const Shape& s, Rng& rng) { return random_tensor(s, rng, -1, 1, false); }

// Fixed random projection to a scalar so every output entry gets its own weight.
Tensor project(const Tensor& out, const Tensor& w) { return sum(mul(out, w)); }

GradientOp unary(std::string name, std::function<Tensor(const Tensor&)> op, double lo = -2, double hi = 2) {
  return {std::move(name), GradientGroup::primitive, [op, lo, hi](Rng& rng) {
            Tensor x = random_tensor({dim(rng), dim(rng)}, rng, lo, hi);
            Tensor w = weights_like(op(x.detach()).shape(), rng);
            return GradientCase{[=] { return project(op(x), w); }, {x}};
          }};
}

GradientOp binary(std::string name, std::function<Tensor(const Tensor&, const Tensor&)> op) {
  return {std::move(name), GradientGroup::primitive, [op](Rng& rng) {
            const Shape s{dim(rng), dim(rng)};
            Tensor a = random_tensor(s, rng), b = random_tensor(s, rng), w = weights_like(s, rng);
            return GradientCase{[=] { return project(op(a, b), w); }, {a, b}};
          }};
}

ModelConfig micro() {
  ModelConfig c;
  c.d_model = 4;
  c.n_layers = 1;
  c.n_heads = 2;
  c.d_ff = 8;
  c.max_seq_len = 12;
  return c;
}

TransformerWeights micro_model(Rng& rng) {
  auto w = TransformerWeights::init(micro(), rng);
  for (const auto& p : w.parameters())
    for (auto& v : Tensor(p.tensor).mutable_data()) v += 0.3 * rng.normal();
  return w;
}

TokenSeq tokens(Rng& rng, std::size_t n) {
  TokenSeq t(n);
  for (auto& id : t) id = static_cast<TokenId>(rng.below(kByteVocabSize));
  return t;
}

std::vector<Tensor> probe_leaves(const TransformerWeights& w) {
  const auto& l = w.layers[0];
  return {l.wq, l.wk, l.wv, l.wo, l.w_up, l.w_down, l.b_up, l.ln1_gain, l.ln2_bias, w.final_gain, w.head_bias};
}

std::vector<GradientOp> build() {
  std::vector<GradientOp> ops;
  ops.push_back(binary("add", [](auto& a, auto& b) { return add(a, b); }));
  ops.push_back(binary("sub", [](auto& a, auto& b) { return sub(a, b); }));
  ops.push_back(binary("mul", [](auto& a, auto& b) { return mul(a, b); }));
  ops.push_back(unary("neg", [](auto& x) { return neg(x); }));
  ops.push_back(unary("scale", [](auto& x) { return scale(x, -1.7); }));
  ops.push_back(unary("transpose", [](auto& x) { return transpose(x); }));
  ops.push_back(unary("sum", [](auto& x) { return sum(x); }));
  ops.push_back(unary("mean", [](auto& x) { return mean(x); }));
  ops.push_back(unary("gelu", [](auto& x) { return gelu(x); }, -4, 4));
  ops.push_back(unary("sigmoid", [](auto& x) { return sigmoid(x); }, -6, 6));
  ops.push_back(unary("log_sigmoid", [](auto& x) { return log_sigmoid(x); }, -8, 8));
  ops.push_back(unary("softplus", [](auto& x) { return softplus(x); }, -8, 8));
  ops.push_back(unary("softmax_rows", [](auto& x) { return softmax(x, -1); }, -3, 3));
  ops.push_back(unary("softmax_cols", [](auto& x) { return softmax(x, 0); }, -3, 3));

  const auto P = GradientGroup::primitive;
  ops.push_back({"add_bias", P, [](Rng& rng) {
                   const std::size_t r = dim(rng), c = dim(rng);
                   Tensor x = random_tensor({r, c}, rng), b = random_tensor({c}, rng), w = weights_like({r, c}, rng);
                   return GradientCase{[=] { return project(add_bias(x, b), w); }, {x, b}};
                 }});
  ops.push_back({"matmul", P, [](Rng& rng) {
                   const std::size_t m = dim(rng), k = dim(rng), n = dim(rng);
                   Tensor a = random_tensor({m, k}, rng), b = random_tensor({k, n}, rng), w = weights_like({m, n}, rng);
                   return GradientCase{[=] { return project(matmul(a, b), w); }, {a, b}};
                 }});
  ops.push_back({"reshape", P, [](Rng& rng) {
                   const std::size_t r = dim(rng), c = dim(rng);
                   Tensor x = random_tensor({r, c}, rng), w = weights_like({r * c}, rng);
                   return GradientCase{[=] { return project(reshape(x, {r * c}), w); }, {x}};
                 }});
  ops.push_back({"slice_rows", P, [](Rng& rng) {
                   const std::size_t r = dim(rng, 2, 5), c = dim(rng), start = rng.below(r),
                                     count = 1 + rng.below(r - start);
                   Tensor x = random_tensor({r, c}, rng), w = weights_like({count, c}, rng);
                   return GradientCase{[=] { return project(slice_rows(x, start, count), w); }, {x}};
                 }});
  ops.push_back({"slice_cols", P, [](Rng& rng) {
                   const std::size_t r = dim(rng), c = dim(rng, 2, 5), start = rng.below(c),
                                     count = 1 + rng.below(c - start);
                   Tensor x = random_tensor({r, c}, rng), w = weights_like({r, count}, rng);
                   return GradientCase{[=] { return project(slice_cols(x, start, count), w); }, {x}};
                 }});
  ops.push_back({"concat_rows", P, [](Rng& rng) {
                   const std::size_t c = dim(rng), r1 = dim(rng), r2 = dim(rng);
                   Tensor a = random_tensor({r1, c}, rng), b = random_tensor({r2, c}, rng),
                          w = weights_like({r1 + r2, c}, rng);
                   return GradientCase{[=] { return project(concat_rows(std::vector<Tensor>{a, b}), w); }, {a, b}};
                 }});
  ops.push_back({"concat_cols", P, [](Rng& rng) {
                   const std::size_t r = dim(rng), c1 = dim(rng), c2 = dim(rng);
                   Tensor a = random_tensor({r, c1}, rng), b = random_tensor({r, c2}, rng),
                          w = weights_like({r, c1 + c2}, rng);
                   return GradientCase{[=] { return project(concat_cols(std::vector<Tensor>{a, b}), w); }, {a, b}};
                 }});
  ops.push_back({"scale_rows", P, [](Rng& rng) {
                   const std::size_t r = dim(rng), c = dim(rng);
                   Tensor x = random_tensor({r, c}, rng), s = random_tensor({r}, rng), w = weights_like({r, c}, rng);
                   return GradientCase{[=] { return project(scale_rows(x, s), w); }, {x, s}};
                 }});
  ops.push_back({"embedding_lookup", P, [](Rng& rng) {
                   const std::size_t v = dim(rng, 2, 6), d = dim(rng), len = dim(rng, 1, 6);
                   TokenSeq ids(len);
                   for (auto& id : ids) id = static_cast<TokenId>(rng.below(v));
                   Tensor table = random_tensor({v, d}, rng), w = weights_like({len, d}, rng);
                   return GradientCase{[=] { return project(embedding_lookup(table, ids), w); }, {table}};
                 }});
  ops.push_back({"layer_norm", P, [](Rng& rng) {
                   const std::size_t r = dim(rng), c = dim(rng, 3, 6);
                   Tensor x = random_tensor({r, c}, rng), g = random_tensor({c}, rng, 0.5, 1.5),
                          b = random_tensor({c}, rng), w = weights_like({r, c}, rng);
                   return GradientCase{[=] { return project(layer_norm(x, g, b), w); }, {x, g, b}};
                 }});
  ops.push_back({"mask_future", P, [](Rng& rng) {
                   const std::size_t n = dim(rng, 1, 5);
                   Tensor x = random_tensor({n, n}, rng), w = weights_like({n, n}, rng);
                   return GradientCase{[=] { return project(softmax(mask_future(x), -1), w); }, {x}};
                 }});
  ops.push_back({"dropout", P, [](Rng& rng) {
                   const std::size_t r = dim(rng), c = dim(rng);
                   const std::uint64_t seed = rng.next_u64();
                   Tensor x = random_tensor({r, c}, rng), w = weights_like({r, c}, rng);
                   return GradientCase{[=] {
                                         Rng mask_rng(seed);
                                         return project(dropout(x, 0.3, mask_rng), w);
                                       },
                                       {x}};
                 }});
  ops.push_back({"cross_entropy", P, [](Rng& rng) {
                   const std::size_t n = dim(rng, 1, 5), v = dim(rng, 2, 6);
                   TokenSeq targets(n);
                   Mask mask(n);
                   for (std::size_t i = 0; i < n; ++i) {
                     targets[i] = static_cast<TokenId>(rng.below(v));
                     mask[i] = rng.below(3) != 0;
                   }
                   const Reduction red = rng.below(2) ? Reduction::mean : Reduction::sum;
                   Tensor logits = random_tensor({n, v}, rng, -3, 3);
                   return GradientCase{[=] { return cross_entropy_logits(logits, targets, mask, red); }, {logits}};
                 }});
  ops.push_back({"moe_forward", P, [](Rng& rng) {
                   const std::size_t d_in = dim(rng, 2, 4), d_out = dim(rng, 2, 4), t = dim(rng, 1, 3),
                                     r = dim(rng, 1, 2), n = dim(rng, 1, 3);
                   MoEAdapterLayer l;
                   l.alpha = 2.0;
                   l.dropout = 0.2;
                   l.universal = {random_tensor({r, d_in}, rng), random_tensor({d_out, r}, rng)};
                   for (std::size_t j = 0; j < t; ++j)
                     l.specific.push_back({random_tensor({r, d_in}, rng), random_tensor({d_out, r}, rng)});
                   l.gate = {random_tensor({d_in, t}, rng), random_tensor({d_in, t}, rng), true};
                   Tensor x = random_tensor({n, d_in}, rng), base = weights_like({n, d_out}, rng),
                          w = weights_like({n, d_out}, rng);
                   const std::uint64_t seed = rng.next_u64();
                   std::vector<Tensor> leaves = {x, l.universal.a, l.universal.b, l.gate.w_gate, l.gate.w_noise};
                   for (const auto& e : l.specific) {
                     leaves.push_back(e.a);
                     leaves.push_back(e.b);
                   }
                   return GradientCase{[=] {
                                         Rng r2(seed);
                                         return project(moe_forward(l, x, base, true, &r2), w);
                                       },
                                       leaves};
                 }});

  const auto L = GradientGroup::loss;
  ops.push_back({"cpt_loss", L, [](Rng& rng) {
                   auto w = micro_model(rng);
                   const std::vector<TokenSeq> batch = {tokens(rng, dim(rng, 2, 6)), tokens(rng, dim(rng, 2, 6))};
                   return GradientCase{[=] { return cpt_loss(w, batch); }, probe_leaves(w)};
                 }});
  ops.push_back({"sft_loss", L, [](Rng& rng) {
                   auto w = micro_model(rng);
                   const TokenSeq x = tokens(rng, dim(rng, 1, 4)), y = tokens(rng, dim(rng, 1, 4));
                   return GradientCase{[=] { return sft_loss(w, x, y); }, probe_leaves(w)};
                 }});
  ops.push_back({"dfpo_loss", L, [](Rng& rng) {
                   auto policy = micro_model(rng);
                   auto reference = policy.clone();
                   for (const auto& p : reference.parameters())
                     for (auto& v : Tensor(p.tensor).mutable_data()) v += 0.1 * rng.normal();
                   PreferenceRecord rec{"r", tokens(rng, dim(rng, 1, 3)), tokens(rng, dim(rng, 1, 3)),
                                        tokens(rng, dim(rng, 1, 3)), ""};
                   if (rec.rejected == rec.chosen) rec.rejected.push_back((rec.chosen.back() + 1) % 256);
                   const DfpoConfig cfg{0.1 + rng.uniform(), rng.uniform()};
                   return GradientCase{[=] { return dfpo_loss(policy, reference, rec, cfg).total; },
                                       probe_leaves(policy)};
                 }});
  return ops;
}

}  // namespace

const std::vector<GradientOp>& gradient_ops() {
  static const std::vector<GradientOp> kOps = build();
  return kOps;
}

double worst_gradient_error(const GradientOp& op, int instances, std::uint64_t seed) {
  std::uint64_t stream = 0xcbf29ce484222325ULL;
  for (unsigned char c : op.name) stream = (stream ^ c) * 0x100000001b3ULL;
  Rng rng(seed, stream);
  double worst = 0;
  for (int i = 0; i < instances; ++i) {
    const GradientCase c = op.make(rng);
    worst = std::max(worst, max_gradient_error(c.f, c.leaves));
  }
  return worst;
}

}  // namespace pedpipe::testing
