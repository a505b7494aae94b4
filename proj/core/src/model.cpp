// Copyright 2026 The pedpipe Authors
// SPDX-License-Identifier: Apache-2.0

#include "pedpipe/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pedpipe/errors.hpp"
#include "pedpipe/ops.hpp"

namespace pedpipe {

const char* to_string(LinearSite site) {
  switch (site) {
    case LinearSite::attn_q: return "attn_q";
    case LinearSite::attn_k: return "attn_k";
    case LinearSite::attn_v: return "attn_v";
    case LinearSite::attn_o: return "attn_o";
    case LinearSite::ffn_up: return "ffn_up";
    case LinearSite::ffn_down: return "ffn_down";
  }
  return "?";
}

LinearSite linear_site_from_string(const std::string& name) {
  for (LinearSite s : {LinearSite::attn_q, LinearSite::attn_k, LinearSite::attn_v, LinearSite::attn_o,
                       LinearSite::ffn_up, LinearSite::ffn_down}) {
    if (name == to_string(s)) return s;
  }
  throw ArgumentError("unknown linear site '" + name + "'");
}

void ModelConfig::validate() const {
  if (vocab_size < kByteVocabSize) {
    throw ArgumentError("vocab_size " + std::to_string(vocab_size) + " is below the byte vocabulary (" +
                        std::to_string(kByteVocabSize) + ")");
  }
  if (d_model == 0 || n_layers == 0 || n_heads == 0 || d_ff == 0 || max_seq_len == 0) {
    throw ArgumentError("model dimensions must be positive");
  }
  if (d_model % n_heads != 0) {
    throw ArgumentError("d_model " + std::to_string(d_model) + " is not divisible by n_heads " +
                        std::to_string(n_heads));
  }
}

ModelConfig ModelConfig::toy() {
  ModelConfig c;
  c.d_model = 32;
  c.n_layers = 2;
  c.n_heads = 2;
  c.d_ff = 64;
  c.max_seq_len = 128;
  return c;
}

namespace {

Tensor random_matrix(Shape shape, double stddev, Rng& rng) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<float>(stddev * rng.normal());
  return Tensor::from(std::move(shape), std::move(v), true);
}

Tensor param_zeros(std::size_t n) { return Tensor::zeros({n}, true); }
Tensor param_ones(std::size_t n) { return Tensor::full({n}, 1.0, true); }

Tensor copy_leaf(const Tensor& t) {
  if (!t.defined()) return t;
  return Tensor::from(t.shape(), std::vector<double>(t.data().begin(), t.data().end()), t.requires_grad());
}

struct ForwardContext {
  const ForwardOptions& options;
  std::size_t layer = 0;

  Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b, LinearSite site) const {
    Tensor base = add_bias(matmul(x, w), b);
    if (!options.adapters) return base;
    const auto idx = options.adapters->find(layer, site);
    if (!idx) return base;
    return moe_forward(options.adapters->layers()[*idx], x, base, options.train, options.rng, options.trace, *idx);
  }
};

Tensor attention(const ForwardContext& ctx, const LayerWeights& lw, const Tensor& h, std::size_t n_heads) {
  const Tensor q = ctx.linear(h, lw.wq, lw.bq, LinearSite::attn_q);
  const Tensor k = ctx.linear(h, lw.wk, lw.bk, LinearSite::attn_k);
  const Tensor v = ctx.linear(h, lw.wv, lw.bv, LinearSite::attn_v);
  const std::size_t d = h.dim(1), head_dim = d / n_heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(head_dim));
  std::vector<Tensor> heads;
  heads.reserve(n_heads);
  for (std::size_t i = 0; i < n_heads; ++i) {
    const Tensor qh = slice_cols(q, i * head_dim, head_dim);
    const Tensor kh = slice_cols(k, i * head_dim, head_dim);
    const Tensor vh = slice_cols(v, i * head_dim, head_dim);
    const Tensor scores = mask_future(scale(matmul(qh, transpose(kh)), inv_sqrt));
    heads.push_back(matmul(softmax(scores, -1), vh));
  }
  const Tensor merged = n_heads == 1 ? heads[0] : concat_cols(heads);
  return ctx.linear(merged, lw.wo, lw.bo, LinearSite::attn_o);
}

}  // namespace

TransformerWeights TransformerWeights::init(const ModelConfig& config, Rng& rng) {
  config.validate();
  const double std = 0.02;
  const std::size_t d = config.d_model, ff = config.d_ff;
  TransformerWeights w;
  w.config = config;
  w.token_embedding = random_matrix({config.vocab_size, d}, std, rng);
  w.position_embedding = random_matrix({config.max_seq_len, d}, std, rng);
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    LayerWeights lw;
    lw.ln1_gain = param_ones(d);
    lw.ln1_bias = param_zeros(d);
    lw.wq = random_matrix({d, d}, std, rng);
    lw.bq = param_zeros(d);
    lw.wk = random_matrix({d, d}, std, rng);
    lw.bk = param_zeros(d);
    lw.wv = random_matrix({d, d}, std, rng);
    lw.bv = param_zeros(d);
    lw.wo = random_matrix({d, d}, std, rng);
    lw.bo = param_zeros(d);
    lw.ln2_gain = param_ones(d);
    lw.ln2_bias = param_zeros(d);
    lw.w_up = random_matrix({d, ff}, std, rng);
    lw.b_up = param_zeros(ff);
    lw.w_down = random_matrix({ff, d}, std, rng);
    lw.b_down = param_zeros(d);
    w.layers.push_back(std::move(lw));
  }
  w.final_gain = param_ones(d);
  w.final_bias = param_zeros(d);
  if (!config.tie_weights) w.head = random_matrix({d, config.vocab_size}, std, rng);
  w.head_bias = param_zeros(config.vocab_size);
  return w;
}

std::vector<NamedParam> TransformerWeights::parameters() const {
  std::vector<NamedParam> out;
  out.push_back({"tok_emb", token_embedding});
  out.push_back({"pos_emb", position_embedding});
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& lw = layers[l];
    const std::string p = "layers." + std::to_string(l) + ".";
    out.push_back({p + "ln1.gain", lw.ln1_gain});
    out.push_back({p + "ln1.bias", lw.ln1_bias});
    out.push_back({p + "attn.wq", lw.wq});
    out.push_back({p + "attn.bq", lw.bq});
    out.push_back({p + "attn.wk", lw.wk});
    out.push_back({p + "attn.bk", lw.bk});
    out.push_back({p + "attn.wv", lw.wv});
    out.push_back({p + "attn.bv", lw.bv});
    out.push_back({p + "attn.wo", lw.wo});
    out.push_back({p + "attn.bo", lw.bo});
    out.push_back({p + "ln2.gain", lw.ln2_gain});
    out.push_back({p + "ln2.bias", lw.ln2_bias});
    out.push_back({p + "ffn.w_up", lw.w_up});
    out.push_back({p + "ffn.b_up", lw.b_up});
    out.push_back({p + "ffn.w_down", lw.w_down});
    out.push_back({p + "ffn.b_down", lw.b_down});
  }
  out.push_back({"final_ln.gain", final_gain});
  out.push_back({"final_ln.bias", final_bias});
  if (head.defined()) out.push_back({"head.weight", head});
  out.push_back({"head.bias", head_bias});
  return out;
}

std::size_t TransformerWeights::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) n += p.tensor.numel();
  return n;
}

TransformerWeights TransformerWeights::clone() const {
  TransformerWeights c;
  c.config = config;
  c.token_embedding = copy_leaf(token_embedding);
  c.position_embedding = copy_leaf(position_embedding);
  for (const auto& lw : layers) {
    LayerWeights n;
    n.ln1_gain = copy_leaf(lw.ln1_gain);
    n.ln1_bias = copy_leaf(lw.ln1_bias);
    n.wq = copy_leaf(lw.wq);
    n.bq = copy_leaf(lw.bq);
    n.wk = copy_leaf(lw.wk);
    n.bk = copy_leaf(lw.bk);
    n.wv = copy_leaf(lw.wv);
    n.bv = copy_leaf(lw.bv);
    n.wo = copy_leaf(lw.wo);
    n.bo = copy_leaf(lw.bo);
    n.ln2_gain = copy_leaf(lw.ln2_gain);
    n.ln2_bias = copy_leaf(lw.ln2_bias);
    n.w_up = copy_leaf(lw.w_up);
    n.b_up = copy_leaf(lw.b_up);
    n.w_down = copy_leaf(lw.w_down);
    n.b_down = copy_leaf(lw.b_down);
    c.layers.push_back(std::move(n));
  }
  c.final_gain = copy_leaf(final_gain);
  c.final_bias = copy_leaf(final_bias);
  c.head = copy_leaf(head);
  c.head_bias = copy_leaf(head_bias);
  return c;
}

void TransformerWeights::set_requires_grad(bool on) const {
  for (auto& p : parameters()) p.tensor.set_requires_grad(on);
}

void TransformerWeights::zero_grad() const {
  for (auto& p : parameters()) p.tensor.zero_grad();
}

Tensor forward(const TransformerWeights& weights, std::span<const TokenId> tokens, const ForwardOptions& options) {
  const ModelConfig& cfg = weights.config;
  if (tokens.empty()) throw ArgumentError("forward: empty token sequence");
  if (tokens.size() > cfg.max_seq_len) {
    throw ArgumentError("forward: sequence length " + std::to_string(tokens.size()) + " exceeds max_seq_len " +
                        std::to_string(cfg.max_seq_len));
  }
  TokenSeq positions(tokens.size());
  std::iota(positions.begin(), positions.end(), TokenId{0});
  Tensor x = add(embedding_lookup(weights.token_embedding, tokens),
                 embedding_lookup(weights.position_embedding, positions));

  ForwardContext ctx{options};
  for (std::size_t l = 0; l < weights.layers.size(); ++l) {
    ctx.layer = l;
    const LayerWeights& lw = weights.layers[l];
    x = add(x, attention(ctx, lw, layer_norm(x, lw.ln1_gain, lw.ln1_bias), cfg.n_heads));
    const Tensor h = layer_norm(x, lw.ln2_gain, lw.ln2_bias);
    const Tensor up = gelu(ctx.linear(h, lw.w_up, lw.b_up, LinearSite::ffn_up));
    x = add(x, ctx.linear(up, lw.w_down, lw.b_down, LinearSite::ffn_down));
  }
  x = layer_norm(x, weights.final_gain, weights.final_bias);
  const Tensor projected = weights.head.defined() ? matmul(x, weights.head) : matmul(x, transpose(weights.token_embedding));
  return add_bias(projected, weights.head_bias);
}

Tensor sequence_logprob(const TransformerWeights& weights, std::span<const TokenId> prompt,
                        std::span<const TokenId> response, const ForwardOptions& options) {
  if (response.empty()) throw ArgumentError("sequence_logprob: empty response");
  if (prompt.empty()) throw ArgumentError("sequence_logprob: empty prompt");
  const std::size_t total = prompt.size() + response.size();
  if (total > weights.config.max_seq_len) {
    throw ArgumentError("sequence_logprob: prompt + response length " + std::to_string(total) + " exceeds max_seq_len " +
                        std::to_string(weights.config.max_seq_len));
  }
  // Position i predicts token i + 1; the last response token is never an input.
  TokenSeq inputs(prompt.begin(), prompt.end());
  inputs.insert(inputs.end(), response.begin(), response.end() - 1);
  TokenSeq targets(inputs.size(), 0);
  Mask mask(inputs.size(), 0);
  for (std::size_t i = 0; i < response.size(); ++i) {
    targets[prompt.size() - 1 + i] = response[i];
    mask[prompt.size() - 1 + i] = 1;
  }
  const Tensor logits = forward(weights, inputs, options);
  return neg(cross_entropy_logits(logits, targets, mask, Reduction::sum));
}

TokenSeq generate(const TransformerWeights& weights, std::span<const TokenId> prompt, const GenerateOptions& options,
                  const AdapterSet* adapters) {
  if (prompt.empty()) throw ArgumentError("generate: empty prompt");
  NoGradGuard no_grad;
  Rng rng(options.seed, 0x6e6e);
  ForwardOptions fwd;
  fwd.adapters = adapters;
  const bool greedy = options.strategy == DecodeStrategy::greedy || options.temperature <= 0.0 || options.top_k == 1;

  TokenSeq context(prompt.begin(), prompt.end());
  TokenSeq produced;
  const std::size_t vocab = weights.config.vocab_size;
  while (produced.size() < options.max_new_tokens && context.size() < weights.config.max_seq_len) {
    const Tensor logits = forward(weights, context, fwd);
    const auto row = logits.data().subspan((context.size() - 1) * vocab, vocab);
    TokenId next = 0;
    if (greedy) {
      next = static_cast<TokenId>(std::max_element(row.begin(), row.end()) - row.begin());
    } else {
      std::vector<TokenId> order(vocab);
      std::iota(order.begin(), order.end(), TokenId{0});
      std::stable_sort(order.begin(), order.end(), [&](TokenId a, TokenId b) { return row[a] > row[b]; });
      const std::size_t k = options.top_k == 0 ? vocab : std::min(options.top_k, vocab);
      std::vector<double> probs(k);
      const double top = row[order[0]];
      double total = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        probs[i] = std::exp((row[order[i]] - top) / options.temperature);
        total += probs[i];
      }
      const double u = rng.uniform() * total;
      double acc = 0.0;
      next = order[k - 1];
      for (std::size_t i = 0; i < k; ++i) {
        acc += probs[i];
        if (u < acc) {
          next = order[i];
          break;
        }
      }
    }
    if (next == kEosToken) break;
    produced.push_back(next);
    context.push_back(next);
  }
  return produced;
}

}  // namespace pedpipe
