// Copyright (c) 2026, The gsrtr Authors
// SPDX-License-Identifier: Apache-2.0

#include "gsr/transformer.hpp"

#include <cmath>

#include "gsr/errors.hpp"

namespace gsr {

void Linear::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  out.push_back({prefix + ".weight", weight});
  out.push_back({prefix + ".bias", bias});
}

void LayerNormParams::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  out.push_back({prefix + ".gain", gain});
  out.push_back({prefix + ".bias", bias});
}

void AttentionParams::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  out.push_back({prefix + ".w_q", w_q});
  out.push_back({prefix + ".w_k", w_k});
  out.push_back({prefix + ".w_v", w_v});
  out.push_back({prefix + ".w_o", w_o});
}

void FeedForwardParams::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  expand.collect(prefix + ".expand", out);
  contract.collect(prefix + ".contract", out);
}

void EncoderLayerParams::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  self_attention.collect(prefix + ".self_attention", out);
  ffn.collect(prefix + ".ffn", out);
  norm_attention.collect(prefix + ".norm_attention", out);
  norm_ffn.collect(prefix + ".norm_ffn", out);
}

void DecoderLayerParams::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  self_attention.collect(prefix + ".self_attention", out);
  cross_attention.collect(prefix + ".cross_attention", out);
  ffn.collect(prefix + ".ffn", out);
  norm_self.collect(prefix + ".norm_self", out);
  norm_cross.collect(prefix + ".norm_cross", out);
  norm_ffn.collect(prefix + ".norm_ffn", out);
}

Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::vector<double> values(fan_in * fan_out);
  for (double& v : values) v = rng.uniform(-bound, bound);
  return Tensor::from({fan_in, fan_out}, std::move(values), true);
}

Linear make_linear(std::size_t in, std::size_t out, Rng& rng) {
  return Linear{xavier_uniform(in, out, rng), Tensor::zeros({out}, true)};
}

LayerNormParams make_layer_norm(std::size_t d) {
  return LayerNormParams{Tensor::full({d}, 1.0, true), Tensor::zeros({d}, true)};
}

AttentionParams make_attention(std::size_t d, std::size_t heads, Rng& rng) {
  if (heads == 0 || d % heads != 0) {
    throw ValidationError("head count " + std::to_string(heads) + " does not divide width " + std::to_string(d));
  }
  AttentionParams p;
  p.w_q = xavier_uniform(d, d, rng);
  p.w_k = xavier_uniform(d, d, rng);
  p.w_v = xavier_uniform(d, d, rng);
  p.w_o = xavier_uniform(d, d, rng);
  p.heads = heads;
  return p;
}

EncoderLayerParams make_encoder_layer(std::size_t d, std::size_t heads, std::size_t ffn_dim, Rng& rng) {
  EncoderLayerParams p;
  p.self_attention = make_attention(d, heads, rng);
  p.ffn.expand = make_linear(d, ffn_dim, rng);
  p.ffn.contract = make_linear(ffn_dim, d, rng);
  p.norm_attention = make_layer_norm(d);
  p.norm_ffn = make_layer_norm(d);
  return p;
}

DecoderLayerParams make_decoder_layer(std::size_t d, std::size_t heads, std::size_t ffn_dim, Rng& rng) {
  DecoderLayerParams p;
  p.self_attention = make_attention(d, heads, rng);
  p.cross_attention = make_attention(d, heads, rng);
  p.ffn.expand = make_linear(d, ffn_dim, rng);
  p.ffn.contract = make_linear(ffn_dim, d, rng);
  p.norm_self = make_layer_norm(d);
  p.norm_cross = make_layer_norm(d);
  p.norm_ffn = make_layer_norm(d);
  return p;
}

Tensor apply_dropout(const Tensor& x, double rate, const ForwardContext& ctx) {
  if (!ctx.train || rate == 0.0) return x;
  if (ctx.rng == nullptr) throw ValidationError("training forward pass needs an Rng for dropout");
  return dropout(x, rate, *ctx.rng, true);
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, Tensor* weights) {
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2 || q.dim(1) != k.dim(1) || k.dim(0) != v.dim(0)) {
    throw ShapeError("attention: inconsistent shapes q" + shape_string(q.shape()) + " k" + shape_string(k.shape()) +
                     " v" + shape_string(v.shape()));
  }
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(q.dim(1)));
  Tensor w = softmax(scale(matmul(q, transpose(k)), inv_sqrt), 1);
  if (weights != nullptr) *weights = w;
  return matmul(w, v);
}

Tensor multi_head_attention(const Tensor& x_q, const Tensor& x_kv, const AttentionParams& params,
                            const Tensor* q_additive, const Tensor* k_additive, std::vector<Tensor>* head_weights) {
  const std::size_t d = params.width();
  if (params.heads == 0 || d % params.heads != 0) {
    throw ShapeError("multi_head_attention: " + std::to_string(params.heads) + " heads do not divide " +
                     std::to_string(d));
  }
  if (x_q.rank() != 2 || x_kv.rank() != 2 || x_q.dim(1) != d || x_kv.dim(1) != d) {
    throw ShapeError("multi_head_attention: inputs " + shape_string(x_q.shape()) + ", " +
                     shape_string(x_kv.shape()) + " do not have width " + std::to_string(d));
  }
  if (q_additive != nullptr && q_additive->shape() != x_q.shape()) {
    throw ShapeError("multi_head_attention: query additive " + shape_string(q_additive->shape()) +
                     " does not match " + shape_string(x_q.shape()));
  }
  if (k_additive != nullptr && k_additive->shape() != x_kv.shape()) {
    throw ShapeError("multi_head_attention: key additive " + shape_string(k_additive->shape()) +
                     " does not match " + shape_string(x_kv.shape()));
  }
  const Tensor q_in = q_additive ? add(x_q, *q_additive) : x_q;
  const Tensor k_in = k_additive ? add(x_kv, *k_additive) : x_kv;
  const Tensor q_all = matmul(q_in, params.w_q);
  const Tensor k_all = matmul(k_in, params.w_k);
  const Tensor v_all = matmul(x_kv, params.w_v);

  const std::size_t dh = params.head_dim();
  std::vector<Tensor> heads;
  heads.reserve(params.heads);
  if (head_weights != nullptr) head_weights->clear();
  for (std::size_t m = 0; m < params.heads; ++m) {
    Tensor w;
    heads.push_back(attention(slice(q_all, 1, m * dh, dh), slice(k_all, 1, m * dh, dh), slice(v_all, 1, m * dh, dh),
                              head_weights ? &w : nullptr));
    if (head_weights != nullptr) head_weights->push_back(w);
  }
  const Tensor joined = params.heads == 1 ? heads.front() : concat(heads, 1);
  return matmul(joined, params.w_o);
}

Tensor feed_forward(const Tensor& x, const FeedForwardParams& params, double rate, const ForwardContext& ctx) {
  return params.contract(apply_dropout(relu(params.expand(x)), rate, ctx));
}

Tensor encoder_layer(const Tensor& x, const Tensor& pos_prime, const EncoderLayerParams& params,
                     const BlockOptions& options, const ForwardContext& ctx, LayerAttention* trace) {
  if (pos_prime.shape() != x.shape()) {
    throw ShapeError("encoder_layer: positional encodings " + shape_string(pos_prime.shape()) + " vs input " +
                     shape_string(x.shape()));
  }
  for (std::size_t j = 0; j < pos_prime.dim(1); ++j) {
    if (pos_prime[j] != 0.0) throw ValidationError("encoder_layer: positional encoding of the verb-token slot must be zero");
  }
  Tensor h = residual(
      x,
      [&](const Tensor& in) {
        return multi_head_attention(in, in, params.self_attention, &pos_prime, &pos_prime,
                                    trace ? &trace->self_heads : nullptr);
      },
      params.norm_attention, options, ctx);
  return residual(
      h, [&](const Tensor& in) { return feed_forward(in, params.ffn, options.dropout, ctx); }, params.norm_ffn, options,
      ctx);
}

Tensor decoder_layer(const Tensor& x, const Tensor& queries, const Tensor& memory, const Tensor& pos,
                     const DecoderLayerParams& params, const BlockOptions& options, const ForwardContext& ctx,
                     LayerAttention* trace) {
  if (queries.shape() != x.shape()) {
    throw ShapeError("decoder_layer: role queries " + shape_string(queries.shape()) + " vs input " +
                     shape_string(x.shape()));
  }
  if (pos.shape() != memory.shape()) {
    throw ShapeError("decoder_layer: positional encodings " + shape_string(pos.shape()) + " vs image features " +
                     shape_string(memory.shape()));
  }
  Tensor h = residual(
      x,
      [&](const Tensor& in) {
        return multi_head_attention(in, in, params.self_attention, &queries, &queries,
                                    trace ? &trace->self_heads : nullptr);
      },
      params.norm_self, options, ctx);
  h = residual(
      h,
      [&](const Tensor& in) {
        return multi_head_attention(in, memory, params.cross_attention, &queries, &pos,
                                    trace ? &trace->cross_heads : nullptr);
      },
      params.norm_cross, options, ctx);
  return residual(
      h, [&](const Tensor& in) { return feed_forward(in, params.ffn, options.dropout, ctx); }, params.norm_ffn, options,
      ctx);
}

}  // namespace gsr
