// Copyright (c) 2026, The gsrtr Authors
// SPDX-License-Identifier: Apache-2.0
//
// Attention, encoder-layer and decoder-layer math.
//
// Sequences are stored token-major: a sequence of n vectors of width d is an
// [n x d] tensor (the transpose of the column-vector d x n notation). Weight
// matrices are [in x out] so a projection is x . W.

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "gsr/errors.hpp"
#include "gsr/rng.hpp"
#include "gsr/tensor.hpp"

namespace gsr {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct Linear {
  Tensor weight;  // [in x out]
  Tensor bias;    // [out]

  Tensor operator()(const Tensor& x) const { return add_bias(matmul(x, weight), bias); }
  std::size_t in_features() const { return weight.dim(0); }
  std::size_t out_features() const { return weight.dim(1); }
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

struct LayerNormParams {
  Tensor gain;
  Tensor bias;

  Tensor operator()(const Tensor& x, double eps) const { return layer_norm(x, gain, bias, eps); }
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

/// Query/key/value/output projections of one attention block. Head m uses
/// columns [m*d', (m+1)*d') of w_q, w_k and w_v; that column block is the
/// transposed per-head projection. No biases, as in the block definition.
struct AttentionParams {
  Tensor w_q;  // [d x d]
  Tensor w_k;
  Tensor w_v;
  Tensor w_o;
  std::size_t heads = 1;

  std::size_t width() const { return w_q.dim(0); }
  std::size_t head_dim() const { return width() / heads; }
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

struct FeedForwardParams {
  Linear expand;    // d -> ffn_dim
  Linear contract;  // ffn_dim -> d
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

struct EncoderLayerParams {
  AttentionParams self_attention;
  FeedForwardParams ffn;
  LayerNormParams norm_attention;
  LayerNormParams norm_ffn;
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

struct DecoderLayerParams {
  AttentionParams self_attention;
  AttentionParams cross_attention;
  FeedForwardParams ffn;
  LayerNormParams norm_self;
  LayerNormParams norm_cross;
  LayerNormParams norm_ffn;
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

/// Uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out)).
Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);
Linear make_linear(std::size_t in, std::size_t out, Rng& rng);
LayerNormParams make_layer_norm(std::size_t d);
AttentionParams make_attention(std::size_t d, std::size_t heads, Rng& rng);
EncoderLayerParams make_encoder_layer(std::size_t d, std::size_t heads, std::size_t ffn_dim, Rng& rng);
DecoderLayerParams make_decoder_layer(std::size_t d, std::size_t heads, std::size_t ffn_dim, Rng& rng);

struct BlockOptions {
  bool pre_ln = true;
  double dropout = 0.15;
  double ln_eps = 1e-5;
};

struct ForwardContext {
  bool train = false;
  Rng* rng = nullptr;  // required when train is true and any dropout rate is nonzero
};

/// Per-head attention weights of one layer ([n_q x n_kv] each).
struct LayerAttention {
  std::vector<Tensor> self_heads;
  std::vector<Tensor> cross_heads;  // decoder only
};

/// Scaled dot-product attention. q: [n_q x d'], k and v: [n_kv x d'].
/// Output row i is sum_j softmax_j(q_i . k_j / sqrt(d')) v_j.
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, Tensor* weights = nullptr);

/// Multi-head attention. `q_additive` is added to x_q before the query
/// projection and `k_additive` to x_kv before the key projection; values are
/// always projected from the raw x_kv. Either additive may be null.
Tensor multi_head_attention(const Tensor& x_q, const Tensor& x_kv, const AttentionParams& params,
                            const Tensor* q_additive, const Tensor* k_additive,
                            std::vector<Tensor>* head_weights = nullptr);

/// Pre-LN: x + Dropout(block(LayerNorm(x))). Post-LN: LayerNorm(x + Dropout(block(x))).
template <typename Block>
Tensor residual(const Tensor& x, Block&& block, const LayerNormParams& norm, const BlockOptions& options,
                const ForwardContext& ctx);

/// W2 . Dropout(relu(W1 x + b1)) + b2
Tensor feed_forward(const Tensor& x, const FeedForwardParams& params, double dropout, const ForwardContext& ctx);

/// x: [(1+hw) x d]; pos_prime: [(1+hw) x d] with row 0 (verb-token slot) zero.
Tensor encoder_layer(const Tensor& x, const Tensor& pos_prime, const EncoderLayerParams& params,
                     const BlockOptions& options, const ForwardContext& ctx, LayerAttention* trace = nullptr);

/// x and queries: [|R_v| x d]; memory and pos: [hw x d].
Tensor decoder_layer(const Tensor& x, const Tensor& queries, const Tensor& memory, const Tensor& pos,
                     const DecoderLayerParams& params, const BlockOptions& options, const ForwardContext& ctx,
                     LayerAttention* trace = nullptr);

// ---------------------------------------------------------------------------

Tensor apply_dropout(const Tensor& x, double rate, const ForwardContext& ctx);

template <typename Block>
Tensor residual(const Tensor& x, Block&& block, const LayerNormParams& norm, const BlockOptions& options,
                const ForwardContext& ctx) {
  if (options.pre_ln) {
    Tensor y = block(norm(x, options.ln_eps));
    if (y.shape() != x.shape()) throw ShapeError("residual: block changes width");
    return add(x, apply_dropout(y, options.dropout, ctx));
  }
  Tensor y = block(x);
  if (y.shape() != x.shape()) throw ShapeError("residual: block changes width");
  return norm(add(x, apply_dropout(y, options.dropout, ctx)), options.ln_eps);
}

}  // namespace gsr
