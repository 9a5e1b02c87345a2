// Copyright (c) 2026, The gsrtr Authors
// SPDX-License-Identifier: Apache-2.0
//
// The grounded situation recognition transformer: feature projection, encoder
// with a learnable verb token, decoder driven by semantic role queries, the
// verb/noun/box-existence/box heads and the gated inference procedure.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gsr/ontology.hpp"
#include "gsr/prediction.hpp"
#include "gsr/rng.hpp"
#include "gsr/tensor.hpp"
#include "gsr/transformer.hpp"

namespace gsr {

struct DropoutRates {
  double transformer = 0.15;
  double verb_head = 0.3;
  double noun_head = 0.3;
  double exist_head = 0.2;
  double box_head = 0.2;
};

struct LossWeights {
  double verb = 1.0;
  double noun = 1.0;
  double exist = 5.0;
  double l1 = 5.0;
  double giou = 5.0;
};

struct LabelSmoothing {
  double verb = 0.3;
  double noun = 0.2;
};

struct ModelConfig {
  std::size_t d = 512;
  std::size_t d_verb = 256;  // verb part of a role query; 0 disables verb embeddings
  std::size_t d_role = 256;
  std::size_t heads = 8;
  std::size_t encoder_layers = 6;
  std::size_t decoder_layers = 6;
  std::size_t ffn_dim = 2048;
  std::size_t head_hidden = 0;  // 0 means 2d
  DropoutRates dropout;
  bool pre_ln = true;
  double ln_eps = 1e-5;

  std::size_t channels = 2048;  // backbone feature channels
  std::size_t grid_h = 7;
  std::size_t grid_w = 7;
  std::size_t backbone_layers = 0;  // pointwise c->c layers trained at the backbone learning rate
  bool per_layer_pos = false;       // one positional table per encoder/decoder layer
  bool full_pos_table = false;      // hw x d table instead of row half + column half

  LossWeights loss;
  LabelSmoothing smoothing;

  // Vocabulary sizes; filled from the frame space when zero.
  std::size_t num_verbs = 0;
  std::size_t num_roles = 0;
  std::size_t num_nouns = 0;

  std::size_t hidden() const { return head_hidden ? head_hidden : 2 * d; }
  std::size_t head_dim() const { return d / heads; }
  /// Throws ValidationError when an invariant fails.
  void validate() const;

  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
};

struct PositionalTable {
  Tensor rows;  // [h x d/2]
  Tensor cols;  // [w x d/2]
  Tensor full;  // [hw x d], only with full_pos_table
};

/// Fully connected stack with ReLU and dropout between layers.
struct Mlp {
  std::vector<Linear> layers;
  Tensor operator()(const Tensor& x, double dropout, const ForwardContext& ctx) const;
  void collect(const std::string& prefix, std::vector<NamedTensor>& out) const;
};

struct ModelParams {
  std::vector<Linear> backbone;
  Linear input_projection;  // 1x1 convolution, c -> d
  Tensor verb_token;        // [1 x d]
  std::vector<PositionalTable> positions;
  std::vector<EncoderLayerParams> encoder;
  std::vector<DecoderLayerParams> decoder;
  LayerNormParams verb_norm;
  LayerNormParams decoder_norm;
  Tensor verb_embedding;  // [|V| x d_verb]
  Tensor role_embedding;  // [|R| x d_role]
  Mlp verb_classifier;
  Mlp noun_classifier;
  Mlp exist_head;
  Mlp box_head;
};

class Model {
 public:
  Model(ModelConfig config, const FrameSpace& space, std::uint64_t seed);
  /// Vocabulary sizes must already be set in `config`.
  Model(ModelConfig config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const ModelParams& params() const { return params_; }
  ModelParams& params() { return params_; }

  /// Every trainable tensor with a stable dotted name, in a fixed order.
  std::vector<NamedTensor> named_parameters() const;

  /// Deep copy with independent parameter storage.
  Model clone() const;

  /// Writes the parameter container at `checkpoint` and "<checkpoint>.json"
  /// holding the config and `training_state` (a JSON object, may be "{}").
  void save(const std::filesystem::path& checkpoint, const std::string& training_state = "{}") const;
  static Model load(const std::filesystem::path& checkpoint);

 private:
  ModelConfig config_;
  ModelParams params_;
};

bool is_backbone_parameter(const std::string& name);

struct EncoderOutput {
  Tensor verb_feature;  // [1 x d], layer-normalized
  Tensor image_memory;  // [hw x d]
};

/// Tensor outputs for one conditioning verb, one row per frame role.
struct GroundedPrediction {
  std::size_t verb = 0;
  Tensor noun_logits;  // [|R_v| x |N|]
  Tensor boxes;        // [|R_v| x 4], normalized cx, cy, w, h
  Tensor existence;    // [|R_v|]
};

/// Optional attention capture during a forward pass.
struct ForwardTrace {
  std::vector<LayerAttention> encoder;
  std::vector<LayerAttention> decoder;
};

Tensor feature_tensor(const FeatureGrid& grid);

/// c x h x w -> [hw x d]; row j is grid cell (j / w, j % w).
Tensor project_features(const FeatureGrid& grid, const Model& model, const ForwardContext& ctx = {});
/// Positional encodings for a layer ([hw x d]); the shared table unless per_layer_pos.
Tensor positional_encoding(const Model& model, std::size_t table);
EncoderOutput encode(const Tensor& image_features, const Model& model, const ForwardContext& ctx = {},
                     ForwardTrace* trace = nullptr);
Tensor classify_verb(const Tensor& verb_feature, const Model& model, const ForwardContext& ctx = {});
/// [|R_v| x d]; row k is the verb embedding concatenated with the embedding of frame role k.
Tensor build_role_queries(std::size_t verb, const FrameSpace& space, const Model& model);
/// Decodes from a zero input; final LayerNorm applied.
Tensor decode(const Tensor& role_queries, const Tensor& image_memory, const Model& model,
              const ForwardContext& ctx = {}, ForwardTrace* trace = nullptr);
GroundedPrediction predict_heads(const Tensor& role_features, const Model& model, const ForwardContext& ctx = {});

/// Full conditioned pass from a feature grid (used for training with the gold verb).
struct ForwardOutput {
  Tensor verb_logits;  // [|V|]
  GroundedPrediction grounded;
};
ForwardOutput forward(const FeatureGrid& grid, std::size_t conditioning_verb, const FrameSpace& space,
                      const Model& model, const ForwardContext& ctx = {});

/// Indices of the k largest logits, descending; ties go to the lower index.
std::vector<std::size_t> top_k(std::span<const double> logits, std::size_t k);

inline constexpr double kExistenceThreshold = 0.5;

/// Converts head outputs into names and absolute-pixel boxes, dropping boxes
/// whose existence probability is below 0.5.
VerbPrediction gate_prediction(const GroundedPrediction& grounded, const FrameSpace& space, double image_width,
                               double image_height);

struct SituationPrediction {
  std::vector<double> verb_logits;
  std::size_t verb = 0;
  VerbPrediction grounded;
  std::vector<double> existence;  // per role, before gating
};

SituationPrediction infer(const FeatureGrid& grid, double image_width, double image_height, const FrameSpace& space,
                          const Model& model);

/// Top-k verbs, each decoded under its own role queries. When `ground_truth_verb`
/// is given the record also carries the prediction conditioned on it.
PredictionRecord infer_topk(const std::string& image_id, const FeatureGrid& grid, double image_width,
                            double image_height, const FrameSpace& space, const Model& model, std::size_t k = 5,
                            std::optional<std::size_t> ground_truth_verb = std::nullopt);

struct AttentionMap {
  std::string block;  // encoder_self, decoder_self, decoder_cross
  std::size_t layer = 0;
  std::size_t head = 0;
  std::vector<std::string> query_labels;
  std::vector<std::string> key_labels;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> weights;  // row-major [rows x cols], rows sum to 1
};

struct AttentionTrace {
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;
  std::vector<AttentionMap> maps;

  /// Verb-token attention over image cells ([h x w]) for an encoder layer/head.
  std::vector<double> verb_token_map(std::size_t layer, std::size_t head) const;
  /// Attention of one role over image cells ([h x w]) for a decoder layer/head.
  std::vector<double> role_image_map(std::size_t layer, std::size_t head, std::size_t role) const;
  const AttentionMap& find(const std::string& block, std::size_t layer, std::size_t head) const;
};

/// Dropout off. Keys labelled "verb_token" and "cell(y,x)", roles by name.
AttentionTrace extract_attention(const FeatureGrid& grid, std::size_t verb, const FrameSpace& space,
                                 const Model& model);

/// Writes one CSV per map plus index.json.
void write_attention_trace(const AttentionTrace& trace, const std::filesystem::path& directory);

std::size_t count_parameters(const Model& model);

}  // namespace gsr
