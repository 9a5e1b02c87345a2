// Copyright (c) 2026, The gsrtr Authors
// SPDX-License-Identifier: Apache-2.0

#include "gsr/model.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "gsr/boxes.hpp"
#include "gsr/errors.hpp"
#include "gsr/named_array.hpp"

namespace gsr {

using json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Config

void ModelConfig::validate() const {
  auto fail = [](const std::string& what) { throw ValidationError("model config: " + what); };
  if (d == 0) fail("d must be positive");
  if (d_verb + d_role != d) fail("d_verb + d_role must equal d");
  if (d_role == 0) fail("d_role must be positive");
  if (heads == 0 || d % heads != 0) fail("heads must divide d");
  if (!full_pos_table && d % 2 != 0) fail("d must be even for row/column positional halves");
  if (ffn_dim == 0) fail("ffn_dim must be positive");
  if (channels == 0 || grid_h == 0 || grid_w == 0) fail("feature grid extents must be positive");
  for (double rate : {dropout.transformer, dropout.verb_head, dropout.noun_head, dropout.exist_head, dropout.box_head}) {
    if (rate < 0.0 || rate >= 1.0) fail("dropout rates must lie in [0, 1)");
  }
  for (double eps : {smoothing.verb, smoothing.noun}) {
    if (eps < 0.0 || eps > 1.0) fail("label smoothing must lie in [0, 1]");
  }
  if (num_verbs == 0 || num_roles == 0 || num_nouns == 0) fail("vocabulary sizes are not set");
}

std::string ModelConfig::to_json() const {
  json j;
  j["d"] = d;
  j["d_verb"] = d_verb;
  j["d_role"] = d_role;
  j["heads"] = heads;
  j["encoder_layers"] = encoder_layers;
  j["decoder_layers"] = decoder_layers;
  j["ffn_dim"] = ffn_dim;
  j["head_hidden"] = head_hidden;
  j["dropout"] = {{"transformer", dropout.transformer}, {"verb_head", dropout.verb_head},
                  {"noun_head", dropout.noun_head},     {"exist_head", dropout.exist_head},
                  {"box_head", dropout.box_head}};
  j["pre_ln"] = pre_ln;
  j["ln_eps"] = ln_eps;
  j["channels"] = channels;
  j["grid_h"] = grid_h;
  j["grid_w"] = grid_w;
  j["backbone_layers"] = backbone_layers;
  j["per_layer_pos"] = per_layer_pos;
  j["full_pos_table"] = full_pos_table;
  j["loss"] = {{"verb", loss.verb}, {"noun", loss.noun}, {"exist", loss.exist}, {"l1", loss.l1}, {"giou", loss.giou}};
  j["smoothing"] = {{"verb", smoothing.verb}, {"noun", smoothing.noun}};
  j["num_verbs"] = num_verbs;
  j["num_roles"] = num_roles;
  j["num_nouns"] = num_nouns;
  return j.dump(2);
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("model config: ") + e.what());
  }
  ModelConfig c;
  auto read = [&](const json& obj, const char* key, auto& field) {
    if (obj.contains(key)) field = obj[key].get<std::remove_reference_t<decltype(field)>>();
  };
  read(j, "d", c.d);
  read(j, "d_verb", c.d_verb);
  read(j, "d_role", c.d_role);
  read(j, "heads", c.heads);
  read(j, "encoder_layers", c.encoder_layers);
  read(j, "decoder_layers", c.decoder_layers);
  read(j, "ffn_dim", c.ffn_dim);
  read(j, "head_hidden", c.head_hidden);
  if (j.contains("dropout")) {
    const json& dj = j["dropout"];
    read(dj, "transformer", c.dropout.transformer);
    read(dj, "verb_head", c.dropout.verb_head);
    read(dj, "noun_head", c.dropout.noun_head);
    read(dj, "exist_head", c.dropout.exist_head);
    read(dj, "box_head", c.dropout.box_head);
  }
  read(j, "pre_ln", c.pre_ln);
  read(j, "ln_eps", c.ln_eps);
  read(j, "channels", c.channels);
  read(j, "grid_h", c.grid_h);
  read(j, "grid_w", c.grid_w);
  read(j, "backbone_layers", c.backbone_layers);
  read(j, "per_layer_pos", c.per_layer_pos);
  read(j, "full_pos_table", c.full_pos_table);
  if (j.contains("loss")) {
    const json& lj = j["loss"];
    read(lj, "verb", c.loss.verb);
    read(lj, "noun", c.loss.noun);
    read(lj, "exist", c.loss.exist);
    read(lj, "l1", c.loss.l1);
    read(lj, "giou", c.loss.giou);
  }
  if (j.contains("smoothing")) {
    read(j["smoothing"], "verb", c.smoothing.verb);
    read(j["smoothing"], "noun", c.smoothing.noun);
  }
  read(j, "num_verbs", c.num_verbs);
  read(j, "num_roles", c.num_roles);
  read(j, "num_nouns", c.num_nouns);
  return c;
}

// ---------------------------------------------------------------------------
// Parameters

Tensor Mlp::operator()(const Tensor& x, double rate, const ForwardContext& ctx) const {
  Tensor h = x;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = layers[i](h);
    if (i + 1 < layers.size()) h = apply_dropout(relu(h), rate, ctx);
  }
  return h;
}

void Mlp::collect(const std::string& prefix, std::vector<NamedTensor>& out) const {
  for (std::size_t i = 0; i < layers.size(); ++i) layers[i].collect(prefix + "." + std::to_string(i), out);
}

namespace {

Tensor normal_table(std::size_t rows, std::size_t cols, Rng& rng) {
  std::vector<double> v(rows * cols);
  for (double& x : v) x = rng.normal();
  return Tensor::from({rows, cols}, std::move(v), true);
}

Tensor uniform_table(std::size_t rows, std::size_t cols, Rng& rng) {
  std::vector<double> v(rows * cols);
  for (double& x : v) x = rng.uniform();
  return Tensor::from({rows, cols}, std::move(v), true);
}

Mlp make_mlp(std::vector<std::size_t> widths, Rng& rng) {
  Mlp m;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) m.layers.push_back(make_linear(widths[i], widths[i + 1], rng));
  return m;
}

ModelConfig with_space(ModelConfig config, const FrameSpace& space) {
  auto fill = [](std::size_t& field, std::size_t value, const char* what) {
    if (field == 0) {
      field = value;
    } else if (field != value) {
      throw ValidationError(std::string("model config ") + what + " does not match the frame space");
    }
  };
  fill(config.num_verbs, space.num_verbs(), "num_verbs");
  fill(config.num_roles, space.num_roles(), "num_roles");
  fill(config.num_nouns, space.num_nouns(), "num_nouns");
  return config;
}

}  // namespace

Model::Model(ModelConfig config, const FrameSpace& space, std::uint64_t seed)
    : Model(with_space(std::move(config), space), seed) {}

Model::Model(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
  config_.validate();
  const ModelConfig& c = config_;
  Rng rng(seed);
  for (std::size_t i = 0; i < c.backbone_layers; ++i) params_.backbone.push_back(make_linear(c.channels, c.channels, rng));
  params_.input_projection = make_linear(c.channels, c.d, rng);
  params_.verb_token = normal_table(1, c.d, rng);
  const std::size_t tables = c.per_layer_pos ? c.encoder_layers + c.decoder_layers : 1;
  for (std::size_t t = 0; t < std::max<std::size_t>(tables, 1); ++t) {
    PositionalTable p;
    if (c.full_pos_table) {
      p.full = uniform_table(c.grid_h * c.grid_w, c.d, rng);
    } else {
      p.rows = uniform_table(c.grid_h, c.d / 2, rng);
      p.cols = uniform_table(c.grid_w, c.d / 2, rng);
    }
    params_.positions.push_back(std::move(p));
  }
  for (std::size_t l = 0; l < c.encoder_layers; ++l) params_.encoder.push_back(make_encoder_layer(c.d, c.heads, c.ffn_dim, rng));
  for (std::size_t l = 0; l < c.decoder_layers; ++l) params_.decoder.push_back(make_decoder_layer(c.d, c.heads, c.ffn_dim, rng));
  params_.verb_norm = make_layer_norm(c.d);
  params_.decoder_norm = make_layer_norm(c.d);
  params_.verb_embedding = normal_table(c.num_verbs, c.d_verb, rng);
  params_.role_embedding = normal_table(c.num_roles, c.d_role, rng);
  const std::size_t hid = c.hidden();
  params_.verb_classifier = make_mlp({c.d, hid, c.num_verbs}, rng);
  params_.noun_classifier = make_mlp({c.d, hid, c.num_nouns}, rng);
  params_.exist_head = make_mlp({c.d, hid, 1}, rng);
  params_.box_head = make_mlp({c.d, hid, hid, 4}, rng);
}

std::vector<NamedTensor> Model::named_parameters() const {
  std::vector<NamedTensor> out;
  const ModelParams& p = params_;
  for (std::size_t i = 0; i < p.backbone.size(); ++i) p.backbone[i].collect("backbone." + std::to_string(i), out);
  p.input_projection.collect("input_projection", out);
  out.push_back({"verb_token", p.verb_token});
  for (std::size_t t = 0; t < p.positions.size(); ++t) {
    const std::string prefix = "positions." + std::to_string(t);
    if (p.positions[t].full.defined()) {
      out.push_back({prefix + ".full", p.positions[t].full});
    } else {
      out.push_back({prefix + ".rows", p.positions[t].rows});
      out.push_back({prefix + ".cols", p.positions[t].cols});
    }
  }
  for (std::size_t l = 0; l < p.encoder.size(); ++l) p.encoder[l].collect("encoder." + std::to_string(l), out);
  for (std::size_t l = 0; l < p.decoder.size(); ++l) p.decoder[l].collect("decoder." + std::to_string(l), out);
  p.verb_norm.collect("verb_norm", out);
  p.decoder_norm.collect("decoder_norm", out);
  if (p.verb_embedding.numel() > 0) out.push_back({"verb_embedding", p.verb_embedding});
  out.push_back({"role_embedding", p.role_embedding});
  p.verb_classifier.collect("verb_classifier", out);
  p.noun_classifier.collect("noun_classifier", out);
  p.exist_head.collect("exist_head", out);
  p.box_head.collect("box_head", out);
  return out;
}

Model Model::clone() const {
  Model copy(config_, 0);
  auto src = named_parameters();
  auto dst = copy.named_parameters();
  for (std::size_t i = 0; i < src.size(); ++i) {
    auto from = src[i].tensor.values();
    std::copy(from.begin(), from.end(), dst[i].tensor.mutable_values().begin());
  }
  return copy;
}

bool is_backbone_parameter(const std::string& name) { return name.rfind("backbone.", 0) == 0; }

void Model::save(const std::filesystem::path& checkpoint, const std::string& training_state) const {
  std::vector<NamedArray> arrays;
  for (const auto& [name, t] : named_parameters()) {
    arrays.push_back(NamedArray{name, DType::kFloat64, t.shape(), {t.values().begin(), t.values().end()}});
  }
  write_named_arrays(checkpoint, arrays);
  json meta;
  meta["format"] = "gsrtr-checkpoint-1";
  meta["config"] = json::parse(config_.to_json());
  meta["training"] = json::parse(training_state);
  std::ofstream os(checkpoint.string() + ".json", std::ios::trunc);
  if (!os) throw IoError("cannot write " + checkpoint.string() + ".json");
  os << meta.dump(2) << '\n';
}

Model Model::load(const std::filesystem::path& checkpoint) {
  std::ifstream is(checkpoint.string() + ".json");
  if (!is) throw IoError("cannot open " + checkpoint.string() + ".json");
  std::ostringstream ss;
  ss << is.rdbuf();
  json meta;
  try {
    meta = json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw IoError(checkpoint.string() + ".json: " + e.what());
  }
  if (!meta.contains("config")) throw IoError(checkpoint.string() + ".json: missing config");
  Model model(ModelConfig::from_json(meta["config"].dump()), 0);
  const auto arrays = read_named_arrays(checkpoint);
  auto params = model.named_parameters();
  if (arrays.size() != params.size()) {
    throw IoError(checkpoint.string() + ": holds " + std::to_string(arrays.size()) + " arrays, model expects " +
                  std::to_string(params.size()));
  }
  for (auto& [name, t] : params) {
    const auto a = find_array(arrays, name);
    if (!a) throw IoError(checkpoint.string() + ": missing parameter '" + name + "'");
    if (a->shape != t.shape()) {
      throw IoError(checkpoint.string() + ": parameter '" + name + "' has shape " + shape_string(a->shape) +
                    ", expected " + shape_string(t.shape()));
    }
    std::copy(a->values.begin(), a->values.end(), t.mutable_values().begin());
  }
  return model;
}

// ---------------------------------------------------------------------------
// Forward pieces

Tensor feature_tensor(const FeatureGrid& grid) {
  validate_feature_grid(grid);
  return Tensor::from({grid.channels, grid.height * grid.width}, grid.values);
}

Tensor project_features(const FeatureGrid& grid, const Model& model, const ForwardContext& /*ctx*/) {
  const ModelConfig& c = model.config();
  if (grid.channels != c.channels || grid.height != c.grid_h || grid.width != c.grid_w) {
    throw ShapeError("feature grid " + std::to_string(grid.channels) + "x" + std::to_string(grid.height) + "x" +
                     std::to_string(grid.width) + " does not match model " + std::to_string(c.channels) + "x" +
                     std::to_string(c.grid_h) + "x" + std::to_string(c.grid_w));
  }
  Tensor x = transpose(feature_tensor(grid));  // [hw x c]
  for (const Linear& layer : model.params().backbone) x = relu(layer(x));
  return model.params().input_projection(x);
}

Tensor positional_encoding(const Model& model, std::size_t table) {
  const ModelConfig& c = model.config();
  const PositionalTable& p = model.params().positions.at(c.per_layer_pos ? table : 0);
  if (p.full.defined()) return p.full;
  std::vector<std::size_t> ys, xs;
  for (std::size_t j = 0; j < c.grid_h * c.grid_w; ++j) {
    ys.push_back(j / c.grid_w);
    xs.push_back(j % c.grid_w);
  }
  return concat({gather_rows(p.rows, ys), gather_rows(p.cols, xs)}, 1);
}

EncoderOutput encode(const Tensor& image_features, const Model& model, const ForwardContext& ctx, ForwardTrace* trace) {
  const ModelConfig& c = model.config();
  const std::size_t hw = c.grid_h * c.grid_w;
  if (image_features.rank() != 2 || image_features.dim(0) != hw || image_features.dim(1) != c.d) {
    throw ShapeError("encode: expected image features [" + std::to_string(hw) + "x" + std::to_string(c.d) + "], got " +
                     shape_string(image_features.shape()));
  }
  const BlockOptions options{c.pre_ln, c.dropout.transformer, c.ln_eps};
  const Tensor zero_slot = Tensor::zeros({1, c.d});
  Tensor x = concat({model.params().verb_token, image_features}, 0);
  Tensor pos_prime;
  if (trace != nullptr) trace->encoder.assign(c.encoder_layers, {});
  for (std::size_t l = 0; l < c.encoder_layers; ++l) {
    if (l == 0 || c.per_layer_pos) pos_prime = concat({zero_slot, positional_encoding(model, l)}, 0);
    x = encoder_layer(x, pos_prime, model.params().encoder[l], options, ctx, trace ? &trace->encoder[l] : nullptr);
  }
  EncoderOutput out;
  out.verb_feature = model.params().verb_norm(slice(x, 0, 0, 1), c.ln_eps);
  out.image_memory = slice(x, 0, 1, hw);
  return out;
}

Tensor classify_verb(const Tensor& verb_feature, const Model& model, const ForwardContext& ctx) {
  const Tensor logits = model.params().verb_classifier(verb_feature, model.config().dropout.verb_head, ctx);
  return reshape(logits, {logits.numel()});
}

Tensor build_role_queries(std::size_t verb, const FrameSpace& space, const Model& model) {
  if (verb >= space.num_verbs()) throw ValidationError("unknown verb index " + std::to_string(verb));
  const auto& frame = space.frame(verb);
  const Tensor roles = gather_rows(model.params().role_embedding, frame);
  if (model.config().d_verb == 0) return roles;
  const Tensor verbs = gather_rows(model.params().verb_embedding, std::vector<std::size_t>(frame.size(), verb));
  return concat({verbs, roles}, 1);
}

Tensor decode(const Tensor& role_queries, const Tensor& image_memory, const Model& model, const ForwardContext& ctx,
              ForwardTrace* trace) {
  const ModelConfig& c = model.config();
  if (role_queries.rank() != 2 || role_queries.dim(1) != c.d) {
    throw ShapeError("decode: role queries " + shape_string(role_queries.shape()) + " are not [n x d]");
  }
  const BlockOptions options{c.pre_ln, c.dropout.transformer, c.ln_eps};
  Tensor x = Tensor::zeros(role_queries.shape());
  Tensor pos;
  if (trace != nullptr) trace->decoder.assign(c.decoder_layers, {});
  for (std::size_t l = 0; l < c.decoder_layers; ++l) {
    if (l == 0 || c.per_layer_pos) pos = positional_encoding(model, c.encoder_layers + l);
    x = decoder_layer(x, role_queries, image_memory, pos, model.params().decoder[l], options, ctx,
                      trace ? &trace->decoder[l] : nullptr);
  }
  return model.params().decoder_norm(x, c.ln_eps);
}

GroundedPrediction predict_heads(const Tensor& role_features, const Model& model, const ForwardContext& ctx) {
  const ModelConfig& c = model.config();
  const ModelParams& p = model.params();
  GroundedPrediction out;
  out.noun_logits = p.noun_classifier(role_features, c.dropout.noun_head, ctx);
  out.boxes = sigmoid(p.box_head(role_features, c.dropout.box_head, ctx));
  out.existence = reshape(sigmoid(p.exist_head(role_features, c.dropout.exist_head, ctx)), {role_features.dim(0)});
  return out;
}

ForwardOutput forward(const FeatureGrid& grid, std::size_t conditioning_verb, const FrameSpace& space,
                      const Model& model, const ForwardContext& ctx) {
  const EncoderOutput enc = encode(project_features(grid, model, ctx), model, ctx);
  ForwardOutput out;
  out.verb_logits = classify_verb(enc.verb_feature, model, ctx);
  const Tensor features = decode(build_role_queries(conditioning_verb, space, model), enc.image_memory, model, ctx);
  out.grounded = predict_heads(features, model, ctx);
  out.grounded.verb = conditioning_verb;
  return out;
}

// ---------------------------------------------------------------------------
// Inference

std::vector<std::size_t> top_k(std::span<const double> logits, std::size_t k) {
  if (k > logits.size()) throw ValidationError("top_k: k exceeds the number of classes");
  std::vector<std::size_t> order(logits.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) { return logits[a] > logits[b] || (logits[a] == logits[b] && a < b); });
  order.resize(k);
  return order;
}

VerbPrediction gate_prediction(const GroundedPrediction& grounded, const FrameSpace& space, double image_width,
                               double image_height) {
  const auto& frame = space.frame(grounded.verb);
  const std::size_t n = grounded.noun_logits.dim(1);
  VerbPrediction out;
  out.verb = space.verb_name(grounded.verb);
  for (std::size_t k = 0; k < frame.size(); ++k) {
    const auto logits = grounded.noun_logits.values().subspan(k * n, n);
    RolePrediction rp;
    rp.role = space.role_name(frame[k]);
    rp.noun = space.noun_name(top_k(logits, 1).front());
    if (grounded.existence[k] >= kExistenceThreshold) {
      const BoxCXCYWH b{grounded.boxes.at(k, 0), grounded.boxes.at(k, 1), grounded.boxes.at(k, 2),
                        grounded.boxes.at(k, 3)};
      rp.box = denormalize(cxcywh_to_xyxy(b), image_width, image_height);
    }
    out.roles.push_back(std::move(rp));
  }
  return out;
}

SituationPrediction infer(const FeatureGrid& grid, double image_width, double image_height, const FrameSpace& space,
                          const Model& model) {
  NoGradGuard no_grad;
  const EncoderOutput enc = encode(project_features(grid, model), model);
  const Tensor logits = classify_verb(enc.verb_feature, model);
  SituationPrediction out;
  out.verb_logits.assign(logits.values().begin(), logits.values().end());
  out.verb = top_k(out.verb_logits, 1).front();
  GroundedPrediction g = predict_heads(decode(build_role_queries(out.verb, space, model), enc.image_memory, model), model);
  g.verb = out.verb;
  out.existence.assign(g.existence.values().begin(), g.existence.values().end());
  out.grounded = gate_prediction(g, space, image_width, image_height);
  return out;
}

PredictionRecord infer_topk(const std::string& image_id, const FeatureGrid& grid, double image_width,
                            double image_height, const FrameSpace& space, const Model& model, std::size_t k,
                            std::optional<std::size_t> ground_truth_verb) {
  NoGradGuard no_grad;
  const EncoderOutput enc = encode(project_features(grid, model), model);
  const Tensor logits = classify_verb(enc.verb_feature, model);
  auto conditioned = [&](std::size_t verb) {
    GroundedPrediction g = predict_heads(decode(build_role_queries(verb, space, model), enc.image_memory, model), model);
    g.verb = verb;
    return gate_prediction(g, space, image_width, image_height);
  };
  PredictionRecord record;
  record.image_id = image_id;
  for (std::size_t v : top_k(logits.values(), k)) record.entries.push_back(conditioned(v));
  if (ground_truth_verb) record.ground_truth = conditioned(*ground_truth_verb);
  return record;
}

// ---------------------------------------------------------------------------
// Attention export

const AttentionMap& AttentionTrace::find(const std::string& block, std::size_t layer, std::size_t head) const {
  for (const auto& m : maps) {
    if (m.block == block && m.layer == layer && m.head == head) return m;
  }
  throw ValidationError("no attention map " + block + " layer " + std::to_string(layer) + " head " + std::to_string(head));
}

std::vector<double> AttentionTrace::verb_token_map(std::size_t layer, std::size_t head) const {
  const AttentionMap& m = find("encoder_self", layer, head);
  return {m.weights.begin() + 1, m.weights.begin() + static_cast<std::ptrdiff_t>(m.cols)};
}

std::vector<double> AttentionTrace::role_image_map(std::size_t layer, std::size_t head, std::size_t role) const {
  const AttentionMap& m = find("decoder_cross", layer, head);
  if (role >= m.rows) throw ValidationError("role index out of range");
  const auto begin = m.weights.begin() + static_cast<std::ptrdiff_t>(role * m.cols);
  return {begin, begin + static_cast<std::ptrdiff_t>(m.cols)};
}

AttentionTrace extract_attention(const FeatureGrid& grid, std::size_t verb, const FrameSpace& space,
                                 const Model& model) {
  NoGradGuard no_grad;
  const ModelConfig& c = model.config();
  ForwardTrace ft;
  const EncoderOutput enc = encode(project_features(grid, model), model, {}, &ft);
  decode(build_role_queries(verb, space, model), enc.image_memory, model, {}, &ft);

  std::vector<std::string> cells;
  for (std::size_t y = 0; y < c.grid_h; ++y)
    for (std::size_t x = 0; x < c.grid_w; ++x) cells.push_back("cell(" + std::to_string(y) + "," + std::to_string(x) + ")");
  std::vector<std::string> encoder_tokens{"verb_token"};
  encoder_tokens.insert(encoder_tokens.end(), cells.begin(), cells.end());
  std::vector<std::string> roles;
  for (std::size_t r : space.frame(verb)) roles.push_back(space.role_name(r));

  AttentionTrace trace;
  trace.grid_h = c.grid_h;
  trace.grid_w = c.grid_w;
  auto push = [&](const char* block, std::size_t layer, const std::vector<Tensor>& heads,
                  const std::vector<std::string>& q, const std::vector<std::string>& k) {
    for (std::size_t h = 0; h < heads.size(); ++h) {
      AttentionMap m{block, layer, h, q, k, heads[h].dim(0), heads[h].dim(1),
                     {heads[h].values().begin(), heads[h].values().end()}};
      trace.maps.push_back(std::move(m));
    }
  };
  for (std::size_t l = 0; l < ft.encoder.size(); ++l) push("encoder_self", l, ft.encoder[l].self_heads, encoder_tokens, encoder_tokens);
  for (std::size_t l = 0; l < ft.decoder.size(); ++l) {
    push("decoder_self", l, ft.decoder[l].self_heads, roles, roles);
    push("decoder_cross", l, ft.decoder[l].cross_heads, roles, cells);
  }
  return trace;
}

void write_attention_trace(const AttentionTrace& trace, const std::filesystem::path& directory) {
  std::filesystem::create_directories(directory);
  json index = json::array();
  for (const auto& m : trace.maps) {
    const std::string file = m.block + "_l" + std::to_string(m.layer) + "_h" + std::to_string(m.head) + ".csv";
    std::ofstream os(directory / file, std::ios::trunc);
    if (!os) throw IoError("cannot write " + (directory / file).string());
    os.precision(17);
    for (std::size_t r = 0; r < m.rows; ++r) {
      for (std::size_t col = 0; col < m.cols; ++col) os << (col ? "," : "") << m.weights[r * m.cols + col];
      os << '\n';
    }
    index.push_back(json{{"file", file},
                         {"block", m.block},
                         {"layer", m.layer},
                         {"head", m.head},
                         {"query_labels", m.query_labels},
                         {"key_labels", m.key_labels}});
  }
  json root{{"grid_h", trace.grid_h}, {"grid_w", trace.grid_w}, {"maps", index}};
  std::ofstream os(directory / "index.json", std::ios::trunc);
  if (!os) throw IoError("cannot write " + (directory / "index.json").string());
  os << root.dump(2) << '\n';
}

std::size_t count_parameters(const Model& model) {
  std::size_t total = 0;
  for (const auto& p : model.named_parameters()) total += p.tensor.numel();
  return total;
}

}  // namespace gsr
