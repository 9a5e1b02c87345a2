// Copyright (c) 2026, The gsrtr Authors
// SPDX-License-Identifier: Apache-2.0
//
// Shared fixtures for the unit tests.

#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "gsr/model.hpp"
#include "gsr/rng.hpp"
#include "gsr/tensor.hpp"

namespace gsr::testing {

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0, bool grad = true) {
  std::vector<double> v(shape_numel(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v), grad);
}

/// Contracts a tensor with fixed random weights so every output entry gets a
/// distinct upstream gradient.
inline Tensor probe(const Tensor& t, std::uint64_t seed = 99) {
  Rng rng(seed);
  return sum(mul(t, random_tensor(t.shape(), rng, -1.0, 1.0, false)));
}

inline std::vector<double> copy(std::span<const double> s) { return {s.begin(), s.end()}; }

/// Three-verb space with frames of one, two and three roles.
inline FrameSpace tiny_space() {
  return FrameSpace({"run", "catch", "give"}, {{"agent"}, {"agent", "item"}, {"agent", "item", "recipient"}},
                    {"agent", "item", "recipient"}, {"dog", "ball", "man", "stick"});
}

inline ModelConfig tiny_config(const FrameSpace& space, std::size_t d = 8) {
  ModelConfig c;
  c.d = d;
  c.d_verb = d / 2;
  c.d_role = d - d / 2;
  c.heads = 2;
  c.encoder_layers = 1;
  c.decoder_layers = 1;
  c.ffn_dim = 2 * d;
  c.channels = 3;
  c.grid_h = 2;
  c.grid_w = 3;
  c.num_verbs = space.num_verbs();
  c.num_roles = space.num_roles();
  c.num_nouns = space.num_nouns();
  return c;
}

// Parameter count written out term by term from the architecture.
inline std::size_t closed_form_parameters(const ModelConfig& c) {
  const std::size_t d = c.d, f = c.ffn_dim, h = c.hidden(), ch = c.channels;
  const std::size_t linear_dd = d * d;
  const std::size_t ffn = d * f + f + f * d + d;
  const std::size_t ln = 2 * d;
  const std::size_t encoder = 4 * linear_dd + ffn + 2 * ln;
  const std::size_t decoder = 8 * linear_dd + ffn + 3 * ln;
  const std::size_t tables = c.per_layer_pos ? c.encoder_layers + c.decoder_layers : 1;
  const std::size_t table = c.full_pos_table ? c.grid_h * c.grid_w * d : (c.grid_h + c.grid_w) * (d / 2);
  std::size_t n = 0;
  n += c.backbone_layers * (ch * ch + ch);
  n += ch * d + d;  // input projection
  n += d;           // verb token
  n += tables * table;
  n += c.encoder_layers * encoder + c.decoder_layers * decoder;
  n += 2 * ln;  // verb and decoder output norms
  n += c.num_verbs * c.d_verb + c.num_roles * c.d_role;
  n += (d * h + h) + (h * c.num_verbs + c.num_verbs);        // verb classifier
  n += (d * h + h) + (h * c.num_nouns + c.num_nouns);        // noun classifier
  n += (d * h + h) + (h + 1);                                // existence head
  n += (d * h + h) + (h * h + h) + (h * 4 + 4);              // box head
  return n;
}

inline FeatureGrid random_grid(std::size_t c, std::size_t h, std::size_t w, Rng& rng) {
  FeatureGrid g{c, h, w, std::vector<double>(c * h * w)};
  for (double& x : g.values) x = rng.uniform(-1.0, 1.0);
  return g;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("gsrtr_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace gsr::testing
