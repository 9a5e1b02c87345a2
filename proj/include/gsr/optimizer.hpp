// Copyright (c) 2026, The gsrtr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "gsr/transformer.hpp"

namespace gsr {

struct AdamWOptions {
  double lr = 1e-4;
  double backbone_lr = 1e-5;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip = 0.1;  // global gradient norm; 0 disables clipping
};

struct OptimizerState {
  std::size_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

struct ClipResult {
  double norm = 0.0;   // before clipping
  double scale = 1.0;  // factor applied to every gradient
};

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
/// Parameters without a gradient count as zero.
ClipResult clip_gradients(std::vector<NamedTensor>& params, double max_norm);

double gradient_norm(const std::vector<NamedTensor>& params);

/// AdamW with decoupled weight decay and two learning-rate groups: parameters
/// whose name starts with "backbone." use `backbone_lr`.
class AdamW {
 public:
  AdamW(std::vector<NamedTensor> params, AdamWOptions options);

  /// One update from the current gradients. `lr_scale` multiplies both group
  /// learning rates (step decay).
  void step(double lr_scale = 1.0);
  void zero_grad();

  const AdamWOptions& options() const { return options_; }
  std::vector<NamedTensor>& params() { return params_; }
  const OptimizerState& state() const { return state_; }

  void save_state(const std::filesystem::path& path) const;
  void load_state(const std::filesystem::path& path);

 private:
  std::vector<NamedTensor> params_;
  std::vector<bool> backbone_;
  AdamWOptions options_;
  OptimizerState state_;
};

}  // namespace gsr
