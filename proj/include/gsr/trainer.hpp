// Copyright (c) 2026, The gsrtr Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gsr/losses.hpp"
#include "gsr/model.hpp"
#include "gsr/optimizer.hpp"

namespace gsr {

struct TrainOptions {
  std::size_t epochs = 1;
  std::size_t max_steps = 0;  // 0: no step limit; with epochs == 0, run until max_steps
  std::size_t batch_size = 16;
  std::uint64_t seed = 0;     // shuffling and dropout
  AdamWOptions optimizer;
  double lr_decay = 1.0;            // multiplier applied every lr_decay_epochs
  std::size_t lr_decay_epochs = 0;  // 0: constant learning rate
  std::filesystem::path log_path;        // JSON lines, one per step; empty to skip
  std::filesystem::path checkpoint_dir;  // empty to skip checkpoints
  std::size_t checkpoint_every = 1;      // epochs
  bool keep_all_checkpoints = false;     // otherwise each new checkpoint replaces the previous
};

struct StepRecord {
  std::size_t step = 0;  // 1-based
  std::size_t epoch = 0;  // 0-based
  double verb = 0.0, noun = 0.0, exist = 0.0, l1 = 0.0, giou = 0.0, total = 0.0;
  double grad_norm = 0.0;  // before clipping
  double lr = 0.0;
  std::string to_json() const;
};

struct EpochSummary {
  std::size_t epoch = 0;
  std::size_t steps = 0;
  double verb = 0.0, noun = 0.0, exist = 0.0, l1 = 0.0, giou = 0.0, total = 0.0;  // means over steps
  std::string to_json() const;
};

struct TrainResult {
  std::vector<StepRecord> steps;
  std::vector<EpochSummary> epochs;
};

/// Mini-batch AdamW training with the gold verb conditioning the decoder.
/// `grids[i]` holds the features of `annotations[i]`. Deterministic in the
/// model's initial parameters and `options.seed`.
TrainResult train(Model& model, std::span<const SituationAnnotation> annotations, std::span<const FeatureGrid> grids,
                  const FrameSpace& space, const TrainOptions& options,
                  const std::function<void(const StepRecord&)>& on_step = {});

}  // namespace gsr
