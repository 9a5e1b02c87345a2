// Copyright (c) 2026, The gsrtr Authors
// SPDX-License-Identifier: Apache-2.0
//
// Training objective: verb and noun classification with label smoothing, box
// existence, and L1 + GIoU box regression over grounded roles.

#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

#include "gsr/model.hpp"
#include "gsr/ontology.hpp"
#include "gsr/tensor.hpp"

namespace gsr {

/// Annotation resolved to indices, with boxes normalized by the image size.
struct SampleTargets {
  std::size_t verb = 0;
  std::vector<std::array<std::size_t, 3>> nouns;  // per role, per annotator
  std::vector<std::optional<BoxXYXY>> boxes;      // normalized xyxy
  std::size_t grounded() const;
};

SampleTargets make_targets(const SituationAnnotation& annotation, const FrameSpace& space);

/// (1 - eps) on the gold class plus eps / classes everywhere.
std::vector<double> smoothed_target(std::size_t classes, std::size_t gold, double eps);

Tensor verb_loss(const Tensor& verb_logits, std::size_t gold, double smoothing);

/// Role-mean cross entropy per annotator, summed over the three annotators.
Tensor noun_loss(const Tensor& noun_logits, const SampleTargets& targets, double smoothing);

/// Mean over roles of the binary cross entropy of the existence probability.
Tensor existence_loss(const Tensor& existence, const SampleTargets& targets);

struct BoxLosses {
  Tensor l1;
  Tensor giou;
};

/// Averages over grounded roles only; both terms are a constant 0 when no role
/// carries a box.
BoxLosses box_regression_losses(const Tensor& boxes_cxcywh, const SampleTargets& targets);

/// Row-wise helpers on [m x 4] tensors -> [m].
Tensor l1_rows(const Tensor& pred_cxcywh, const Tensor& gt_cxcywh);
Tensor giou_rows(const Tensor& pred_cxcywh, const Tensor& gt_xyxy);

struct LossBreakdown {
  Tensor objective;  // differentiable weighted sum
  double verb = 0.0;
  double noun = 0.0;
  double exist = 0.0;
  double l1 = 0.0;
  double giou = 0.0;
  double total = 0.0;
  std::size_t roles = 0;
  std::size_t grounded_roles = 0;
};

LossBreakdown total_loss(const Tensor& verb, const Tensor& noun, const Tensor& exist, const Tensor& l1,
                         const Tensor& giou, const LossWeights& weights);

/// Loss of a single forward pass conditioned on the gold verb.
LossBreakdown sample_loss(const ForwardOutput& output, const SampleTargets& targets, const ModelConfig& config);

/// Batch objective over samples of mixed frame sizes. Head outputs are
/// zero-padded to the largest frame; padded rows are masked out of every term
/// and every denominator, so the result is the mean of per-sample losses.
LossBreakdown padded_batch_loss(const std::vector<ForwardOutput>& outputs, const std::vector<SampleTargets>& targets,
                                const ModelConfig& config);

}  // namespace gsr
