// Copyright (c) 2026, The gsrtr Authors
// SPDX-License-Identifier: Apache-2.0
//
// SWiG-style scoring: verb accuracy, value, value-all and their grounded
// variants in the top-1, top-5 and ground-truth-verb settings, averaged per
// verb and then across verbs.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "gsr/ontology.hpp"
#include "gsr/prediction.hpp"

namespace gsr {

inline constexpr double kBoxIouThreshold = 0.5;

/// True iff `pred` equals any annotator's label.
bool noun_correct(const std::string& pred, const std::vector<std::string>& annotations);

/// Existence must agree; when both boxes exist the IoU must be at least 0.5.
bool box_correct(const std::optional<BoxXYXY>& pred, const std::optional<BoxXYXY>& gt);

/// All values in percent. `verb` is absent in the ground-truth setting.
struct SettingMetrics {
  std::optional<double> verb;
  double value = 0.0;
  double value_all = 0.0;
  double grounded_value = 0.0;
  double grounded_value_all = 0.0;
};

struct VerbMetrics {
  std::string verb;
  std::size_t images = 0;
  SettingMetrics top1;
  SettingMetrics top5;
  SettingMetrics ground_truth;
};

struct MetricsReport {
  std::size_t images = 0;
  SettingMetrics top1;
  SettingMetrics top5;
  SettingMetrics ground_truth;
  std::vector<VerbMetrics> per_verb;  // verbs present in the dataset, space order

  std::string to_json() const;
  /// Aligned plain-text table, one row per setting.
  std::string to_table() const;
};

/// Every annotation needs a record with the same image_id; records carry the
/// top-k verbs (rank order) and the prediction conditioned on the gold verb.
/// Records for images outside the dataset are ignored.
MetricsReport evaluate(const std::vector<SituationAnnotation>& annotations,
                       const std::vector<PredictionRecord>& records, const FrameSpace& space);

}  // namespace gsr
