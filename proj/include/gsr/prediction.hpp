// Copyright (c) 2026, The gsrtr Authors
// SPDX-License-Identifier: Apache-2.0
//
// Gated, named predictions as exchanged between inference, evaluation and
// retrieval (predictions.jsonl).

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gsr/ontology.hpp"

namespace gsr {

struct RolePrediction {
  std::string role;
  std::string noun;
  std::optional<BoxXYXY> box;  // absolute pixels; nullopt when existence < 0.5
  friend bool operator==(const RolePrediction&, const RolePrediction&) = default;
};

/// Grounded nouns decoded under one conditioning verb, in frame order.
struct VerbPrediction {
  std::string verb;
  std::vector<RolePrediction> roles;
  friend bool operator==(const VerbPrediction&, const VerbPrediction&) = default;
};

/// Top-k verbs (rank order) each with its grounded nouns; optionally the
/// prediction conditioned on the ground-truth verb for the ground-truth
/// evaluation setting.
struct PredictionRecord {
  std::string image_id;
  std::vector<VerbPrediction> entries;
  std::optional<VerbPrediction> ground_truth;
  friend bool operator==(const PredictionRecord&, const PredictionRecord&) = default;
};

/// Entries must name distinct verbs of the space, each with exactly its frame's
/// roles in frame order and known nouns.
void validate_record(const PredictionRecord& record, const FrameSpace& space, const std::string& where = "record");

std::string record_to_json(const PredictionRecord& record);
std::string records_to_jsonl(const std::vector<PredictionRecord>& records);
std::vector<PredictionRecord> parse_predictions(const std::string& jsonl_text, const FrameSpace& space,
                                                const std::string& where = "predictions");
std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path, const FrameSpace& space);
void save_predictions(const std::vector<PredictionRecord>& records, const std::filesystem::path& path);

}  // namespace gsr
