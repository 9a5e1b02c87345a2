// Copyright (c) 2026, The gsrtr Authors
// SPDX-License-Identifier: Apache-2.0
//
// Image retrieval by grounded situation similarity over top-5 prediction records.

#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "gsr/prediction.hpp"

namespace gsr {

inline constexpr std::size_t kRetrievalRanks = 5;

/// max over ranks i, j (1-based, first five entries) sharing a verb of
///   sum_k [noun match] (1 + IoU(box_ik, box_jk)) / (2 i j |R_v|)
/// with IoU 0 whenever either box is missing. Lies in [0, 1] and is symmetric.
double grsitsim(const PredictionRecord& a, const PredictionRecord& b);

struct RetrievalHit {
  std::string image_id;
  double score = 0.0;
  friend bool operator==(const RetrievalHit&, const RetrievalHit&) = default;
};

/// Records plus a verb -> record map; only records sharing a top-5 verb with
/// the probe can score above zero, so only those are scored.
class RetrievalIndex {
 public:
  RetrievalIndex() = default;
  explicit RetrievalIndex(std::vector<PredictionRecord> records);

  std::size_t size() const { return records_.size(); }
  const std::vector<PredictionRecord>& records() const { return records_; }

  /// Up to k hits with nonzero score, descending, ties by image_id.
  std::vector<RetrievalHit> query(const PredictionRecord& probe, std::size_t k) const;

 private:
  std::vector<PredictionRecord> records_;
  std::unordered_map<std::string, std::vector<std::size_t>> by_verb_;
};

/// Throws ValidationError on a duplicate image_id.
RetrievalIndex build_index(std::vector<PredictionRecord> records);

/// Scores every record; reference for the indexed query.
std::vector<RetrievalHit> exhaustive_query(const std::vector<PredictionRecord>& records,
                                           const PredictionRecord& probe, std::size_t k);

}  // namespace gsr
