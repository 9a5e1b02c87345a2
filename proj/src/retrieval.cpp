// Copyright (c) 2026, The gsrtr Authors
// SPDX-License-Identifier: Apache-2.0

#include "gsr/retrieval.hpp"

#include <algorithm>
#include <unordered_set>

#include "gsr/boxes.hpp"
#include "gsr/errors.hpp"

namespace gsr {

namespace {

double pair_term(const VerbPrediction& a, const VerbPrediction& b, std::size_t i, std::size_t j) {
  if (a.roles.size() != b.roles.size()) {
    throw ValidationError("grsitsim: verb '" + a.verb + "' has different frames in the two records");
  }
  double s = 0.0;
  for (std::size_t k = 0; k < a.roles.size(); ++k) {
    if (a.roles[k].noun != b.roles[k].noun) continue;
    const double overlap = a.roles[k].box && b.roles[k].box ? iou(*a.roles[k].box, *b.roles[k].box) : 0.0;
    s += 1.0 + overlap;
  }
  return s / (2.0 * static_cast<double>(i * j) * static_cast<double>(a.roles.size()));
}

void rank_hits(std::vector<RetrievalHit>& hits, std::size_t k) {
  std::sort(hits.begin(), hits.end(), [](const RetrievalHit& x, const RetrievalHit& y) {
    return x.score > y.score || (x.score == y.score && x.image_id < y.image_id);
  });
  if (hits.size() > k) hits.resize(k);
}

}  // namespace

double grsitsim(const PredictionRecord& a, const PredictionRecord& b) {
  double best = 0.0;
  const std::size_t na = std::min(kRetrievalRanks, a.entries.size());
  const std::size_t nb = std::min(kRetrievalRanks, b.entries.size());
  for (std::size_t i = 0; i < na; ++i) {
    for (std::size_t j = 0; j < nb; ++j) {
      if (a.entries[i].verb != b.entries[j].verb) continue;
      best = std::max(best, pair_term(a.entries[i], b.entries[j], i + 1, j + 1));
    }
  }
  return best;
}

RetrievalIndex::RetrievalIndex(std::vector<PredictionRecord> records) : records_(std::move(records)) {
  std::unordered_set<std::string> ids;
  for (std::size_t r = 0; r < records_.size(); ++r) {
    if (!ids.insert(records_[r].image_id).second) {
      throw ValidationError("retrieval index: duplicate image_id " + records_[r].image_id);
    }
    const auto& entries = records_[r].entries;
    for (std::size_t i = 0; i < std::min(kRetrievalRanks, entries.size()); ++i) by_verb_[entries[i].verb].push_back(r);
  }
}

std::vector<RetrievalHit> RetrievalIndex::query(const PredictionRecord& probe, std::size_t k) const {
  if (k == 0) throw ValidationError("query: k must be at least 1");
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < std::min(kRetrievalRanks, probe.entries.size()); ++i) {
    const auto it = by_verb_.find(probe.entries[i].verb);
    if (it != by_verb_.end()) candidates.insert(candidates.end(), it->second.begin(), it->second.end());
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());
  std::vector<RetrievalHit> hits;
  for (std::size_t r : candidates) {
    const double s = grsitsim(probe, records_[r]);
    if (s > 0.0) hits.push_back({records_[r].image_id, s});
  }
  rank_hits(hits, k);
  return hits;
}

RetrievalIndex build_index(std::vector<PredictionRecord> records) { return RetrievalIndex(std::move(records)); }

std::vector<RetrievalHit> exhaustive_query(const std::vector<PredictionRecord>& records,
                                           const PredictionRecord& probe, std::size_t k) {
  if (k == 0) throw ValidationError("query: k must be at least 1");
  std::vector<RetrievalHit> hits;
  for (const auto& r : records) {
    const double s = grsitsim(probe, r);
    if (s > 0.0) hits.push_back({r.image_id, s});
  }
  rank_hits(hits, k);
  return hits;
}

}  // namespace gsr
