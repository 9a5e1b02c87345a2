// Copyright (c) 2026, The gsrtr Authors
// SPDX-License-Identifier: Apache-2.0
//
// Random annotations and prediction records, plus brute-force reference
// scorers for the evaluator and retrieval.
#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gsr/evaluator.hpp"
#include "gsr/ontology.hpp"
#include "gsr/prediction.hpp"
#include "gsr/retrieval.hpp"
#include "gsr/rng.hpp"

namespace gsr::testing {

inline double reference_iou(const BoxXYXY& a, const BoxXYXY& b) {
  const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = iw * ih;
  const double uni = (a.x2 - a.x1) * (a.y2 - a.y1) + (b.x2 - b.x1) * (b.y2 - b.y1) - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

// A few boxes on a 10x10 canvas; pairs among them have IoU both above and below 0.5.
inline std::optional<BoxXYXY> random_box(Rng& rng, double absent = 0.3) {
  static const std::vector<BoxXYXY> pool{{0, 0, 4, 4}, {0, 0, 4, 3}, {1, 1, 5, 5}, {5, 5, 9, 9},
                                         {0, 0, 10, 10}, {2, 0, 6, 4}, {6, 2, 10, 4}};
  if (rng.uniform() < absent) return std::nullopt;
  return pool[rng.below(pool.size())];
}

inline std::string random_noun(const FrameSpace& s, Rng& rng) {
  return s.noun_name(rng.below(s.num_nouns()));
}

inline VerbPrediction random_entry(std::size_t verb, const FrameSpace& s, Rng& rng) {
  VerbPrediction e;
  e.verb = s.verb_name(verb);
  for (std::size_t r : s.frame(verb)) e.roles.push_back({s.role_name(r), random_noun(s, rng), random_box(rng)});
  return e;
}

inline SituationAnnotation random_annotation(const std::string& id, const FrameSpace& s, Rng& rng) {
  SituationAnnotation a;
  a.image_id = id;
  a.width = 10;
  a.height = 10;
  const std::size_t v = rng.below(s.num_verbs());
  a.verb = s.verb_name(v);
  for (std::size_t r : s.frame(v)) {
    a.roles.push_back({s.role_name(r), {random_noun(s, rng), random_noun(s, rng), random_noun(s, rng)}, random_box(rng)});
  }
  return a;
}

/// Up to `k` distinct verbs in random order. The ground-truth entry repeats the
/// entry for the gold verb when it was ranked, as a model would produce.
inline PredictionRecord random_record(const std::string& id, const std::optional<std::string>& gold_verb,
                                      const FrameSpace& s, Rng& rng, std::size_t k = 5) {
  std::vector<std::size_t> verbs(s.num_verbs());
  for (std::size_t i = 0; i < verbs.size(); ++i) verbs[i] = i;
  for (std::size_t i = verbs.size(); i > 1; --i) std::swap(verbs[i - 1], verbs[rng.below(i)]);
  verbs.resize(std::min(verbs.size(), 1 + rng.below(k)));
  PredictionRecord r;
  r.image_id = id;
  for (std::size_t v : verbs) r.entries.push_back(random_entry(v, s, rng));
  if (gold_verb) {
    for (const auto& e : r.entries) {
      if (e.verb == *gold_verb) r.ground_truth = e;
    }
    if (!r.ground_truth) r.ground_truth = random_entry(s.verb_index(*gold_verb), s, rng);
  }
  return r;
}

/// Straight transcription of the metric definitions, one setting at a time.
struct BruteForceScores {
  std::map<std::string, double> values;  // "<setting>.<metric>"
};

inline BruteForceScores brute_force_scores(const std::vector<SituationAnnotation>& annotations,
                                           const std::vector<PredictionRecord>& records, const FrameSpace& s) {
  auto record_of = [&](const std::string& id) -> const PredictionRecord& {
    for (const auto& r : records) {
      if (r.image_id == id) return r;
    }
    throw std::runtime_error("missing record " + id);
  };
  // Entry judged in a setting, or null when the verb is wrong.
  auto judged = [&](const std::string& setting, const SituationAnnotation& a) -> const VerbPrediction* {
    const PredictionRecord& r = record_of(a.image_id);
    if (setting == "ground_truth") return &*r.ground_truth;
    const std::size_t depth = setting == "top1" ? 1 : 5;
    for (std::size_t i = 0; i < r.entries.size() && i < depth; ++i) {
      if (r.entries[i].verb == a.verb) return &r.entries[i];
    }
    return nullptr;
  };
  BruteForceScores out;
  for (const std::string setting : {"top1", "top5", "ground_truth"}) {
    std::map<std::string, double> macro;
    std::size_t verbs_present = 0;
    for (const auto& verb : s.verbs()) {
      std::vector<const SituationAnnotation*> images;
      for (const auto& a : annotations) {
        if (a.verb == verb) images.push_back(&a);
      }
      if (images.empty()) continue;
      ++verbs_present;
      std::map<std::string, double> sums;
      for (const SituationAnnotation* a : images) {
        const VerbPrediction* e = judged(setting, *a);
        double value = 0, grounded = 0;
        if (e != nullptr) {
          sums["verb"] += 1;
          for (std::size_t k = 0; k < a->roles.size(); ++k) {
            const auto& gt = a->roles[k];
            const auto& p = e->roles[k];
            const bool noun = std::count(gt.nouns.begin(), gt.nouns.end(), p.noun) > 0;
            bool box = false;
            if (!p.box && !gt.box) box = true;
            if (p.box && gt.box) box = reference_iou(*p.box, *gt.box) >= 0.5;
            value += noun;
            grounded += noun && box;
          }
        }
        const double r = static_cast<double>(a->roles.size());
        sums["value"] += value / r;
        sums["grounded_value"] += grounded / r;
        sums["value_all"] += value == r;
        sums["grounded_value_all"] += grounded == r;
      }
      for (const auto& [metric, total] : sums) macro[metric] += 100.0 * total / static_cast<double>(images.size());
      for (const char* metric : {"verb", "value", "grounded_value", "value_all", "grounded_value_all"}) macro[metric];
    }
    for (auto& [metric, total] : macro) {
      if (setting == "ground_truth" && metric == "verb") continue;
      out.values[setting + "." + metric] = total / static_cast<double>(verbs_present);
    }
  }
  return out;
}

inline std::map<std::string, double> flatten(const MetricsReport& r) {
  std::map<std::string, double> out;
  auto add = [&](const std::string& name, const SettingMetrics& m) {
    if (m.verb) out[name + ".verb"] = *m.verb;
    out[name + ".value"] = m.value;
    out[name + ".value_all"] = m.value_all;
    out[name + ".grounded_value"] = m.grounded_value;
    out[name + ".grounded_value_all"] = m.grounded_value_all;
  };
  add("top1", r.top1);
  add("top5", r.top5);
  add("ground_truth", r.ground_truth);
  return out;
}

/// The ordering every report must satisfy: settings with more verb information
/// score at least as high, grounding never adds, and "all roles" never exceeds the mean.
inline std::vector<std::string> dominance_violations(const MetricsReport& r, double slack = 1e-9) {
  std::vector<std::string> bad;
  auto le = [&](double a, double b, const std::string& what) {
    if (a > b + slack) bad.push_back(what);
  };
  le(*r.top1.verb, *r.top5.verb, "top1.verb <= top5.verb");
  for (const auto* m : {&r.top1, &r.top5, &r.ground_truth}) {
    le(m->grounded_value, m->value, "grounded_value <= value");
    le(m->value_all, m->value, "value_all <= value");
    le(m->grounded_value_all, m->grounded_value, "grounded_value_all <= grounded_value");
    le(m->grounded_value_all, m->value_all, "grounded_value_all <= value_all");
  }
  for (auto get : {+[](const SettingMetrics& m) { return m.value; }, +[](const SettingMetrics& m) { return m.value_all; },
                   +[](const SettingMetrics& m) { return m.grounded_value; },
                   +[](const SettingMetrics& m) { return m.grounded_value_all; }}) {
    le(get(r.top1), get(r.top5), "top1 <= top5");
    le(get(r.top5), get(r.ground_truth), "top5 <= ground_truth");
  }
  return bad;
}

/// Reference similarity: every rank pair, every role, no pruning.
inline double reference_grsitsim(const PredictionRecord& a, const PredictionRecord& b) {
  double best = 0.0;
  for (std::size_t i = 1; i <= a.entries.size() && i <= 5; ++i) {
    for (std::size_t j = 1; j <= b.entries.size() && j <= 5; ++j) {
      const VerbPrediction& x = a.entries[i - 1];
      const VerbPrediction& y = b.entries[j - 1];
      if (x.verb != y.verb) continue;
      double term = 0.0;
      for (std::size_t k = 0; k < x.roles.size(); ++k) {
        if (x.roles[k].noun != y.roles[k].noun) continue;
        term += 1.0 + (x.roles[k].box && y.roles[k].box ? reference_iou(*x.roles[k].box, *y.roles[k].box) : 0.0);
      }
      best = std::max(best, term / (2.0 * static_cast<double>(i * j * x.roles.size())));
    }
  }
  return best;
}

}  // namespace gsr::testing
