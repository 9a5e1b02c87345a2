// Copyright (c) 2026, The gsrtr Authors
// SPDX-License-Identifier: Apache-2.0

#include "gsr/evaluator.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "gsr/boxes.hpp"
#include "gsr/errors.hpp"

namespace gsr {

using json = nlohmann::ordered_json;

bool noun_correct(const std::string& pred, const std::vector<std::string>& annotations) {
  return std::find(annotations.begin(), annotations.end(), pred) != annotations.end();
}

bool box_correct(const std::optional<BoxXYXY>& pred, const std::optional<BoxXYXY>& gt) {
  if (pred.has_value() != gt.has_value()) return false;
  if (!pred) return true;
  return iou(*pred, *gt) >= kBoxIouThreshold;
}

namespace {

constexpr std::size_t kTopK = 5;

// Sums for one setting over a group of images.
struct Tally {
  double verb = 0.0, value = 0.0, value_all = 0.0, grounded_value = 0.0, grounded_value_all = 0.0;

  void add(bool verb_ok, const VerbPrediction* entry, const SituationAnnotation& a) {
    if (!verb_ok || entry == nullptr) return;
    verb += 1.0;
    std::size_t nouns = 0, grounded = 0;
    for (std::size_t k = 0; k < a.roles.size(); ++k) {
      const bool n = noun_correct(entry->roles[k].noun, a.roles[k].nouns);
      nouns += n;
      grounded += n && box_correct(entry->roles[k].box, a.roles[k].box);
    }
    const double r = static_cast<double>(a.roles.size());
    value += static_cast<double>(nouns) / r;
    grounded_value += static_cast<double>(grounded) / r;
    value_all += nouns == a.roles.size() ? 1.0 : 0.0;
    grounded_value_all += grounded == a.roles.size() ? 1.0 : 0.0;
  }

  SettingMetrics mean(double n, bool with_verb) const {
    SettingMetrics m;
    if (with_verb) m.verb = 100.0 * verb / n;
    m.value = 100.0 * value / n;
    m.value_all = 100.0 * value_all / n;
    m.grounded_value = 100.0 * grounded_value / n;
    m.grounded_value_all = 100.0 * grounded_value_all / n;
    return m;
  }
};

void check_frame(const VerbPrediction& entry, const SituationAnnotation& a) {
  if (entry.roles.size() != a.roles.size()) {
    throw ValidationError(a.image_id + ": prediction for verb '" + a.verb + "' has " + std::to_string(entry.roles.size()) +
                          " roles, annotation has " + std::to_string(a.roles.size()));
  }
  for (std::size_t k = 0; k < a.roles.size(); ++k) {
    if (entry.roles[k].role != a.roles[k].role) {
      throw ValidationError(a.image_id + ": predicted role '" + entry.roles[k].role + "' does not match annotated role '" +
                            a.roles[k].role + "'");
    }
  }
}

void average_into(SettingMetrics& out, const SettingMetrics& in, double n) {
  if (in.verb) out.verb = out.verb.value_or(0.0) + *in.verb / n;
  out.value += in.value / n;
  out.value_all += in.value_all / n;
  out.grounded_value += in.grounded_value / n;
  out.grounded_value_all += in.grounded_value_all / n;
}

json setting_json(const SettingMetrics& m) {
  json j;
  if (m.verb) j["verb"] = *m.verb;
  j["value"] = m.value;
  j["value_all"] = m.value_all;
  j["grounded_value"] = m.grounded_value;
  j["grounded_value_all"] = m.grounded_value_all;
  return j;
}

}  // namespace

MetricsReport evaluate(const std::vector<SituationAnnotation>& annotations,
                       const std::vector<PredictionRecord>& records, const FrameSpace& space) {
  if (annotations.empty()) throw ValidationError("evaluate: empty dataset");
  std::unordered_map<std::string, const PredictionRecord*> by_id;
  for (const auto& r : records) {
    if (!by_id.emplace(r.image_id, &r).second) throw ValidationError("evaluate: duplicate prediction for " + r.image_id);
  }

  struct Group {
    std::size_t images = 0;
    Tally top1, top5, gt;
  };
  std::map<std::size_t, Group> groups;
  for (const auto& a : annotations) {
    const auto v = space.find_verb(a.verb);
    if (!v) throw ValidationError(a.image_id + ": verb '" + a.verb + "' not in space");
    const auto it = by_id.find(a.image_id);
    if (it == by_id.end()) throw ValidationError("evaluate: no prediction for image " + a.image_id);
    const PredictionRecord& rec = *it->second;
    if (!rec.ground_truth) throw ValidationError(a.image_id + ": prediction lacks the ground-truth-verb entry");
    if (rec.ground_truth->verb != a.verb) {
      throw ValidationError(a.image_id + ": ground-truth entry is conditioned on '" + rec.ground_truth->verb +
                            "', annotation verb is '" + a.verb + "'");
    }
    check_frame(*rec.ground_truth, a);

    const VerbPrediction* top1 = nullptr;
    const VerbPrediction* top5 = nullptr;
    for (std::size_t i = 0; i < std::min(kTopK, rec.entries.size()); ++i) {
      if (rec.entries[i].verb != a.verb) continue;
      check_frame(rec.entries[i], a);
      top5 = &rec.entries[i];
      if (i == 0) top1 = top5;
    }
    Group& g = groups[*v];
    ++g.images;
    g.top1.add(top1 != nullptr, top1, a);
    g.top5.add(top5 != nullptr, top5, a);
    g.gt.add(true, &*rec.ground_truth, a);
  }

  MetricsReport report;
  report.images = annotations.size();
  report.ground_truth.verb.reset();
  const double verbs = static_cast<double>(groups.size());
  for (const auto& [v, g] : groups) {
    const double n = static_cast<double>(g.images);
    VerbMetrics vm{space.verb_name(v), g.images, g.top1.mean(n, true), g.top5.mean(n, true), g.gt.mean(n, false)};
    average_into(report.top1, vm.top1, verbs);
    average_into(report.top5, vm.top5, verbs);
    average_into(report.ground_truth, vm.ground_truth, verbs);
    report.per_verb.push_back(std::move(vm));
  }
  return report;
}

std::string MetricsReport::to_json() const {
  json j;
  j["images"] = images;
  j["top1"] = setting_json(top1);
  j["top5"] = setting_json(top5);
  j["ground_truth"] = setting_json(ground_truth);
  json rows = json::array();
  for (const auto& v : per_verb) {
    rows.push_back(json{{"verb", v.verb},
                        {"images", v.images},
                        {"top1", setting_json(v.top1)},
                        {"top5", setting_json(v.top5)},
                        {"ground_truth", setting_json(v.ground_truth)}});
  }
  j["per_verb"] = rows;
  return j.dump(2);
}

std::string MetricsReport::to_table() const {
  std::ostringstream os;
  char line[160];
  std::snprintf(line, sizeof line, "%-13s %8s %8s %10s %10s %14s\n", "setting", "verb", "value", "value-all",
                "grnd-value", "grnd-value-all");
  os << line;
  auto row = [&](const char* name, const SettingMetrics& m) {
    char verb[16] = "-";
    if (m.verb) std::snprintf(verb, sizeof verb, "%.2f", *m.verb);
    std::snprintf(line, sizeof line, "%-13s %8s %8.2f %10.2f %10.2f %14.2f\n", name, verb, m.value, m.value_all,
                  m.grounded_value, m.grounded_value_all);
    os << line;
  };
  row("top-1", top1);
  row("top-5", top5);
  row("ground-truth", ground_truth);
  return os.str();
}

}  // namespace gsr
