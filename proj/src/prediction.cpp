// Copyright (c) 2026, The gsrtr Authors
// SPDX-License-Identifier: Apache-2.0

#include "gsr/prediction.hpp"

#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "gsr/errors.hpp"

namespace gsr {

using json = nlohmann::ordered_json;

namespace {

json entry_to_json(const VerbPrediction& e) {
  json roles = json::array();
  for (const auto& r : e.roles) {
    json box = nullptr;
    if (r.box) box = json::array({r.box->x1, r.box->y1, r.box->x2, r.box->y2});
    roles.push_back(json{{"role", r.role}, {"noun", r.noun}, {"bbox", box}});
  }
  return json{{"verb", e.verb}, {"roles", roles}};
}

VerbPrediction entry_from_json(const json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("verb") || !j.contains("roles") || !j["roles"].is_array()) {
    throw ValidationError(where + ": expected {\"verb\", \"roles\": [...]}");
  }
  VerbPrediction e;
  e.verb = j["verb"].get<std::string>();
  for (const auto& r : j["roles"]) {
    if (!r.contains("role") || !r.contains("noun") || !r.contains("bbox")) {
      throw ValidationError(where + ": role entry needs role, noun and bbox");
    }
    RolePrediction rp;
    rp.role = r["role"].get<std::string>();
    rp.noun = r["noun"].get<std::string>();
    const json& b = r["bbox"];
    if (!b.is_null()) {
      if (!b.is_array() || b.size() != 4) throw ValidationError(where + ": malformed bbox for role '" + rp.role + "'");
      rp.box = BoxXYXY{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
    }
    e.roles.push_back(std::move(rp));
  }
  return e;
}

void validate_entry(const VerbPrediction& e, const FrameSpace& space, const std::string& where) {
  const auto v = space.find_verb(e.verb);
  if (!v) throw ValidationError(where + ": verb '" + e.verb + "' not in space");
  const auto& frame = space.frame(*v);
  if (e.roles.size() != frame.size()) {
    throw ValidationError(where + ": verb '" + e.verb + "' expects " + std::to_string(frame.size()) + " roles, got " +
                          std::to_string(e.roles.size()));
  }
  for (std::size_t k = 0; k < frame.size(); ++k) {
    if (e.roles[k].role != space.role_name(frame[k])) {
      throw ValidationError(where + ": verb '" + e.verb + "' role " + std::to_string(k) + " is '" + e.roles[k].role +
                            "', frame expects '" + space.role_name(frame[k]) + "'");
    }
    if (!space.find_noun(e.roles[k].noun)) {
      throw ValidationError(where + ": noun '" + e.roles[k].noun + "' not in space");
    }
    if (const auto& b = e.roles[k].box; b && (b->x2 < b->x1 || b->y2 < b->y1)) {
      throw ValidationError(where + ": inverted box for role '" + e.roles[k].role + "'");
    }
  }
}

}  // namespace

void validate_record(const PredictionRecord& record, const FrameSpace& space, const std::string& where) {
  if (record.image_id.empty()) throw ValidationError(where + ": empty image_id");
  std::unordered_set<std::string> verbs;
  for (std::size_t i = 0; i < record.entries.size(); ++i) {
    validate_entry(record.entries[i], space, where + ": verbs[" + std::to_string(i) + "]");
    if (!verbs.insert(record.entries[i].verb).second) {
      throw ValidationError(where + ": verb '" + record.entries[i].verb + "' appears at two ranks");
    }
  }
  if (record.ground_truth) validate_entry(*record.ground_truth, space, where + ": ground_truth");
}

std::string record_to_json(const PredictionRecord& record) {
  json j;
  j["image_id"] = record.image_id;
  j["verbs"] = json::array();
  for (const auto& e : record.entries) j["verbs"].push_back(entry_to_json(e));
  if (record.ground_truth) j["ground_truth"] = entry_to_json(*record.ground_truth);
  return j.dump();
}

std::string records_to_jsonl(const std::vector<PredictionRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += record_to_json(r);
    out += '\n';
  }
  return out;
}

std::vector<PredictionRecord> parse_predictions(const std::string& jsonl_text, const FrameSpace& space,
                                                const std::string& where) {
  std::vector<PredictionRecord> out;
  std::istringstream lines(jsonl_text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string here = where + ":" + std::to_string(line_no);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ValidationError(here + ": parse error: " + e.what());
    }
    if (!j.is_object() || !j.contains("image_id") || !j.contains("verbs") || !j["verbs"].is_array()) {
      throw ValidationError(here + ": expected {\"image_id\", \"verbs\": [...]}");
    }
    PredictionRecord r;
    r.image_id = j["image_id"].get<std::string>();
    for (const auto& e : j["verbs"]) r.entries.push_back(entry_from_json(e, here));
    if (j.contains("ground_truth") && !j["ground_truth"].is_null()) {
      r.ground_truth = entry_from_json(j["ground_truth"], here);
    }
    validate_record(r, space, here);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path, const FrameSpace& space) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_predictions(ss.str(), space, path.string());
}

void save_predictions(const std::vector<PredictionRecord>& records, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << records_to_jsonl(records);
}

}  // namespace gsr
