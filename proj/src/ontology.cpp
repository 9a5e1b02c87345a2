// Copyright (c) 2026, The gsrtr Authors
// SPDX-License-Identifier: Apache-2.0

#include "gsr/ontology.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "gsr/errors.hpp"
#include "gsr/named_array.hpp"
#include "gsr/rng.hpp"

namespace gsr {

using json = nlohmann::ordered_json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) { throw ValidationError(where + ": " + what); }

std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw IoError("write failed for " + path.string());
}

json parse_json(const std::string& text, const std::string& where) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail(where, std::string("parse error: ") + e.what());
  }
}

std::vector<std::string> string_list(const json& j, const std::string& where) {
  if (!j.is_array()) fail(where, "expected an array of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_string()) fail(where + "[" + std::to_string(i) + "]", "expected a string");
    out.push_back(j[i].get<std::string>());
  }
  return out;
}

std::unordered_map<std::string, std::size_t> index_unique(const std::vector<std::string>& names, const char* kind) {
  std::unordered_map<std::string, std::size_t> lookup;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i].empty()) throw ValidationError(std::string(kind) + " " + std::to_string(i) + ": empty name");
    if (!lookup.emplace(names[i], i).second) {
      throw ValidationError(std::string("duplicate ") + kind + " name '" + names[i] + "'");
    }
  }
  return lookup;
}

json box_to_json(const std::optional<BoxXYXY>& box) {
  if (!box) return nullptr;
  return json::array({box->x1, box->y1, box->x2, box->y2});
}

double number(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j[key].is_number()) fail(where, std::string("missing numeric field '") + key + "'");
  return j[key].get<double>();
}

std::string text(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j[key].is_string()) fail(where, std::string("missing string field '") + key + "'");
  return j[key].get<std::string>();
}

}  // namespace

FrameSpace::FrameSpace(std::vector<std::string> verbs, std::vector<std::vector<std::string>> frames,
                       std::vector<std::string> roles, std::vector<std::string> nouns, std::size_t max_roles)
    : verbs_(std::move(verbs)), roles_(std::move(roles)), max_roles_(max_roles) {
  if (verbs_.size() != frames.size()) throw ValidationError("one frame per verb required");
  if (verbs_.empty()) throw ValidationError("verb vocabulary is empty");
  if (roles_.empty()) throw ValidationError("role vocabulary is empty");
  nouns_.reserve(nouns.size() + 1);
  if (nouns.empty() || nouns.front() != kUnknownNoun) nouns_.push_back(kUnknownNoun);
  for (auto& n : nouns) nouns_.push_back(std::move(n));
  verb_lookup_ = index_unique(verbs_, "verb");
  role_lookup_ = index_unique(roles_, "role");
  noun_lookup_ = index_unique(nouns_, "noun");

  frames_.reserve(frames.size());
  for (std::size_t v = 0; v < frames.size(); ++v) {
    const std::string where = "verbs." + verbs_[v] + ".roles";
    const auto& frame = frames[v];
    if (frame.empty() || frame.size() > max_roles_) {
      fail(where, "frame size " + std::to_string(frame.size()) + " outside [1, " + std::to_string(max_roles_) + "]");
    }
    std::vector<std::size_t> indices;
    std::unordered_set<std::size_t> seen;
    for (std::size_t k = 0; k < frame.size(); ++k) {
      auto it = role_lookup_.find(frame[k]);
      if (it == role_lookup_.end()) fail(where + "[" + std::to_string(k) + "]", "unknown role '" + frame[k] + "'");
      if (!seen.insert(it->second).second) fail(where, "role '" + frame[k] + "' repeated");
      indices.push_back(it->second);
    }
    frames_.push_back(std::move(indices));
  }
}

std::size_t FrameSpace::max_frame_size() const {
  std::size_t m = 0;
  for (const auto& f : frames_) m = std::max(m, f.size());
  return m;
}

std::optional<std::size_t> FrameSpace::find_verb(const std::string& name) const {
  auto it = verb_lookup_.find(name);
  return it == verb_lookup_.end() ? std::nullopt : std::optional(it->second);
}
std::optional<std::size_t> FrameSpace::find_role(const std::string& name) const {
  auto it = role_lookup_.find(name);
  return it == role_lookup_.end() ? std::nullopt : std::optional(it->second);
}
std::optional<std::size_t> FrameSpace::find_noun(const std::string& name) const {
  auto it = noun_lookup_.find(name);
  return it == noun_lookup_.end() ? std::nullopt : std::optional(it->second);
}

std::size_t FrameSpace::verb_index(const std::string& name) const {
  if (auto v = find_verb(name)) return *v;
  throw ValidationError("unknown verb '" + name + "'");
}
std::size_t FrameSpace::role_index(const std::string& name) const {
  if (auto r = find_role(name)) return *r;
  throw ValidationError("unknown role '" + name + "'");
}
std::size_t FrameSpace::noun_index(const std::string& name) const {
  if (auto n = find_noun(name)) return *n;
  throw ValidationError("unknown noun '" + name + "'");
}

void validate_feature_grid(const FeatureGrid& grid) {
  if (grid.height * grid.width == 0) throw ValidationError("feature grid has no cells");
  if (grid.channels == 0) throw ValidationError("feature grid has no channels");
  if (grid.values.size() != grid.channels * grid.height * grid.width) {
    throw ValidationError("feature grid payload does not match c x h x w");
  }
  for (double v : grid.values) {
    if (!std::isfinite(v)) throw ValidationError("feature grid contains a non-finite value");
  }
}

void validate_annotation(const SituationAnnotation& a, const FrameSpace& space, const std::string& where) {
  if (a.image_id.empty()) fail(where, "empty image_id");
  if (!(a.width > 0.0) || !(a.height > 0.0)) fail(where, "image size must be positive");
  const auto verb = space.find_verb(a.verb);
  if (!verb) fail(where, "verb '" + a.verb + "' not in space");
  const auto& frame = space.frame(*verb);
  if (a.roles.size() != frame.size()) {
    fail(where, "verb '" + a.verb + "' expects " + std::to_string(frame.size()) + " roles, got " +
                    std::to_string(a.roles.size()));
  }
  for (std::size_t k = 0; k < frame.size(); ++k) {
    const RoleEntry& entry = a.roles[k];
    const std::string here = where + ": frames[" + std::to_string(k) + "]";
    if (entry.role != space.role_name(frame[k])) {
      fail(here, "role '" + entry.role + "' does not match frame role '" + space.role_name(frame[k]) + "'");
    }
    if (entry.nouns.size() != 3) fail(here, "expected 3 noun labels, got " + std::to_string(entry.nouns.size()));
    for (const auto& n : entry.nouns) {
      if (!space.find_noun(n)) fail(here, "noun '" + n + "' not in space");
    }
    if (entry.box) {
      const BoxXYXY& b = *entry.box;
      if (!(b.x1 < b.x2) || !(b.y1 < b.y2)) fail(here, "malformed box: need x1 < x2 and y1 < y2");
      if (b.x1 < 0.0 || b.y1 < 0.0 || b.x2 > a.width || b.y2 > a.height) fail(here, "box outside the image");
    }
  }
}

FrameSpace parse_frame_space(const std::string& json_text, const std::string& where) {
  const json j = parse_json(json_text, where);
  if (!j.is_object()) fail(where, "expected a JSON object");
  for (const char* key : {"verbs", "roles", "nouns"}) {
    if (!j.contains(key)) fail(where, std::string("missing field '") + key + "'");
  }
  if (!j["verbs"].is_object()) fail(where + ": verbs", "expected an object of verb name -> {roles}");
  std::vector<std::string> verbs;
  std::vector<std::vector<std::string>> frames;
  for (const auto& [name, body] : j["verbs"].items()) {
    const std::string here = where + ": verbs." + name;
    if (!body.is_object() || !body.contains("roles")) fail(here, "expected {\"roles\": [...]}");
    verbs.push_back(name);
    frames.push_back(string_list(body["roles"], here + ".roles"));
  }
  auto roles = string_list(j["roles"], where + ": roles");
  auto nouns = string_list(j["nouns"], where + ": nouns");
  for (std::size_t i = 1; i < nouns.size(); ++i) {
    if (nouns[i] == kUnknownNoun) fail(where + ": nouns[" + std::to_string(i) + "]", "the unknown noun must be index 0");
  }
  std::size_t max_roles = kDefaultMaxRoles;
  if (j.contains("max_roles")) max_roles = j["max_roles"].get<std::size_t>();
  try {
    return FrameSpace(std::move(verbs), std::move(frames), std::move(roles), std::move(nouns), max_roles);
  } catch (const ValidationError& e) {
    fail(where, e.what());
  }
}

FrameSpace load_frame_space(const std::filesystem::path& path) {
  return parse_frame_space(read_file(path), path.string());
}

std::string frame_space_to_json(const FrameSpace& space) {
  json j;
  j["verbs"] = json::object();
  for (std::size_t v = 0; v < space.num_verbs(); ++v) {
    json roles = json::array();
    for (std::size_t r : space.frame(v)) roles.push_back(space.role_name(r));
    j["verbs"][space.verb_name(v)] = json{{"roles", roles}};
  }
  j["roles"] = space.roles();
  j["nouns"] = space.nouns();
  j["max_roles"] = space.max_roles();
  return j.dump(2) + "\n";
}

void save_frame_space(const FrameSpace& space, const std::filesystem::path& path) {
  write_file(path, frame_space_to_json(space));
}

std::vector<SituationAnnotation> parse_dataset(const std::string& jsonl_text, const FrameSpace& space,
                                               const std::string& where) {
  std::vector<SituationAnnotation> out;
  std::istringstream lines(jsonl_text);
  std::string line;
  std::size_t line_no = 0;
  std::unordered_set<std::string> ids;
  while (std::getline(lines, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string here = where + ":" + std::to_string(line_no);
    const json j = parse_json(line, here);
    if (!j.is_object()) fail(here, "expected a JSON object");
    SituationAnnotation a;
    a.image_id = text(j, "image_id", here);
    a.width = number(j, "width", here);
    a.height = number(j, "height", here);
    a.verb = text(j, "verb", here);
    if (!j.contains("frames") || !j["frames"].is_array()) fail(here, "missing array field 'frames'");
    for (std::size_t k = 0; k < j["frames"].size(); ++k) {
      const json& f = j["frames"][k];
      const std::string fk = here + ": frames[" + std::to_string(k) + "]";
      RoleEntry entry;
      entry.role = text(f, "role", fk);
      if (!f.contains("nouns")) fail(fk, "missing field 'nouns'");
      entry.nouns = string_list(f["nouns"], fk + ".nouns");
      if (!f.contains("bbox")) fail(fk, "missing field 'bbox'");
      const json& b = f["bbox"];
      if (!b.is_null()) {
        if (!b.is_array() || b.size() != 4) fail(fk, "malformed box: expected [x1, y1, x2, y2] or null");
        for (const auto& c : b) {
          if (!c.is_number()) fail(fk, "malformed box: non-numeric coordinate");
        }
        entry.box = BoxXYXY{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
      }
      a.roles.push_back(std::move(entry));
    }
    if (j.contains("features") && !j["features"].is_null()) a.features = text(j, "features", here);
    validate_annotation(a, space, here);
    if (!ids.insert(a.image_id).second) fail(here, "duplicate image_id '" + a.image_id + "'");
    out.push_back(std::move(a));
  }
  return out;
}

std::vector<SituationAnnotation> load_dataset(const std::filesystem::path& path, const FrameSpace& space) {
  return parse_dataset(read_file(path), space, path.string());
}

std::string dataset_to_jsonl(const std::vector<SituationAnnotation>& annotations) {
  std::string out;
  for (const auto& a : annotations) {
    json j;
    j["image_id"] = a.image_id;
    j["width"] = a.width;
    j["height"] = a.height;
    j["verb"] = a.verb;
    j["frames"] = json::array();
    for (const auto& entry : a.roles) {
      j["frames"].push_back(json{{"role", entry.role}, {"nouns", entry.nouns}, {"bbox", box_to_json(entry.box)}});
    }
    if (a.features) j["features"] = *a.features;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void save_dataset(const std::vector<SituationAnnotation>& annotations, const std::filesystem::path& path) {
  write_file(path, dataset_to_jsonl(annotations));
}

std::vector<SituationAnnotation> parse_swig(const std::string& json_text, const FrameSpace& space,
                                            const std::string& where) {
  const json j = parse_json(json_text, where);
  if (!j.is_object()) fail(where, "expected an object keyed by image name");
  std::vector<SituationAnnotation> out;
  for (const auto& [image, body] : j.items()) {
    const std::string here = where + ": " + image;
    SituationAnnotation a;
    a.image_id = image;
    a.verb = text(body, "verb", here);
    a.width = number(body, "width", here);
    a.height = number(body, "height", here);
    const auto verb = space.find_verb(a.verb);
    if (!verb) fail(here, "verb '" + a.verb + "' not in space");
    if (!body.contains("frames") || !body["frames"].is_array() || body["frames"].size() != 3) {
      fail(here, "expected 3 annotator frames");
    }
    for (std::size_t r : space.frame(*verb)) {
      const std::string& role = space.role_name(r);
      RoleEntry entry;
      entry.role = role;
      for (const auto& frame : body["frames"]) {
        if (!frame.contains(role)) fail(here, "annotator frame lacks role '" + role + "'");
        const std::string noun = frame[role].get<std::string>();
        entry.nouns.push_back(noun.empty() ? std::string(kUnknownNoun) : noun);
      }
      if (body.contains("bb") && body["bb"].contains(role)) {
        const json& b = body["bb"][role];
        if (!b.is_array() || b.size() != 4) fail(here, "malformed box for role '" + role + "'");
        const BoxXYXY box{b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
        // SWiG marks an ungrounded role with negative coordinates.
        if (box.x1 >= 0.0 && box.y1 >= 0.0 && box.x2 >= 0.0 && box.y2 >= 0.0) entry.box = box;
      }
      a.roles.push_back(std::move(entry));
    }
    validate_annotation(a, space, here);
    out.push_back(std::move(a));
  }
  return out;
}

std::vector<SituationAnnotation> import_swig(const std::filesystem::path& path, const FrameSpace& space) {
  return parse_swig(read_file(path), space, path.string());
}

void save_feature_grids(const std::filesystem::path& path,
                        const std::vector<std::pair<std::string, FeatureGrid>>& grids) {
  std::vector<NamedArray> arrays;
  arrays.reserve(grids.size());
  for (const auto& [id, grid] : grids) {
    arrays.push_back(NamedArray{id, DType::kFloat64, {grid.channels, grid.height, grid.width}, grid.values});
  }
  write_named_arrays(path, arrays);
}

std::map<std::string, FeatureGrid> load_feature_grids(const std::filesystem::path& path) {
  std::map<std::string, FeatureGrid> out;
  for (auto& a : read_named_arrays(path)) {
    if (a.shape.size() != 3) throw ValidationError(path.string() + ": array '" + a.name + "' is not c x h x w");
    FeatureGrid g{a.shape[0], a.shape[1], a.shape[2], std::move(a.values)};
    validate_feature_grid(g);
    out.emplace(a.name, std::move(g));
  }
  return out;
}

FrameSpace make_synthetic_space(const SyntheticSpaceOptions& o) {
  if (o.min_frame < 1 || o.max_frame < o.min_frame || o.max_frame > o.num_roles) {
    throw ValidationError("synthetic space: need 1 <= min_frame <= max_frame <= num_roles");
  }
  Rng rng(o.seed);
  std::vector<std::string> verbs, roles, nouns;
  for (std::size_t i = 0; i < o.num_verbs; ++i) verbs.push_back("verb" + std::to_string(i));
  for (std::size_t i = 0; i < o.num_roles; ++i) roles.push_back("role" + std::to_string(i));
  for (std::size_t i = 0; i < o.num_nouns; ++i) nouns.push_back("noun" + std::to_string(i));
  std::vector<std::vector<std::string>> frames;
  for (std::size_t v = 0; v < o.num_verbs; ++v) {
    // Cycle frame sizes so every size in range occurs once verbs allow it.
    const std::size_t size = o.min_frame + v % (o.max_frame - o.min_frame + 1);
    std::vector<std::size_t> pool(o.num_roles);
    for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
    for (std::size_t i = 0; i < size; ++i) std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
    std::vector<std::string> frame;
    for (std::size_t i = 0; i < size; ++i) frame.push_back(roles[pool[i]]);
    frames.push_back(std::move(frame));
  }
  return FrameSpace(std::move(verbs), std::move(frames), std::move(roles), std::move(nouns),
                    std::max(kDefaultMaxRoles, o.max_frame));
}

namespace {

std::vector<std::vector<double>> unit_signatures(Rng& rng, std::size_t count, std::size_t channels) {
  std::vector<std::vector<double>> out(count, std::vector<double>(channels));
  for (auto& sig : out) {
    double norm = 0.0;
    for (double& x : sig) {
      x = rng.normal();
      norm += x * x;
    }
    norm = std::sqrt(norm);
    for (double& x : sig) x /= norm;
  }
  return out;
}

struct CellRect {
  std::size_t x = 0, y = 0, w = 1, h = 1;
};

}  // namespace

std::vector<SyntheticSample> generate_synthetic(const FrameSpace& space, std::size_t n_images,
                                                const SyntheticOptions& o, std::uint64_t seed) {
  if (n_images == 0) throw ValidationError("generate_synthetic: n_images must be at least 1");
  if (o.channels == 0 || o.height == 0 || o.width == 0) throw ValidationError("generate_synthetic: empty grid");
  if (o.min_extent < 1 || o.max_extent < o.min_extent) throw ValidationError("generate_synthetic: bad box extents");
  const std::size_t cells = o.height * o.width;
  for (std::size_t v = 0; v < space.num_verbs(); ++v) {
    const std::size_t need = space.frame(v).size() * o.min_extent * o.min_extent;
    if (need > cells || o.min_extent > std::min(o.height, o.width)) {
      throw ValidationError("generate_synthetic: grid " + std::to_string(o.height) + "x" + std::to_string(o.width) +
                            " too small to place " + std::to_string(space.frame(v).size()) +
                            " disjoint patterns for verb '" + space.verb_name(v) + "'");
    }
  }
  if (space.num_nouns() < 2) throw ValidationError("generate_synthetic: need at least one known noun");

  Rng sig_rng(o.signature_seed);
  const auto verb_sig = unit_signatures(sig_rng, space.num_verbs(), o.channels);
  const auto role_sig = unit_signatures(sig_rng, space.num_roles(), o.channels);
  const auto noun_sig = unit_signatures(sig_rng, space.num_nouns(), o.channels);
  const auto absent_sig = unit_signatures(sig_rng, 1, o.channels).front();

  Rng rng(seed);
  // Balanced verb assignment, then shuffled.
  std::vector<std::size_t> verb_of(n_images);
  for (std::size_t i = 0; i < n_images; ++i) verb_of[i] = i % space.num_verbs();
  for (std::size_t i = n_images; i > 1; --i) std::swap(verb_of[i - 1], verb_of[rng.below(i)]);

  const std::size_t extent_span = o.max_extent - o.min_extent + 1;
  std::vector<SyntheticSample> out;
  out.reserve(n_images);
  for (std::size_t i = 0; i < n_images; ++i) {
    const std::size_t v = verb_of[i];
    const auto& frame = space.frame(v);

    std::vector<CellRect> rects;
    std::vector<bool> absent;
    bool placed = false;
    for (int attempt = 0; attempt < 64 && !placed; ++attempt) {
      rects.clear();
      absent.clear();
      std::vector<bool> occupied(cells, false);
      placed = true;
      for (std::size_t k = 0; k < frame.size() && placed; ++k) {
        const bool no_box = rng.uniform() < o.absent_box_fraction;
        bool ok = false;
        for (int tries = 0; tries < 256 && !ok; ++tries) {
          CellRect r;
          if (!no_box) {
            r.w = std::min(o.width, o.min_extent + rng.below(extent_span));
            r.h = std::min(o.height, o.min_extent + rng.below(extent_span));
          }
          r.x = rng.below(o.width - r.w + 1);
          r.y = rng.below(o.height - r.h + 1);
          ok = true;
          for (std::size_t yy = r.y; yy < r.y + r.h && ok; ++yy)
            for (std::size_t xx = r.x; xx < r.x + r.w && ok; ++xx) ok = !occupied[yy * o.width + xx];
          if (ok) {
            for (std::size_t yy = r.y; yy < r.y + r.h; ++yy)
              for (std::size_t xx = r.x; xx < r.x + r.w; ++xx) occupied[yy * o.width + xx] = true;
            rects.push_back(r);
            absent.push_back(no_box);
          }
        }
        placed = ok;
      }
    }
    if (!placed) {
      throw ValidationError("generate_synthetic: grid too small to place " + std::to_string(frame.size()) +
                            " disjoint patterns");
    }

    FeatureGrid grid{o.channels, o.height, o.width, std::vector<double>(o.channels * cells)};
    for (double& x : grid.values) x = o.noise * rng.normal();

    SituationAnnotation a;
    a.image_id = "syn" + std::to_string(seed) + "_" + std::to_string(i);
    a.width = static_cast<double>(o.width * o.cell_pixels);
    a.height = static_cast<double>(o.height * o.cell_pixels);
    a.verb = space.verb_name(v);
    for (std::size_t k = 0; k < frame.size(); ++k) {
      const std::size_t noun = 1 + rng.below(space.num_nouns() - 1);
      const CellRect& r = rects[k];
      for (std::size_t yy = r.y; yy < r.y + r.h; ++yy) {
        for (std::size_t xx = r.x; xx < r.x + r.w; ++xx) {
          for (std::size_t c = 0; c < o.channels; ++c) {
            double s = verb_sig[v][c] + role_sig[frame[k]][c] + noun_sig[noun][c];
            if (absent[k]) s += absent_sig[c];
            grid.at(c, yy, xx) += o.signal * s;
          }
        }
      }
      RoleEntry entry;
      entry.role = space.role_name(frame[k]);
      entry.nouns.assign(3, space.noun_name(noun));
      if (!absent[k]) {
        const double px = static_cast<double>(o.cell_pixels);
        entry.box = BoxXYXY{static_cast<double>(r.x) * px, static_cast<double>(r.y) * px,
                            static_cast<double>(r.x + r.w) * px, static_cast<double>(r.y + r.h) * px};
      }
      a.roles.push_back(std::move(entry));
    }
    out.push_back(SyntheticSample{std::move(a), std::move(grid)});
  }
  return out;
}

}  // namespace gsr
