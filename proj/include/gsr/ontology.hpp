// Copyright (c) 2026, The gsrtr Authors
// SPDX-License-Identifier: Apache-2.0
//
// Verb/role/noun universe, annotation types, dataset I/O and the synthetic
// dataset generator.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace gsr {

inline constexpr std::size_t kDefaultMaxRoles = 6;
inline constexpr const char* kUnknownNoun = "∅";  // always noun index 0

/// Axis-aligned rectangle (x1, y1, x2, y2).
struct BoxXYXY {
  double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;
  friend bool operator==(const BoxXYXY&, const BoxXYXY&) = default;
};

/// Center/size box, normalized to the image extent.
struct BoxCXCYWH {
  double cx = 0.0, cy = 0.0, w = 0.0, h = 0.0;
  friend bool operator==(const BoxCXCYWH&, const BoxCXCYWH&) = default;
};

/// Immutable ontology: vocabularies plus the ordered role frame of each verb.
class FrameSpace {
 public:
  FrameSpace() = default;

  /// Validates and indexes. The unknown noun is inserted at index 0 unless
  /// `nouns` already starts with it; anywhere else it is an error.
  FrameSpace(std::vector<std::string> verbs, std::vector<std::vector<std::string>> frames,
             std::vector<std::string> roles, std::vector<std::string> nouns,
             std::size_t max_roles = kDefaultMaxRoles);

  std::size_t num_verbs() const { return verbs_.size(); }
  std::size_t num_roles() const { return roles_.size(); }
  /// Includes the unknown noun.
  std::size_t num_nouns() const { return nouns_.size(); }
  std::size_t max_roles() const { return max_roles_; }
  std::size_t max_frame_size() const;

  const std::vector<std::string>& verbs() const { return verbs_; }
  const std::vector<std::string>& roles() const { return roles_; }
  const std::vector<std::string>& nouns() const { return nouns_; }

  const std::string& verb_name(std::size_t v) const { return verbs_.at(v); }
  const std::string& role_name(std::size_t r) const { return roles_.at(r); }
  const std::string& noun_name(std::size_t n) const { return nouns_.at(n); }

  std::optional<std::size_t> find_verb(const std::string& name) const;
  std::optional<std::size_t> find_role(const std::string& name) const;
  std::optional<std::size_t> find_noun(const std::string& name) const;

  std::size_t verb_index(const std::string& name) const;
  std::size_t role_index(const std::string& name) const;
  std::size_t noun_index(const std::string& name) const;

  /// Role indices of verb v in canonical (declaration) order.
  const std::vector<std::size_t>& frame(std::size_t v) const { return frames_.at(v); }

  friend bool operator==(const FrameSpace& a, const FrameSpace& b) {
    return a.verbs_ == b.verbs_ && a.roles_ == b.roles_ && a.nouns_ == b.nouns_ && a.frames_ == b.frames_;
  }

 private:
  std::vector<std::string> verbs_;
  std::vector<std::string> roles_;
  std::vector<std::string> nouns_;
  std::vector<std::vector<std::size_t>> frames_;
  std::unordered_map<std::string, std::size_t> verb_lookup_;
  std::unordered_map<std::string, std::size_t> role_lookup_;
  std::unordered_map<std::string, std::size_t> noun_lookup_;
  std::size_t max_roles_ = kDefaultMaxRoles;
};

struct RoleEntry {
  std::string role;
  std::vector<std::string> nouns;  // exactly three annotator labels
  std::optional<BoxXYXY> box;      // absolute pixels; nullopt is the "no box" marker
  friend bool operator==(const RoleEntry&, const RoleEntry&) = default;
};

struct SituationAnnotation {
  std::string image_id;
  double width = 0.0;
  double height = 0.0;
  std::string verb;
  std::vector<RoleEntry> roles;           // frame order
  std::optional<std::string> features;    // feature container path, as written in the dataset
  friend bool operator==(const SituationAnnotation&, const SituationAnnotation&) = default;
};

/// Backbone-style feature map, channel-major (c x h x w).
struct FeatureGrid {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  double at(std::size_t c, std::size_t y, std::size_t x) const { return values[(c * height + y) * width + x]; }
  double& at(std::size_t c, std::size_t y, std::size_t x) { return values[(c * height + y) * width + x]; }
  friend bool operator==(const FeatureGrid&, const FeatureGrid&) = default;
};

void validate_feature_grid(const FeatureGrid& grid);

/// Checks an annotation against the space; throws ValidationError with `where`
/// prefixed to the message.
void validate_annotation(const SituationAnnotation& annotation, const FrameSpace& space,
                         const std::string& where = "annotation");

FrameSpace load_frame_space(const std::filesystem::path& path);
FrameSpace parse_frame_space(const std::string& json_text, const std::string& where = "space");
void save_frame_space(const FrameSpace& space, const std::filesystem::path& path);
std::string frame_space_to_json(const FrameSpace& space);

std::vector<SituationAnnotation> load_dataset(const std::filesystem::path& path, const FrameSpace& space);
std::vector<SituationAnnotation> parse_dataset(const std::string& jsonl_text, const FrameSpace& space,
                                               const std::string& where = "dataset");
void save_dataset(const std::vector<SituationAnnotation>& annotations, const std::filesystem::path& path);
std::string dataset_to_jsonl(const std::vector<SituationAnnotation>& annotations);

/// Reads a SWiG-style annotation file ({image: {verb, width, height, bb,
/// frames}}) mapping negative box coordinates to "no box" and blank nouns to
/// the unknown noun.
std::vector<SituationAnnotation> import_swig(const std::filesystem::path& path, const FrameSpace& space);
std::vector<SituationAnnotation> parse_swig(const std::string& json_text, const FrameSpace& space,
                                            const std::string& where = "swig");

/// Feature container (see named_array.hpp) with one [c, h, w] array per image_id.
void save_feature_grids(const std::filesystem::path& path,
                        const std::vector<std::pair<std::string, FeatureGrid>>& grids);
std::map<std::string, FeatureGrid> load_feature_grids(const std::filesystem::path& path);

struct SyntheticSpaceOptions {
  std::size_t num_verbs = 8;
  std::size_t num_roles = 10;
  std::size_t num_nouns = 24;  // excluding the unknown noun
  std::size_t min_frame = 1;
  std::size_t max_frame = 4;
  std::uint64_t seed = 0;
};

FrameSpace make_synthetic_space(const SyntheticSpaceOptions& options);

struct SyntheticOptions {
  std::size_t channels = 32;
  std::size_t height = 6;
  std::size_t width = 6;
  std::size_t cell_pixels = 16;       // image extent = grid extent * cell_pixels
  std::size_t min_extent = 2;         // box side length in grid cells
  std::size_t max_extent = 3;
  double absent_box_fraction = 0.2;   // roles planted as a single ungrounded cell
  double noise = 0.1;
  double signal = 1.0;
  std::uint64_t signature_seed = 0x51A7;  // shared by every dataset drawn from one space
};

struct SyntheticSample {
  SituationAnnotation annotation;
  FeatureGrid grid;
};

/// Deterministic in `seed`. Each role is planted as a rectangle of cells whose
/// channel signature is the sum of verb, role and noun signatures; rectangles
/// never overlap and match the annotated box scaled to the grid. Roles without
/// a box get a one-cell pattern carrying an extra "ungrounded" signature.
std::vector<SyntheticSample> generate_synthetic(const FrameSpace& space, std::size_t n_images,
                                                const SyntheticOptions& options, std::uint64_t seed);

}  // namespace gsr
