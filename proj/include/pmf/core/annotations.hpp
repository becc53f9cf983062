#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "pmf/core/categories.hpp"
#include "pmf/core/config.hpp"
#include "pmf/core/rle.hpp"
#include "pmf/core/types.hpp"

namespace pmf {

struct ImageRecord {
  int id = 0;
  std::string file_name;
  int width = 0;
  int height = 0;
  friend bool operator==(const ImageRecord&, const ImageRecord&) = default;
};

/// Settings that produced a pseudo-annotation.
struct Provenance {
  int G = 0;
  int K = 0;
  UpsampleMode upsample = UpsampleMode::kNearest;
  GuidanceSum guidance = GuidanceSum::kBinary;
  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct Annotation {
  int id = 0;
  int image_id = 0;
  int category_id = 0;
  BBox bbox;
  Rle segmentation;
  std::optional<double> score;
  bool degenerate = false;
  std::optional<Provenance> provenance;
  friend bool operator==(const Annotation&, const Annotation&) = default;
};

/// COCO-style instance annotation file:
///   { images:[{id,file_name,width,height}], categories:[{id,name,split}],
///     annotations:[{id,image_id,category_id,bbox:[x,y,w,h],
///                   segmentation:{counts:[...],size:[h,w]}, score?}] }
struct AnnotationSet {
  std::vector<ImageRecord> images;
  CategoryTable categories;
  std::vector<Annotation> annotations;

  const ImageRecord* find_image(int id) const noexcept;
  std::vector<const Annotation*> for_image(int image_id) const;

  nlohmann::json to_json() const;
  /// Validates cross references (image ids, category ids, mask sizes).
  static AnnotationSet from_json(const nlohmann::json& j);
  friend bool operator==(const AnnotationSet&, const AnnotationSet&) = default;
};

/// Serialized text, identical bytes for identical sets.
std::string dump_annotations(const AnnotationSet& set);
void write_annotations(const std::string& path, const AnnotationSet& set);
AnnotationSet read_annotations(const std::string& path);

/// Image-level label view: what weakly supervised stages are allowed to see.
struct ImageLabels {
  ImageRecord image;
  std::vector<int> labels;
  friend bool operator==(const ImageLabels&, const ImageLabels&) = default;
};

struct LabelSet {
  std::vector<ImageLabels> images;
  CategoryTable categories;

  nlohmann::json to_json() const;
  /// Rejects any per-image key other than id/file_name/width/height/labels.
  static LabelSet from_json(const nlohmann::json& j);
  friend bool operator==(const LabelSet&, const LabelSet&) = default;
};

void write_labels(const std::string& path, const LabelSet& set);
LabelSet read_labels(const std::string& path);

nlohmann::json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace pmf
