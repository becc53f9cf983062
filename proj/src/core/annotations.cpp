#include "pmf/core/annotations.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "pmf/core/errors.hpp"

namespace pmf {

namespace {

nlohmann::json image_to_json(const ImageRecord& im) {
  return {{"id", im.id}, {"file_name", im.file_name}, {"width", im.width}, {"height", im.height}};
}

ImageRecord image_from_json(const nlohmann::json& j) {
  ImageRecord im;
  im.id = j.at("id").get<int>();
  im.file_name = j.at("file_name").get<std::string>();
  im.width = j.at("width").get<int>();
  im.height = j.at("height").get<int>();
  if (im.width <= 0 || im.height <= 0) throw FormatError("image " + std::to_string(im.id) + " has non-positive size");
  return im;
}

template <typename Fn>
auto wrap_json(const std::string& what, Fn&& fn) {
  try {
    return fn();
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(what + ": " + ex.what());
  }
}

}  // namespace

const ImageRecord* AnnotationSet::find_image(int id) const noexcept {
  for (const auto& im : images) {
    if (im.id == id) return &im;
  }
  return nullptr;
}

std::vector<const Annotation*> AnnotationSet::for_image(int image_id) const {
  std::vector<const Annotation*> out;
  for (const auto& a : annotations) {
    if (a.image_id == image_id) out.push_back(&a);
  }
  return out;
}

nlohmann::json AnnotationSet::to_json() const {
  nlohmann::json j;
  j["images"] = nlohmann::json::array();
  for (const auto& im : images) j["images"].push_back(image_to_json(im));
  j["categories"] = categories.to_json();
  j["annotations"] = nlohmann::json::array();
  for (const auto& a : annotations) {
    nlohmann::json e = {
        {"id", a.id},
        {"image_id", a.image_id},
        {"category_id", a.category_id},
        {"bbox", {a.bbox.x, a.bbox.y, a.bbox.w, a.bbox.h}},
        {"segmentation", {{"counts", a.segmentation.counts}, {"size", {a.segmentation.height, a.segmentation.width}}}},
    };
    if (a.score) e["score"] = *a.score;
    if (a.degenerate) e["degenerate"] = true;
    if (a.provenance) {
      e["provenance"] = {{"G", a.provenance->G},
                         {"K", a.provenance->K},
                         {"upsample", to_string(a.provenance->upsample)},
                         {"guidance", to_string(a.provenance->guidance)}};
    }
    j["annotations"].push_back(std::move(e));
  }
  return j;
}

AnnotationSet AnnotationSet::from_json(const nlohmann::json& j) {
  return wrap_json("annotation file", [&] {
    AnnotationSet set;
    std::set<int> image_ids;
    for (const auto& im : j.at("images")) {
      set.images.push_back(image_from_json(im));
      if (!image_ids.insert(set.images.back().id).second) {
        throw FormatError("duplicate image id " + std::to_string(set.images.back().id));
      }
    }
    set.categories = CategoryTable::from_json(j.at("categories"));
    std::set<int> ann_ids;
    for (const auto& e : j.at("annotations")) {
      Annotation a;
      a.id = e.at("id").get<int>();
      if (!ann_ids.insert(a.id).second) throw FormatError("duplicate annotation id " + std::to_string(a.id));
      a.image_id = e.at("image_id").get<int>();
      a.category_id = e.at("category_id").get<int>();
      const auto& b = e.at("bbox");
      if (!b.is_array() || b.size() != 4) throw FormatError("bbox must have 4 numbers");
      a.bbox = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
      const auto& seg = e.at("segmentation");
      const auto& size = seg.at("size");
      if (!size.is_array() || size.size() != 2) throw FormatError("segmentation.size must be [h,w]");
      a.segmentation.height = size[0].get<int>();
      a.segmentation.width = size[1].get<int>();
      a.segmentation.counts = seg.at("counts").get<std::vector<std::uint32_t>>();
      if (e.contains("score")) a.score = e.at("score").get<double>();
      if (e.contains("degenerate")) a.degenerate = e.at("degenerate").get<bool>();
      if (e.contains("provenance")) {
        const auto& p = e.at("provenance");
        a.provenance = Provenance{p.at("G").get<int>(), p.at("K").get<int>(),
                                  parse_upsample_mode(p.at("upsample").get<std::string>()),
                                  parse_guidance_sum(p.at("guidance").get<std::string>())};
      }
      const ImageRecord* im = set.find_image(a.image_id);
      if (!im) throw FormatError("annotation " + std::to_string(a.id) + " references unknown image");
      if (!set.categories.find(a.category_id)) {
        throw FormatError("annotation " + std::to_string(a.id) + " references unknown category");
      }
      if (a.segmentation.height != im->height || a.segmentation.width != im->width) {
        throw FormatError("annotation " + std::to_string(a.id) + " mask size differs from image size");
      }
      (void)rle_decode(a.segmentation);  // validates counts
      set.annotations.push_back(std::move(a));
    }
    return set;
  });
}

std::string dump_annotations(const AnnotationSet& set) { return set.to_json().dump(1) + "\n"; }

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open for writing: " + path);
  out << text;
  if (!out) throw Error("write failed: " + path);
}

nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("missing input file: " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(path + ": " + ex.what());
  }
}

void write_annotations(const std::string& path, const AnnotationSet& set) {
  write_text_file(path, dump_annotations(set));
}

AnnotationSet read_annotations(const std::string& path) { return AnnotationSet::from_json(read_json_file(path)); }

nlohmann::json LabelSet::to_json() const {
  nlohmann::json j;
  j["images"] = nlohmann::json::array();
  for (const auto& il : images) {
    auto e = image_to_json(il.image);
    e["labels"] = il.labels;
    j["images"].push_back(std::move(e));
  }
  j["categories"] = categories.to_json();
  return j;
}

LabelSet LabelSet::from_json(const nlohmann::json& j) {
  static const std::set<std::string> allowed = {"id", "file_name", "width", "height", "labels"};
  return wrap_json("label file", [&] {
    LabelSet set;
    if (j.contains("annotations")) throw FormatError("label view must not carry annotations");
    set.categories = CategoryTable::from_json(j.at("categories"));
    for (const auto& e : j.at("images")) {
      for (const auto& [key, _] : e.items()) {
        if (!allowed.count(key)) throw FormatError("label view image carries forbidden key '" + key + "'");
      }
      ImageLabels il{image_from_json(e), e.at("labels").get<std::vector<int>>()};
      for (const int c : il.labels) {
        if (!set.categories.find(c)) throw FormatError("label references unknown category " + std::to_string(c));
      }
      set.images.push_back(std::move(il));
    }
    return set;
  });
}

void write_labels(const std::string& path, const LabelSet& set) { write_text_file(path, set.to_json().dump(1) + "\n"); }

LabelSet read_labels(const std::string& path) { return LabelSet::from_json(read_json_file(path)); }

}  // namespace pmf
