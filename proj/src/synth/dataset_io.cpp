#include "pmf/synth/dataset_io.hpp"

#include <algorithm>
#include <filesystem>
#include <map>

#include "pmf/core/ppm.hpp"

namespace pmf::synth {

namespace fs = std::filesystem;
using nlohmann::json;

std::string images_dir(const std::string& dir) { return (fs::path(dir) / "images").string(); }
std::string annotations_path(const std::string& dir) { return (fs::path(dir) / "annotations.json").string(); }
std::string labels_path(const std::string& dir) { return (fs::path(dir) / "labels.json").string(); }
std::string scene_meta_path(const std::string& dir) { return (fs::path(dir) / "scene_meta.json").string(); }

ImageGrid load_image(const std::string& dir, const ImageRecord& record) {
  const auto path = (fs::path(images_dir(dir)) / record.file_name).string();
  if (!fs::exists(path)) throw InvalidArgument("missing input file: " + path);
  ImageGrid image = read_ppm(path);
  if (image.width() != record.width || image.height() != record.height) {
    throw FormatError(path + ": size differs from the annotation record");
  }
  return image;
}

namespace {

json rgb_json(const Rgb& c) { return json::array({c[0], c[1], c[2]}); }

Rgb rgb_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw FormatError("scene_meta: color must be [r,g,b]");
  return {j[0].get<float>(), j[1].get<float>(), j[2].get<float>()};
}

}  // namespace

void write_dataset(const std::string& dir, const Dataset& dataset) {
  fs::create_directories(images_dir(dir));
  for (const auto& scene : dataset.scenes) {
    write_ppm((fs::path(images_dir(dir)) / image_file_name(scene.image_id)).string(), scene.image);
  }
  write_annotations(annotations_path(dir), dataset.ground_truth());
  write_labels(labels_path(dir), dataset.labels());

  json meta;
  meta["version"] = 1;
  json styles = json::array();
  for (const auto& s : dataset.categories.styles) {
    styles.push_back({{"category_id", s.category_id},
                      {"shape", to_string(s.shape)},
                      {"body", rgb_json(s.body)},
                      {"accent", rgb_json(s.accent)}});
  }
  meta["styles"] = styles;
  json parts = json::object();
  for (const auto& scene : dataset.scenes) {
    for (const auto& inst : scene.instances) {
      json list = json::array();
      for (const auto& p : inst.parts) list.push_back({p.cx, p.cy, p.radius, p.weight});
      parts[std::to_string(inst.annotation_id)] = list;
    }
  }
  meta["parts"] = parts;
  write_text_file(scene_meta_path(dir), meta.dump(1) + "\n");
}

Dataset read_dataset(const std::string& dir) {
  const AnnotationSet gt = read_annotations(annotations_path(dir));
  const json meta = read_json_file(scene_meta_path(dir));
  if (meta.value("version", 0) != 1) throw VersionError("scene_meta", meta.value("version", 0), 1);

  Dataset ds;
  ds.categories.table = gt.categories;
  for (const auto& s : meta.at("styles")) {
    ds.categories.styles.push_back({s.at("category_id").get<int>(), parse_shape(s.at("shape").get<std::string>()),
                                    rgb_from(s.at("body")), rgb_from(s.at("accent"))});
  }
  const json& parts = meta.at("parts");

  std::map<int, std::vector<const Annotation*>> by_image;
  for (const auto& a : gt.annotations) by_image[a.image_id].push_back(&a);
  for (const auto& record : gt.images) {
    SyntheticScene scene;
    scene.image_id = record.id;
    scene.image = load_image(dir, record);
    std::vector<int> labels;
    for (const Annotation* a : by_image[record.id]) {
      Instance inst;
      inst.annotation_id = a->id;
      inst.category_id = a->category_id;
      inst.box = a->bbox;
      inst.mask = rle_decode(a->segmentation);
      const auto it = parts.find(std::to_string(a->id));
      if (it != parts.end()) {
        for (const auto& p : *it) {
          inst.parts.push_back({p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>(),
                                p.at(3).get<double>()});
        }
      }
      labels.push_back(a->category_id);
      scene.instances.push_back(std::move(inst));
    }
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    scene.image_labels = std::move(labels);
    ds.scenes.push_back(std::move(scene));
  }
  return ds;
}

}  // namespace pmf::synth
