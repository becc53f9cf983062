#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pmf/core/activation.hpp"
#include "pmf/core/annotations.hpp"
#include "pmf/core/categories.hpp"
#include "pmf/core/rng.hpp"
#include "pmf/core/types.hpp"

namespace pmf::synth {

enum class Shape { kDisc, kSquare, kTriangle, kRing, kCross, kDiamond };

std::string to_string(Shape shape);
Shape parse_shape(const std::string& text);

/// Appearance of one category: a shape drawn in a body color with a lighter
/// accent patch (the "most discriminative part").
struct CategoryStyle {
  int category_id = 0;
  Shape shape = Shape::kDisc;
  Rgb body{};
  Rgb accent{};
};

struct SceneCategories {
  CategoryTable table;
  std::vector<CategoryStyle> styles;

  const CategoryStyle& style(int category_id) const;
};

/// 6 base categories (disc/square/triangle in two colors each) and 3 novel
/// ones (ring, cross, diamond): novel categories are held-out shapes.
SceneCategories default_categories();
/// Two base categories plus one novel, for small training tests.
SceneCategories two_class_categories();

Rgb accent_of(const Rgb& body);

/// Sub-region of an instance that the oracle activation responds to.
struct Part {
  double cx = 0.0;
  double cy = 0.0;
  double radius = 0.0;
  double weight = 0.0;
};

struct Instance {
  int annotation_id = 0;
  int category_id = 0;
  BBox box;          // tight box of the visible mask
  BinaryMask mask;   // visible pixels, full image size
  std::vector<Part> parts;  // parts[0] is the discriminative accent
};

struct SyntheticScene {
  int image_id = 0;
  ImageGrid image;
  std::vector<Instance> instances;
  std::vector<int> image_labels;  // sorted, unique

  const Instance* first_instance_of(int category_id) const noexcept;
};

struct GenerateOptions {
  int num_images = 50;
  int image_size = 128;
  double occlusion_rate = 0.0;
  std::uint64_t seed = 0;
  int min_instances = 1;
  int max_instances = 4;
  int first_image_id = 1;
};

struct Dataset {
  SceneCategories categories;
  std::vector<SyntheticScene> scenes;

  AnnotationSet ground_truth() const;
  LabelSet labels() const;
  std::vector<ImageRecord> image_records() const;
};

std::string image_file_name(int image_id);

/// Deterministic given options.seed; each image uses its own derived stream.
/// Throws InvalidArgument on bad rates or a vocabulary without both splits.
Dataset generate_dataset(const GenerateOptions& options, const SceneCategories& categories,
                         int workers = 1);
SyntheticScene generate_scene(int image_id, const GenerateOptions& options,
                              const SceneCategories& categories);

struct OracleOptions {
  double spread = 0.35;     // Gaussian sigma as a fraction of instance radius
  double noise = 0.1;       // additive Gaussian noise relative to the peak
  bool masking_aware = true;
  bool use_parts = true;    // false: one blob at each instance box center
  int downsample = 16;
};

/// Test double for the VLM: Gaussian blobs at the parts of every instance of
/// `category_id`, integrated over feature cells, scaled to peak 1, plus
/// noise. In masking-aware mode a part is attenuated by the fraction of its
/// pixels that differ between `current` and the scene's original image.
/// Cells whose center lies outside the image are zero.
/// Throws InvalidArgument when the category is absent from the scene.
ActivationMap oracle_activation(const SyntheticScene& scene, int category_id, const ImageGrid& current,
                                const OracleOptions& options, RngStream& rng);

}  // namespace pmf::synth
