#include "pmf/synth/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <set>

#include "pmf/core/parallel.hpp"
#include "pmf/core/ppm.hpp"

namespace pmf::synth {

std::string to_string(Shape shape) {
  switch (shape) {
    case Shape::kDisc: return "disc";
    case Shape::kSquare: return "square";
    case Shape::kTriangle: return "triangle";
    case Shape::kRing: return "ring";
    case Shape::kCross: return "cross";
    case Shape::kDiamond: return "diamond";
  }
  return "unknown";
}

Shape parse_shape(const std::string& text) {
  for (Shape s : {Shape::kDisc, Shape::kSquare, Shape::kTriangle, Shape::kRing, Shape::kCross, Shape::kDiamond}) {
    if (to_string(s) == text) return s;
  }
  throw InvalidArgument("unknown shape '" + text + "'");
}

Rgb accent_of(const Rgb& body) {
  return {body[0] + 0.5f * (1.0f - body[0]), body[1] + 0.5f * (1.0f - body[1]), body[2] + 0.5f * (1.0f - body[2])};
}

const CategoryStyle& SceneCategories::style(int category_id) const {
  for (const auto& s : styles) {
    if (s.category_id == category_id) return s;
  }
  throw InvalidArgument("no style for category " + std::to_string(category_id));
}

namespace {

struct StyleSpec {
  const char* color_name;
  Shape shape;
  Rgb body;
  Split split;
};

SceneCategories build_categories(const std::vector<StyleSpec>& specs) {
  std::vector<Category> entries;
  SceneCategories out;
  int id = 1;
  for (const auto& s : specs) {
    entries.push_back({id, std::string(s.color_name) + " " + to_string(s.shape), s.split});
    out.styles.push_back({id, s.shape, s.body, accent_of(s.body)});
    ++id;
  }
  out.table = CategoryTable(std::move(entries));
  return out;
}

}  // namespace

SceneCategories default_categories() {
  return build_categories({
      {"red", Shape::kDisc, {0.85f, 0.15f, 0.15f}, Split::kBase},
      {"blue", Shape::kDisc, {0.15f, 0.25f, 0.85f}, Split::kBase},
      {"green", Shape::kSquare, {0.15f, 0.70f, 0.20f}, Split::kBase},
      {"yellow", Shape::kSquare, {0.90f, 0.80f, 0.10f}, Split::kBase},
      {"magenta", Shape::kTriangle, {0.80f, 0.15f, 0.75f}, Split::kBase},
      {"cyan", Shape::kTriangle, {0.10f, 0.75f, 0.80f}, Split::kBase},
      {"orange", Shape::kRing, {0.95f, 0.50f, 0.05f}, Split::kNovel},
      {"violet", Shape::kCross, {0.50f, 0.20f, 0.90f}, Split::kNovel},
      {"lime", Shape::kDiamond, {0.60f, 0.95f, 0.20f}, Split::kNovel},
  });
}

SceneCategories two_class_categories() {
  return build_categories({
      {"red", Shape::kDisc, {0.85f, 0.15f, 0.15f}, Split::kBase},
      {"green", Shape::kSquare, {0.15f, 0.70f, 0.20f}, Split::kBase},
      {"orange", Shape::kRing, {0.95f, 0.50f, 0.05f}, Split::kNovel},
  });
}

const Instance* SyntheticScene::first_instance_of(int category_id) const noexcept {
  for (const auto& inst : instances) {
    if (inst.category_id == category_id) return &inst;
  }
  return nullptr;
}

std::string image_file_name(int image_id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "img_%05d.ppm", image_id);
  return buf;
}

namespace {

bool inside_shape(Shape shape, double dx, double dy, double r) {
  switch (shape) {
    case Shape::kDisc: return dx * dx + dy * dy <= r * r;
    case Shape::kSquare: return std::abs(dx) <= 0.85 * r && std::abs(dy) <= 0.85 * r;
    case Shape::kTriangle: {
      if (dy < -r || dy > r) return false;
      const double half_width = r * (dy + r) / (2.0 * r);
      return std::abs(dx) <= half_width;
    }
    case Shape::kRing: {
      const double d2 = dx * dx + dy * dy;
      return d2 <= r * r && d2 >= 0.55 * 0.55 * r * r;
    }
    case Shape::kCross:
      return (std::abs(dx) <= 0.33 * r && std::abs(dy) <= r) || (std::abs(dy) <= 0.33 * r && std::abs(dx) <= r);
    case Shape::kDiamond: return std::abs(dx) + std::abs(dy) <= r;
  }
  return false;
}

struct Placement {
  const CategoryStyle* style = nullptr;
  double cx = 0.0, cy = 0.0, r = 0.0;
  double accent_x = 0.0, accent_y = 0.0, accent_r = 0.0;
  BinaryMask shape_mask;
  BinaryMask accent_mask;
};

bool boxes_overlap(const Placement& a, double cx, double cy, double r, double margin) {
  return std::abs(a.cx - cx) < a.r + r + margin && std::abs(a.cy - cy) < a.r + r + margin;
}

float clamp01(double v) { return static_cast<float>(std::clamp(v, 0.0, 1.0)); }

}  // namespace

SyntheticScene generate_scene(int image_id, const GenerateOptions& options, const SceneCategories& categories) {
  const int size = options.image_size;
  RngStream rng(options.seed, "synth.scene", static_cast<std::uint64_t>(image_id));

  // Muted textured background: base color, low-frequency shading, pixel noise.
  const Rgb base{static_cast<float>(rng.uniform(0.35, 0.6)), static_cast<float>(rng.uniform(0.35, 0.6)),
                 static_cast<float>(rng.uniform(0.35, 0.6))};
  const double fx = rng.uniform(0.03, 0.12), fy = rng.uniform(0.03, 0.12);
  const double px = rng.uniform(0.0, 2.0 * std::numbers::pi), py = rng.uniform(0.0, 2.0 * std::numbers::pi);
  std::vector<float> pixels(static_cast<std::size_t>(size) * size * 3);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double shade = 0.06 * std::sin(fx * x + px) * std::sin(fy * y + py);
      for (int c = 0; c < 3; ++c) {
        pixels[(static_cast<std::size_t>(y) * size + x) * 3 + c] = clamp01(base[c] + shade + rng.normal(0.0, 0.025));
      }
    }
  }

  const int wanted = rng.uniform_int(options.min_instances, options.max_instances);
  std::vector<Placement> placed;
  const double max_r = std::max(10.0, 0.17 * size);
  for (int k = 0; k < wanted; ++k) {
    for (int attempt = 0; attempt < 60; ++attempt) {
      const auto& entry = categories.table.entries()[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<int>(categories.table.size()) - 1))];
      const double r = rng.uniform(9.0, max_r);
      const double cx = rng.uniform(r + 1.0, size - r - 1.0);
      const double cy = rng.uniform(r + 1.0, size - r - 1.0);
      const bool may_overlap = rng.bernoulli(options.occlusion_rate);
      if (!may_overlap) {
        const bool clash = std::any_of(placed.begin(), placed.end(),
                                       [&](const Placement& p) { return boxes_overlap(p, cx, cy, r, 2.0); });
        if (clash) continue;
      }
      Placement p;
      p.style = &categories.style(entry.id);
      p.cx = cx;
      p.cy = cy;
      p.r = r;
      p.shape_mask = BinaryMask(size, size, 0);
      std::vector<std::pair<int, int>> accent_candidates;
      for (int y = std::max(0, static_cast<int>(cy - r - 1)); y < std::min(size, static_cast<int>(cy + r + 2)); ++y) {
        for (int x = std::max(0, static_cast<int>(cx - r - 1)); x < std::min(size, static_cast<int>(cx + r + 2)); ++x) {
          const double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
          if (!inside_shape(p.style->shape, dx, dy, r)) continue;
          p.shape_mask.at(y, x) = 1;
          const double d = std::hypot(dx, dy);
          if (d >= 0.35 * r && d <= 0.75 * r) accent_candidates.emplace_back(x, y);
        }
      }
      if (count_set(p.shape_mask) < 20 || accent_candidates.empty()) continue;
      const auto [ax, ay] = accent_candidates[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<int>(accent_candidates.size()) - 1))];
      p.accent_x = ax + 0.5;
      p.accent_y = ay + 0.5;
      p.accent_r = 0.4 * r;
      p.accent_mask = BinaryMask(size, size, 0);
      for (std::size_t i = 0; i < p.shape_mask.size(); ++i) {
        if (!p.shape_mask[i]) continue;
        const int x = static_cast<int>(i % size), y = static_cast<int>(i / size);
        if (std::hypot(x + 0.5 - p.accent_x, y + 0.5 - p.accent_y) <= p.accent_r) p.accent_mask[i] = 1;
      }
      placed.push_back(std::move(p));
      break;
    }
  }

  // Paint in placement order; later instances occlude earlier ones.
  for (const auto& p : placed) {
    for (std::size_t i = 0; i < p.shape_mask.size(); ++i) {
      if (!p.shape_mask[i]) continue;
      const Rgb& color = p.accent_mask[i] ? p.style->accent : p.style->body;
      for (int c = 0; c < 3; ++c) pixels[i * 3 + c] = clamp01(color[c] + rng.normal(0.0, 0.02));
    }
  }

  SyntheticScene scene;
  scene.image_id = image_id;
  scene.image = quantize_8bit(ImageGrid(size, size, std::move(pixels)));
  std::set<int> labels;
  for (std::size_t k = 0; k < placed.size(); ++k) {
    const auto& p = placed[k];
    BinaryMask visible = p.shape_mask;
    for (std::size_t later = k + 1; later < placed.size(); ++later) {
      for (std::size_t i = 0; i < visible.size(); ++i) {
        if (placed[later].shape_mask[i]) visible[i] = 0;
      }
    }
    if (count_set(visible) == 0) continue;
    Instance inst;
    inst.annotation_id = image_id * 100 + static_cast<int>(scene.instances.size()) + 1;
    inst.category_id = p.style->category_id;
    inst.box = mask_bounding_box(visible);
    double sx = 0.0, sy = 0.0, n = 0.0;
    for (std::size_t i = 0; i < visible.size(); ++i) {
      if (!visible[i]) continue;
      sx += static_cast<double>(i % size) + 0.5;
      sy += static_cast<double>(i / size) + 0.5;
      n += 1.0;
    }
    inst.parts.push_back({p.accent_x, p.accent_y, p.accent_r, 1.0});
    inst.parts.push_back({sx / n, sy / n, 0.6 * p.r, 0.6});
    inst.parts.push_back({2.0 * p.cx - p.accent_x, 2.0 * p.cy - p.accent_y, 0.4 * p.r, 0.45});
    inst.mask = std::move(visible);
    labels.insert(inst.category_id);
    scene.instances.push_back(std::move(inst));
  }
  scene.image_labels.assign(labels.begin(), labels.end());
  return scene;
}

Dataset generate_dataset(const GenerateOptions& options, const SceneCategories& categories, int workers) {
  if (!(options.occlusion_rate >= 0.0 && options.occlusion_rate <= 1.0)) {
    throw InvalidArgument("occlusion_rate must be in [0,1]");
  }
  if (options.num_images < 0) throw InvalidArgument("num_images must be >= 0");
  if (options.min_instances < 1 || options.max_instances < options.min_instances) {
    throw InvalidArgument("instance count range is invalid");
  }
  if (options.image_size < 32) throw InvalidArgument("image_size must be >= 32");
  if (categories.table.ids(Split::kBase).empty() || categories.table.ids(Split::kNovel).empty()) {
    throw InvalidArgument("synthetic vocabulary needs at least one base and one novel category");
  }
  Dataset ds;
  ds.categories = categories;
  ds.scenes.resize(static_cast<std::size_t>(options.num_images));
  parallel_for(ds.scenes.size(), workers, [&](std::size_t i) {
    ds.scenes[i] = generate_scene(options.first_image_id + static_cast<int>(i), options, categories);
  });
  return ds;
}

std::vector<ImageRecord> Dataset::image_records() const {
  std::vector<ImageRecord> out;
  for (const auto& s : scenes) {
    out.push_back({s.image_id, image_file_name(s.image_id), s.image.width(), s.image.height()});
  }
  return out;
}

AnnotationSet Dataset::ground_truth() const {
  AnnotationSet set;
  set.images = image_records();
  set.categories = categories.table;
  for (const auto& s : scenes) {
    for (const auto& inst : s.instances) {
      Annotation a;
      a.id = inst.annotation_id;
      a.image_id = s.image_id;
      a.category_id = inst.category_id;
      a.bbox = inst.box;
      a.segmentation = rle_encode(inst.mask);
      set.annotations.push_back(std::move(a));
    }
  }
  return set;
}

LabelSet Dataset::labels() const {
  LabelSet set;
  set.categories = categories.table;
  const auto records = image_records();
  for (std::size_t i = 0; i < scenes.size(); ++i) set.images.push_back({records[i], scenes[i].image_labels});
  return set;
}

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// Gaussian mass of N((cx,cy), sigma^2 I) inside [x0,x1) x [y0,y1).
double cell_mass(double cx, double cy, double sigma, double x0, double x1, double y0, double y1) {
  const double mx = normal_cdf((x1 - cx) / sigma) - normal_cdf((x0 - cx) / sigma);
  const double my = normal_cdf((y1 - cy) / sigma) - normal_cdf((y0 - cy) / sigma);
  return mx * my;
}

double masked_fraction(const Instance& inst, const Part* part, const ImageGrid& original, const ImageGrid& current) {
  std::size_t total = 0, masked = 0;
  const int w = original.width();
  for (std::size_t i = 0; i < inst.mask.size(); ++i) {
    if (!inst.mask[i]) continue;
    const int x = static_cast<int>(i % static_cast<std::size_t>(w)), y = static_cast<int>(i / static_cast<std::size_t>(w));
    if (part && std::hypot(x + 0.5 - part->cx, y + 0.5 - part->cy) > part->radius) continue;
    ++total;
    if (original.pixel(y, x) != current.pixel(y, x)) ++masked;
  }
  return total == 0 ? 0.0 : static_cast<double>(masked) / static_cast<double>(total);
}

}  // namespace

ActivationMap oracle_activation(const SyntheticScene& scene, int category_id, const ImageGrid& current,
                                const OracleOptions& options, RngStream& rng) {
  const ImageGrid& original = scene.image;
  if (current.height() != original.height() || current.width() != original.width()) {
    throw ShapeError("oracle_activation: image size differs from the scene");
  }
  if (options.downsample < 1 || !(options.spread > 0.0) || !(options.noise >= 0.0)) {
    throw InvalidArgument("oracle_activation: invalid options");
  }
  const int H = original.height(), W = original.width(), ds = options.downsample;
  const int hf = (H + ds - 1) / ds, wf = (W + ds - 1) / ds;
  std::vector<double> acc(static_cast<std::size_t>(hf) * wf, 0.0);

  auto add_blob = [&](double cx, double cy, double sigma, double weight) {
    if (weight <= 0.0) return;
    for (int gy = 0; gy < hf; ++gy) {
      for (int gx = 0; gx < wf; ++gx) {
        const double x0 = gx * ds, x1 = std::min<double>((gx + 1) * ds, W);
        const double y0 = gy * ds, y1 = std::min<double>((gy + 1) * ds, H);
        acc[static_cast<std::size_t>(gy) * wf + gx] += weight * cell_mass(cx, cy, sigma, x0, x1, y0, y1);
      }
    }
  };

  bool found = false;
  for (const auto& inst : scene.instances) {
    if (inst.category_id != category_id) continue;
    found = true;
    const double radius = 0.5 * std::max(inst.box.w, inst.box.h);
    const double sigma = std::max(1e-3, options.spread * radius);
    if (options.use_parts) {
      for (const auto& part : inst.parts) {
        const double keep = options.masking_aware ? 1.0 - masked_fraction(inst, &part, original, current) : 1.0;
        add_blob(part.cx, part.cy, sigma, part.weight * keep);
      }
    } else {
      const double keep = options.masking_aware ? 1.0 - masked_fraction(inst, nullptr, original, current) : 1.0;
      add_blob(inst.box.cx(), inst.box.cy(), sigma, keep);
    }
  }
  if (!found) {
    throw InvalidArgument("category " + std::to_string(category_id) + " is not present in image " +
                          std::to_string(scene.image_id));
  }

  const double peak = *std::max_element(acc.begin(), acc.end());
  ActivationMap map;
  map.category_id = category_id;
  map.values = Grid<float>(hf, wf, 0.0f);
  for (int gy = 0; gy < hf; ++gy) {
    for (int gx = 0; gx < wf; ++gx) {
      const std::size_t i = static_cast<std::size_t>(gy) * wf + gx;
      double v = peak > 0.0 ? acc[i] / peak : 0.0;
      if (options.noise > 0.0) v += rng.normal(0.0, options.noise);
      const bool outside = (gy + 0.5) * ds >= H || (gx + 0.5) * ds >= W;
      map.values[i] = outside ? 0.0f : static_cast<float>(std::max(v, 0.0));
    }
  }
  return map;
}

}  // namespace pmf::synth
