#include "pmf/vlm/aligned.hpp"

#include <algorithm>
#include <cmath>

namespace pmf::vlm {

int AlignedVlm::token_of(int category_id) const {
  const auto it = std::find(category_ids.begin(), category_ids.end(), category_id);
  if (it == category_ids.end()) throw InvalidArgument("category " + std::to_string(category_id) + " has no token");
  return 2 + static_cast<int>(it - category_ids.begin());
}

AlignedVlm build_aligned_vlm(const synth::SceneCategories& categories, int layers, int downsample,
                             std::uint64_t seed) {
  if (layers < 1) throw InvalidArgument("aligned VLM needs at least one layer");
  if (downsample < 1) throw InvalidArgument("downsample must be positive");
  AlignedVlm model;
  model.downsample = downsample;
  model.seed = seed;
  for (const auto& c : categories.table.entries()) {
    const auto& style = categories.style(c.id);
    model.category_ids.push_back(c.id);
    model.body.push_back(style.body);
    model.accent.push_back(style.accent);
  }
  const int num = static_cast<int>(model.category_ids.size());
  const int d = std::max(16, num + 1);
  const double text_gain = 4.0;
  const double key_gain = 10.0;

  VlmParams& p = model.params;
  p.dim = d;
  Matrix color_projection = Matrix::identity(d);
  color_projection(0, 0) = 0.0;
  for (int l = 0; l < layers; ++l) {
    p.layers.push_back({color_projection, Matrix::identity(d, key_gain), Matrix::identity(d)});
  }
  p.similarity_weights.assign(static_cast<std::size_t>(d), 0.0);
  p.similarity_weights[0] = 1.0;
  p.similarity_bias = 0.0;
  p.token_embeddings = Matrix(2 + num, d);
  for (int k = 0; k < num; ++k) p.token_embeddings(2 + k, 1 + k) = text_gain;
  p.validate();
  return model;
}

namespace {

bool matches(const Rgb& pixel, const Rgb& color, double tolerance) {
  for (int c = 0; c < 3; ++c) {
    if (std::abs(static_cast<double>(pixel[c]) - color[c]) > tolerance) return false;
  }
  return true;
}

}  // namespace

FeatureGrid encode_image(const AlignedVlm& model, const ImageGrid& image) {
  const int ds = model.downsample;
  FeatureGrid f;
  f.downsample = ds;
  f.grid_height = (image.height() + ds - 1) / ds;
  f.grid_width = (image.width() + ds - 1) / ds;
  const int d = model.params.dim;
  const int num = static_cast<int>(model.category_ids.size());
  f.regions = Matrix(f.grid_height * f.grid_width, d);
  for (int gy = 0; gy < f.grid_height; ++gy) {
    for (int gx = 0; gx < f.grid_width; ++gx) {
      const int cell = gy * f.grid_width + gx;
      std::vector<double> body(static_cast<std::size_t>(num), 0.0), accent(static_cast<std::size_t>(num), 0.0);
      int pixels = 0;
      for (int y = gy * ds; y < std::min((gy + 1) * ds, image.height()); ++y) {
        for (int x = gx * ds; x < std::min((gx + 1) * ds, image.width()); ++x) {
          ++pixels;
          const Rgb px = image.pixel(y, x);
          for (int k = 0; k < num; ++k) {
            if (matches(px, model.accent[k], model.color_tolerance)) {
              accent[k] += 1.0;
              break;
            }
            if (matches(px, model.body[k], model.color_tolerance)) {
              body[k] += 1.0;
              break;
            }
          }
        }
      }
      auto row = f.regions.row(cell);
      double objectness = 0.0;
      for (int k = 0; k < num; ++k) {
        const double bf = body[k] / pixels, af = accent[k] / pixels;
        row[1 + k] = model.body_response * bf + model.accent_response * af;
        objectness += bf + af;
      }
      row[0] = objectness;
      RngStream rng(model.seed, "vlm.region_noise", static_cast<std::uint64_t>(cell));
      for (int j = 0; j < d; ++j) row[j] += rng.normal(0.0, model.noise);
    }
  }
  f.validate();
  return f;
}

TextSeq caption_tokens(const AlignedVlm& model, std::span<const int> label_ids, int object_category) {
  std::vector<int> tokens{kClsToken};
  int object_index = -1;
  for (const int id : label_ids) {
    if (id == object_category) object_index = static_cast<int>(tokens.size());
    tokens.push_back(model.token_of(id));
  }
  tokens.push_back(kSepToken);
  if (object_index < 0) {
    throw InvalidArgument("object category " + std::to_string(object_category) + " is not in the caption");
  }
  return model.params.embed_tokens(std::move(tokens), object_index);
}

ActivationMap aligned_activation(const AlignedVlm& model, const ImageGrid& image,
                                 std::span<const int> label_ids, int object_category, int layer) {
  const FeatureGrid features = encode_image(model, image);
  const TextSeq text = caption_tokens(model, label_ids, object_category);
  return gradcam(model.params, features, text, layer, object_category);
}

}  // namespace pmf::vlm
