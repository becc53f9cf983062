#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pmf/synth/synth.hpp"
#include "pmf/vlm/toyvlm.hpp"

namespace pmf::vlm {

/// Frozen toy encoder whose region and text embeddings are constructed so
/// that cells showing the colors of category c align with c's text token.
///
/// Basis vector 0 is an "objectness" direction read by the similarity head;
/// basis vector 1+k is the color prototype of the k-th category. Accent
/// pixels respond more strongly than body pixels, which makes the accent the
/// discriminative part.
struct AlignedVlm {
  VlmParams params;
  std::vector<int> category_ids;
  std::vector<Rgb> body;
  std::vector<Rgb> accent;
  int downsample = 16;
  double color_tolerance = 0.1;
  double body_response = 0.35;
  double accent_response = 1.0;
  double noise = 0.05;
  std::uint64_t seed = 0;

  int token_of(int category_id) const;
};

inline constexpr int kClsToken = 0;
inline constexpr int kSepToken = 1;

AlignedVlm build_aligned_vlm(const synth::SceneCategories& categories, int layers, int downsample,
                             std::uint64_t seed);

FeatureGrid encode_image(const AlignedVlm& model, const ImageGrid& image);

/// [CLS] label tokens [SEP]; the object index points at `object_category`.
TextSeq caption_tokens(const AlignedVlm& model, std::span<const int> label_ids, int object_category);

ActivationMap aligned_activation(const AlignedVlm& model, const ImageGrid& image,
                                 std::span<const int> label_ids, int object_category, int layer);

}  // namespace pmf::vlm
