#pragma once

#include <optional>
#include <span>
#include <vector>

#include "pmf/core/config.hpp"
#include "pmf/core/matrix.hpp"

namespace pmf::ovc {

/// Class text embeddings, a learnable background embedding and the linear
/// embedding head applied to region features.
struct EmbeddingSpace {
  std::vector<int> category_ids;
  Matrix class_embeddings;         // C x d
  std::vector<double> background;  // d
  Matrix head;                     // d x region_dim

  int dim() const noexcept { return class_embeddings.cols(); }
  int num_classes() const noexcept { return class_embeddings.rows(); }
  int region_dim() const noexcept { return head.cols(); }
  void validate() const;
  int index_of(int category_id) const;
  std::vector<double> embed(std::span<const double> region) const;
};

/// Softmax with max subtraction.
std::vector<double> stable_softmax(std::span<const double> logits);

/// Logits [bg, c_1, ..., c_C] = h_emb(r) . {bg, c_j}.
std::vector<double> class_logits(const EmbeddingSpace& space, std::span<const double> region);

/// Probabilities over {bg} U classes, background first.
std::vector<double> region_class_probs(const EmbeddingSpace& space, std::span<const double> region);

struct ClassifyOptions {
  double bg_weight = 0.2;
  BgWeightMode mode = BgWeightMode::kLogit;
};

/// Argmax over the background and the classes in `vocabulary`. In logit mode
/// log(bg_weight) is added to the background logit first; in loss mode the
/// weight only affects training. Returns nullopt when background wins.
/// Throws InvalidArgument on an empty vocabulary or unknown category.
std::optional<int> classify_region(const EmbeddingSpace& space, std::span<const double> region,
                                   std::span<const int> vocabulary, const ClassifyOptions& options = {});

}  // namespace pmf::ovc
