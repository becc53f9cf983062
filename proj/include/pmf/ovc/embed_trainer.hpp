#pragma once

#include <span>
#include <vector>

#include "pmf/core/config.hpp"
#include "pmf/core/rng.hpp"
#include "pmf/ovc/cemb_io.hpp"
#include "pmf/ovc/ovclassify.hpp"

namespace pmf::ovc {

/// One region feature vector with its target: a class index into the
/// embedding space, or -1 for background.
struct EmbedSample {
  std::vector<double> region;
  int target = -1;
};

/// Deterministic unit-norm stand-ins for text-encoder class embeddings.
std::vector<ClassEmbedding> toy_text_embeddings(std::span<const int> category_ids, int dim, std::uint64_t seed);

/// Space with fixed class embeddings, zero background and a small random head.
EmbeddingSpace make_space(const std::vector<ClassEmbedding>& classes, int region_dim, RngStream& rng);

/// Mean cross-entropy over {bg} U classes. In loss mode background samples
/// are weighted by bg_weight.
double embed_loss(const EmbeddingSpace& space, std::span<const EmbedSample> samples, const ClassifyOptions& options);

/// Gradient of embed_loss w.r.t. the head and the background embedding; the
/// class embeddings stay frozen. Returned as a space-shaped struct.
EmbeddingSpace embed_loss_gradient(const EmbeddingSpace& space, std::span<const EmbedSample> samples,
                                   const ClassifyOptions& options);

struct EmbedTrainResult {
  EmbeddingSpace space;
  std::vector<double> loss_curve;
};

/// Mini-batch SGD (batch 32, RNG-shuffled epochs).
EmbedTrainResult train_embedding_head(std::span<const EmbedSample> samples, EmbeddingSpace space,
                                      const TrainSchedule& schedule, const ClassifyOptions& options, RngStream& rng);

}  // namespace pmf::ovc
