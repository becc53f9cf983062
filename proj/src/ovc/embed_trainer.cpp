#include "pmf/ovc/embed_trainer.hpp"

#include <cmath>
#include <numeric>

#include "pmf/core/sgd.hpp"

namespace pmf::ovc {

std::vector<ClassEmbedding> toy_text_embeddings(std::span<const int> category_ids, int dim, std::uint64_t seed) {
  if (dim < 1) throw InvalidArgument("embedding dimension must be positive");
  std::vector<ClassEmbedding> out;
  for (const int id : category_ids) {
    RngStream rng(seed, "ovc.text_embedding", static_cast<std::uint64_t>(id));
    ClassEmbedding e{id, std::vector<double>(static_cast<std::size_t>(dim))};
    double norm = 0.0;
    for (auto& v : e.vector) {
      v = rng.normal();
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (auto& v : e.vector) v /= norm;
    out.push_back(std::move(e));
  }
  return out;
}

EmbeddingSpace make_space(const std::vector<ClassEmbedding>& classes, int region_dim, RngStream& rng) {
  if (classes.empty()) throw InvalidArgument("make_space: no class embeddings");
  const int d = static_cast<int>(classes.front().vector.size());
  EmbeddingSpace s;
  s.class_embeddings = Matrix(static_cast<int>(classes.size()), d);
  for (std::size_t c = 0; c < classes.size(); ++c) {
    if (static_cast<int>(classes[c].vector.size()) != d) throw ShapeError("make_space: embedding sizes differ");
    s.category_ids.push_back(classes[c].category_id);
    std::copy(classes[c].vector.begin(), classes[c].vector.end(), s.class_embeddings.row(static_cast<int>(c)).begin());
  }
  s.background.assign(static_cast<std::size_t>(d), 0.0);
  s.head = Matrix(d, region_dim);
  const double sd = 1.0 / std::sqrt(static_cast<double>(region_dim));
  for (auto& v : s.head.data()) v = rng.normal(0.0, sd);
  s.validate();
  return s;
}

namespace {

double sample_weight(const EmbedSample& s, const ClassifyOptions& options) {
  return s.target < 0 && options.mode == BgWeightMode::kLoss ? options.bg_weight : 1.0;
}

void check_target(const EmbeddingSpace& space, const EmbedSample& s) {
  if (s.target < -1 || s.target >= space.num_classes()) throw InvalidArgument("embedding sample target out of range");
}

}  // namespace

double embed_loss(const EmbeddingSpace& space, std::span<const EmbedSample> samples, const ClassifyOptions& options) {
  if (samples.empty()) throw InvalidArgument("embed_loss: no samples");
  double loss = 0.0;
  for (const auto& s : samples) {
    check_target(space, s);
    const auto p = region_class_probs(space, s.region);
    loss -= sample_weight(s, options) * std::log(std::max(p[static_cast<std::size_t>(s.target + 1)], 1e-300));
  }
  return loss / static_cast<double>(samples.size());
}

EmbeddingSpace embed_loss_gradient(const EmbeddingSpace& space, std::span<const EmbedSample> samples,
                                   const ClassifyOptions& options) {
  if (samples.empty()) throw InvalidArgument("embed_loss_gradient: no samples");
  EmbeddingSpace g = space;
  std::fill(g.head.data().begin(), g.head.data().end(), 0.0);
  std::fill(g.background.begin(), g.background.end(), 0.0);
  std::fill(g.class_embeddings.data().begin(), g.class_embeddings.data().end(), 0.0);
  const int d = space.dim(), C = space.num_classes();
  const double inv = 1.0 / static_cast<double>(samples.size());
  for (const auto& s : samples) {
    check_target(space, s);
    const auto e = space.embed(s.region);
    const auto p = region_class_probs(space, s.region);
    const double w = inv * sample_weight(s, options);
    std::vector<double> de(static_cast<std::size_t>(d), 0.0);
    for (int j = 0; j <= C; ++j) {
      const double dl = w * (p[j] - (j == s.target + 1 ? 1.0 : 0.0));
      const auto emb = j == 0 ? std::span<const double>(space.background) : space.class_embeddings.row(j - 1);
      for (int k = 0; k < d; ++k) de[k] += dl * emb[k];
      if (j == 0) {
        for (int k = 0; k < d; ++k) g.background[k] += dl * e[k];
      }
    }
    for (int k = 0; k < d; ++k) {
      auto row = g.head.row(k);
      for (std::size_t r = 0; r < s.region.size(); ++r) row[r] += de[k] * s.region[r];
    }
  }
  return g;
}

EmbedTrainResult train_embedding_head(std::span<const EmbedSample> samples, EmbeddingSpace space,
                                      const TrainSchedule& schedule, const ClassifyOptions& options, RngStream& rng) {
  if (samples.empty()) throw InvalidArgument("train_embedding_head: no samples");
  space.validate();
  constexpr std::size_t kBatch = 32;
  EmbedTrainResult result;
  MomentumSgd sgd(schedule);
  std::vector<std::size_t> order(samples.size());
  std::size_t cursor = order.size();
  std::vector<EmbedSample> batch;
  for (int it = 0; it < schedule.iters; ++it) {
    batch.clear();
    while (batch.size() < std::min(kBatch, samples.size())) {
      if (cursor == order.size()) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        rng.shuffle(std::span<std::size_t>(order));
        cursor = 0;
      }
      batch.push_back(samples[order[cursor++]]);
    }
    result.loss_curve.push_back(embed_loss(space, batch, options));
    const EmbeddingSpace g = embed_loss_gradient(space, batch, options);
    sgd.step({{space.head.data(), g.head.data(), true}, {space.background, g.background, false}});
  }
  result.space = std::move(space);
  return result;
}

}  // namespace pmf::ovc
