#include "pmf/ovc/ovclassify.hpp"

#include <algorithm>
#include <cmath>

namespace pmf::ovc {

void EmbeddingSpace::validate() const {
  if (num_classes() < 1 || dim() < 1) throw ShapeError("embedding space is empty");
  if (category_ids.size() != static_cast<std::size_t>(num_classes())) throw ShapeError("category ids do not match embeddings");
  if (background.size() != static_cast<std::size_t>(dim())) throw ShapeError("background embedding has wrong size");
  if (head.rows() != dim() || head.cols() < 1) throw ShapeError("embedding head has wrong shape");
}

int EmbeddingSpace::index_of(int category_id) const {
  const auto it = std::find(category_ids.begin(), category_ids.end(), category_id);
  if (it == category_ids.end()) throw InvalidArgument("category " + std::to_string(category_id) + " has no embedding");
  return static_cast<int>(it - category_ids.begin());
}

std::vector<double> EmbeddingSpace::embed(std::span<const double> region) const {
  if (static_cast<int>(region.size()) != region_dim()) throw ShapeError("region embedding has wrong size");
  return matvec(head, region);
}

std::vector<double> stable_softmax(std::span<const double> logits) {
  if (logits.empty()) return {};
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - mx);
    sum += out[i];
  }
  for (auto& v : out) v /= sum;
  return out;
}

std::vector<double> class_logits(const EmbeddingSpace& space, std::span<const double> region) {
  space.validate();
  const auto e = space.embed(region);
  std::vector<double> logits;
  logits.reserve(static_cast<std::size_t>(space.num_classes()) + 1);
  logits.push_back(dot(e, space.background));
  for (int c = 0; c < space.num_classes(); ++c) logits.push_back(dot(e, space.class_embeddings.row(c)));
  return logits;
}

std::vector<double> region_class_probs(const EmbeddingSpace& space, std::span<const double> region) {
  return stable_softmax(class_logits(space, region));
}

std::optional<int> classify_region(const EmbeddingSpace& space, std::span<const double> region,
                                   std::span<const int> vocabulary, const ClassifyOptions& options) {
  if (vocabulary.empty()) throw InvalidArgument("classify_region: empty vocabulary");
  if (!(options.bg_weight > 0.0)) throw InvalidArgument("classify_region: bg_weight must be positive");
  const auto logits = class_logits(space, region);
  double best = logits[0] + (options.mode == BgWeightMode::kLogit ? std::log(options.bg_weight) : 0.0);
  std::optional<int> winner;
  for (const int id : vocabulary) {
    const double v = logits[static_cast<std::size_t>(space.index_of(id)) + 1];
    if (v > best) {
      best = v;
      winner = id;
    }
  }
  return winner;
}

}  // namespace pmf::ovc
