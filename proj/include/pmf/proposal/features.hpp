#pragma once

#include <span>
#include <vector>

#include "pmf/core/matrix.hpp"
#include "pmf/core/types.hpp"

namespace pmf::proposal {

inline constexpr int kBoxFeatureDim = 26;

/// Fixed (non-learned) pooled box descriptor standing in for RoI features.
/// Per-pixel channels R, G, B, gradient magnitude and saturation are summed
/// with integral images; each box is described by inside/ring means, their
/// difference, border-band gradient, color spread, border color contrast and
/// log size/aspect.
class BoxFeatureExtractor {
 public:
  explicit BoxFeatureExtractor(const ImageGrid& image);

  std::vector<double> operator()(const BBox& box) const;
  /// One row per box.
  Matrix extract(std::span<const BBox> boxes) const;

 private:
  static constexpr int kChannels = 8;  // R, G, B, grad, sat, R^2, G^2, B^2

  double sum(int channel, const PixelRect& r) const;
  std::vector<double> sums(const PixelRect& r) const;

  int height_ = 0;
  int width_ = 0;
  std::vector<double> integral_;  // kChannels planes of (H+1)x(W+1)
};

/// Per-column z-scoring fitted on training features.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> stddev;

  static Standardizer fit(std::span<const Matrix> blocks);
  static Standardizer identity(int dim);
  Matrix apply(const Matrix& features) const;
};

}  // namespace pmf::proposal
