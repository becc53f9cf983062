#pragma once

#include <cstddef>
#include <span>

#include "pmf/core/annotations.hpp"
#include "pmf/core/types.hpp"

namespace pmf::boxselect {

struct PseudoBox {
  BBox box;
  int category_id = 0;
  double score = 0.0;      // guidance sum inside the box / sqrt(w*h)
  std::size_t index = 0;   // position in the candidate list
  Provenance provenance;
};

/// Summed-area table over a pixel grid.
class IntegralImage {
 public:
  explicit IntegralImage(const BinaryGrid& bits);
  explicit IntegralImage(const Grid<float>& values);

  double sum(const PixelRect& r) const;
  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> table_;
};

/// Coverage score of one candidate: rasterized (half-up) box sum divided by
/// the square root of the continuous area w*h.
double coverage_score(const IntegralImage& guidance, const BBox& box);

/// argmax over candidates of coverage_score. Ties go to the smaller area,
/// then the lower index. Throws InvalidArgument on an empty candidate list
/// and NoActivationError when the guidance has no positive pixel.
PseudoBox select_pseudo_box(std::span<const BBox> candidates, const BinaryGrid& guidance);

/// Same rule over a soft (non-binary) guidance map.
PseudoBox select_pseudo_box(std::span<const BBox> candidates, const Grid<float>& guidance);

}  // namespace pmf::boxselect
