#pragma once

#include <functional>
#include <vector>

#include "pmf/core/activation.hpp"
#include "pmf/core/config.hpp"
#include "pmf/core/types.hpp"

namespace pmf::actmap {

/// Values divided by the map maximum; all zeros when the maximum is not
/// positive.
Grid<float> max_normalize(const ActivationMap& map);

/// Bit set iff the max-normalized value is >= threshold. An all-zero map
/// yields an all-false grid.
BinaryGrid normalize_threshold(const ActivationMap& map, double threshold);

Grid<float> upsample(const Grid<float>& grid, int target_height, int target_width, UpsampleMode mode);

/// Nearest mode replicates bits; bilinear mode interpolates the 0/1 values
/// and keeps pixels >= 0.5.
BinaryGrid upsample(const BinaryGrid& grid, int target_height, int target_width, UpsampleMode mode);

/// Union of thresholded maps over masking iterations 0..G.
struct GuidanceMap {
  BinaryGrid bits;                         // feature resolution
  Grid<float> soft;                        // elementwise max of normalized maps
  std::vector<int> contributing_iterations;
  std::vector<ActivationMap> maps;         // one per iteration, in order
  UpsampleMode upsample_mode = UpsampleMode::kNearest;

  int height() const noexcept { return bits.height(); }
  int width() const noexcept { return bits.width(); }
  BinaryGrid pixel_bits(int image_height, int image_width) const;
  Grid<float> pixel_soft(int image_height, int image_width, UpsampleMode mode) const;
};

/// Activation source evaluated on the (possibly masked) image for a given
/// iteration.
using VlmEval = std::function<ActivationMap(const ImageGrid& image, int iteration)>;

/// Image with every pixel under the upsampled bits replaced by `fill`.
ImageGrid mask_image(const ImageGrid& image, const BinaryGrid& bits, const Rgb& fill, UpsampleMode mode);

/// Iteration 0 sees the unmodified image; iteration i > 0 sees the image of
/// iteration i-1 with the pixels under that iteration's set bits replaced by
/// the original image's mean pixel. The input image is never mutated.
GuidanceMap iterative_masking(const VlmEval& vlm_eval, const ImageGrid& image, int G, double threshold,
                              UpsampleMode mode = UpsampleMode::kNearest);

/// Same union computed from precomputed per-iteration maps.
GuidanceMap guidance_from_maps(std::vector<ActivationMap> maps, double threshold,
                               UpsampleMode mode = UpsampleMode::kNearest);

}  // namespace pmf::actmap
