#pragma once

#include <array>
#include <vector>

#include "pmf/core/config.hpp"
#include "pmf/core/sgd.hpp"
#include "pmf/core/rng.hpp"
#include "pmf/core/types.hpp"
#include "pmf/wss/points.hpp"

namespace pmf::wss {

/// kernel x kernel convolution (odd kernel) with zero "same" padding.
/// weight[((o*in + i)*kernel + ky)*kernel + kx].
struct ConvLayer {
  int in = 0;
  int out = 0;
  int kernel = 3;
  std::vector<double> weight;
  std::vector<double> bias;
};

/// Three-layer per-pixel classifier: conv 3->8, ReLU, conv 8->8, ReLU,
/// conv 8->1, sigmoid. init() uses 1x1 kernels; larger odd kernels set by
/// hand are supported by every routine below.
struct Segmenter {
  std::array<ConvLayer, 3> layers;

  static Segmenter init(RngStream& rng);
  Segmenter zeros_like() const;
  std::vector<ParamRef> parameters(const Segmenter& grad);
};

/// Channel-major RGB patch, each channel standardized to zero mean and unit
/// variance over the patch.
struct PatchInput {
  int height = 0;
  int width = 0;
  std::vector<double> data;  // 3 x height x width

  double at(int c, int y, int x) const {
    return data[(static_cast<std::size_t>(c) * height + y) * width + x];
  }
};

PatchInput standardize_patch(const ImageGrid& patch);

/// Foreground probability for every pixel.
Grid<float> predict(const Segmenter& net, const PatchInput& input);

/// Mean binary cross-entropy over the labeled points. Only the receptive
/// fields of the points are evaluated.
double point_loss(const Segmenter& net, const PatchInput& input, const PointLabels& labels);
Segmenter point_loss_gradient(const Segmenter& net, const PatchInput& input, const PointLabels& labels,
                              double* loss = nullptr);

struct SegPatch {
  Grid<float> probabilities;
  BinaryMask mask;  // probabilities >= 0.5
  std::vector<double> loss_curve;
  double point_accuracy = 0.0;
};

/// Gradient descent on point_loss for schedule.iters steps from a
/// seed-determined initialization, then a dense forward pass.
/// Throws ShapeError when a point lies outside the patch.
SegPatch train_patch_segmenter(const ImageGrid& patch, const PointLabels& labels, const TrainSchedule& schedule,
                               RngStream& rng);

}  // namespace pmf::wss
