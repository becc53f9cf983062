#pragma once

#include <vector>

#include "pmf/core/rng.hpp"
#include "pmf/core/types.hpp"

namespace pmf::wss {

struct LabeledPoint {
  int x = 0;
  int y = 0;
  int label = 0;  // 1 foreground, 0 background
  friend bool operator==(const LabeledPoint&, const LabeledPoint&) = default;
};

struct PointLabels {
  std::vector<LabeledPoint> points;  // Z foreground first, then Z background
  int Z = 0;
};

/// Foreground = the Z most activated pixels, background = the Z least
/// activated, under one total order (activation, then a random key per pixel
/// drawn from `rng`) so the two sets never overlap.
/// Throws PatchTooSmallError when the patch has fewer than 2Z pixels and
/// UninformativeActivationError when the activation is constant.
PointLabels sample_points(const Grid<float>& activation, int Z, RngStream& rng);

}  // namespace pmf::wss
