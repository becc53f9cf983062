#pragma once

#include "pmf/core/types.hpp"

namespace pmf {

/// Non-negative per-category score grid at feature resolution.
struct ActivationMap {
  int category_id = 0;
  int iteration = 0;  // masking step that produced it (0 = unmasked image)
  Grid<float> values;

  int height() const noexcept { return values.height(); }
  int width() const noexcept { return values.width(); }

  /// Throws InvalidArgument on negative or non-finite entries.
  void validate() const;
  friend bool operator==(const ActivationMap&, const ActivationMap&) = default;
};

}  // namespace pmf
