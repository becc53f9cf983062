#pragma once

#include <cstdint>
#include <vector>

#include "pmf/core/types.hpp"

namespace pmf {

/// Uncompressed COCO run-length encoding: column-major scan, counts alternate
/// zeros/ones starting with a (possibly empty) run of zeros.
struct Rle {
  int height = 0;
  int width = 0;
  std::vector<std::uint32_t> counts;

  friend bool operator==(const Rle&, const Rle&) = default;
};

Rle rle_encode(const BinaryMask& mask);
/// Throws FormatError when the counts do not sum to height*width.
BinaryMask rle_decode(const Rle& rle);

std::uint64_t rle_area(const Rle& rle);
/// Number of pixels set in both masks, computed directly on the runs.
std::uint64_t rle_intersection(const Rle& a, const Rle& b);
double rle_iou(const Rle& a, const Rle& b);

}  // namespace pmf
