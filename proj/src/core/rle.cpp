#include "pmf/core/rle.hpp"

#include <algorithm>
#include <numeric>

namespace pmf {

Rle rle_encode(const BinaryMask& mask) {
  if (mask.height() <= 0 || mask.width() <= 0) throw InvalidArgument("rle_encode: empty mask");
  Rle rle{mask.height(), mask.width(), {}};
  std::uint8_t current = 0;
  std::uint32_t run = 0;
  for (int x = 0; x < mask.width(); ++x) {
    for (int y = 0; y < mask.height(); ++y) {
      const std::uint8_t bit = mask.at(y, x) ? 1 : 0;
      if (bit != current) {
        rle.counts.push_back(run);
        run = 0;
        current = bit;
      }
      ++run;
    }
  }
  rle.counts.push_back(run);
  return rle;
}

BinaryMask rle_decode(const Rle& rle) {
  if (rle.height <= 0 || rle.width <= 0) throw FormatError("rle_decode: non-positive size");
  const std::uint64_t total =
      std::accumulate(rle.counts.begin(), rle.counts.end(), std::uint64_t{0});
  const std::uint64_t expected = static_cast<std::uint64_t>(rle.height) * rle.width;
  if (total != expected) {
    throw FormatError("rle_decode: counts sum to " + std::to_string(total) + ", expected " +
                      std::to_string(expected));
  }
  BinaryMask mask(rle.height, rle.width, 0);
  std::uint64_t pos = 0;
  std::uint8_t bit = 0;
  for (const std::uint32_t count : rle.counts) {
    if (bit) {
      for (std::uint64_t k = pos; k < pos + count; ++k) {
        const int x = static_cast<int>(k / rle.height);
        const int y = static_cast<int>(k % rle.height);
        mask.at(y, x) = 1;
      }
    }
    pos += count;
    bit ^= 1;
  }
  return mask;
}

std::uint64_t rle_area(const Rle& rle) {
  std::uint64_t area = 0;
  for (std::size_t i = 1; i < rle.counts.size(); i += 2) area += rle.counts[i];
  return area;
}

std::uint64_t rle_intersection(const Rle& a, const Rle& b) {
  if (a.height != b.height || a.width != b.width) throw ShapeError("rle_intersection: size mismatch");
  // Sweep both run lists in lockstep over the shared column-major index.
  std::size_t ia = 0, ib = 0;
  std::uint64_t left_a = a.counts.empty() ? 0 : a.counts[0];
  std::uint64_t left_b = b.counts.empty() ? 0 : b.counts[0];
  std::uint64_t inter = 0;
  while (ia < a.counts.size() && ib < b.counts.size()) {
    if (left_a == 0) {
      if (++ia < a.counts.size()) left_a = a.counts[ia];
      continue;
    }
    if (left_b == 0) {
      if (++ib < b.counts.size()) left_b = b.counts[ib];
      continue;
    }
    const std::uint64_t step = std::min(left_a, left_b);
    if ((ia & 1) && (ib & 1)) inter += step;
    left_a -= step;
    left_b -= step;
  }
  return inter;
}

double rle_iou(const Rle& a, const Rle& b) {
  const std::uint64_t inter = rle_intersection(a, b);
  const std::uint64_t uni = rle_area(a) + rle_area(b) - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace pmf
