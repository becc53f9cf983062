#include "pmf/boxselect/boxselect.hpp"

#include <cmath>

namespace pmf::boxselect {

namespace {

template <typename T>
std::vector<double> build_table(const Grid<T>& g) {
  const int H = g.height(), W = g.width();
  const std::size_t s = static_cast<std::size_t>(W + 1);
  std::vector<double> t(static_cast<std::size_t>(H + 1) * s, 0.0);
  for (int y = 0; y < H; ++y) {
    double row = 0.0;
    for (int x = 0; x < W; ++x) {
      row += static_cast<double>(g.at(y, x));
      t[(y + 1) * s + (x + 1)] = t[y * s + (x + 1)] + row;
    }
  }
  return t;
}

template <typename T>
PseudoBox select(std::span<const BBox> candidates, const Grid<T>& guidance) {
  if (candidates.empty()) throw InvalidArgument("select_pseudo_box: no candidates");
  bool any = false;
  for (const auto v : guidance.values()) {
    if (v > 0) {
      any = true;
      break;
    }
  }
  if (!any) throw NoActivationError("select_pseudo_box: guidance map has no activated pixel");
  const IntegralImage integral(guidance);
  PseudoBox best;
  bool have = false;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const BBox& b = candidates[i];
    if (!b.valid()) continue;
    const double score = coverage_score(integral, b);
    const bool better = !have || score > best.score || (score == best.score && b.area() < best.box.area());
    if (better) {
      best.box = b;
      best.score = score;
      best.index = i;
      have = true;
    }
  }
  if (!have) throw InvalidArgument("select_pseudo_box: every candidate has zero area");
  return best;
}

}  // namespace

IntegralImage::IntegralImage(const BinaryGrid& bits)
    : height_(bits.height()), width_(bits.width()), table_(build_table(bits)) {}

IntegralImage::IntegralImage(const Grid<float>& values)
    : height_(values.height()), width_(values.width()), table_(build_table(values)) {}

double IntegralImage::sum(const PixelRect& r) const {
  if (r.empty()) return 0.0;
  const std::size_t s = static_cast<std::size_t>(width_ + 1);
  return table_[r.y1 * s + r.x1] - table_[r.y0 * s + r.x1] - table_[r.y1 * s + r.x0] + table_[r.y0 * s + r.x0];
}

double coverage_score(const IntegralImage& guidance, const BBox& box) {
  const PixelRect r = rasterize(box, guidance.height(), guidance.width());
  return guidance.sum(r) / std::sqrt(box.w * box.h);
}

PseudoBox select_pseudo_box(std::span<const BBox> candidates, const BinaryGrid& guidance) {
  return select(candidates, guidance);
}

PseudoBox select_pseudo_box(std::span<const BBox> candidates, const Grid<float>& guidance) {
  return select(candidates, guidance);
}

}  // namespace pmf::boxselect
