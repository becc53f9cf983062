#include "pmf/core/types.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "pmf/core/activation.hpp"
#include "pmf/core/parallel.hpp"

namespace pmf {

std::size_t count_set(const BinaryGrid& grid) {
  return static_cast<std::size_t>(
      std::count_if(grid.values().begin(), grid.values().end(), [](std::uint8_t v) { return v != 0; }));
}

double iou(const BBox& a, const BBox& b) noexcept {
  const double ix = std::min(a.x2(), b.x2()) - std::max(a.x, b.x);
  const double iy = std::min(a.y2(), b.y2()) - std::max(a.y, b.y);
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

BBox clip_box(const BBox& box, int image_height, int image_width) noexcept {
  const double x0 = std::clamp(box.x, 0.0, static_cast<double>(image_width));
  const double y0 = std::clamp(box.y, 0.0, static_cast<double>(image_height));
  const double x1 = std::clamp(box.x2(), 0.0, static_cast<double>(image_width));
  const double y1 = std::clamp(box.y2(), 0.0, static_cast<double>(image_height));
  return {x0, y0, std::max(0.0, x1 - x0), std::max(0.0, y1 - y0)};
}

namespace {
int round_half_up(double v) noexcept { return static_cast<int>(std::floor(v + 0.5)); }
}  // namespace

PixelRect rasterize(const BBox& box, int image_height, int image_width) noexcept {
  PixelRect r;
  r.x0 = std::clamp(round_half_up(box.x), 0, image_width);
  r.y0 = std::clamp(round_half_up(box.y), 0, image_height);
  r.x1 = std::clamp(round_half_up(box.x2()), 0, image_width);
  r.y1 = std::clamp(round_half_up(box.y2()), 0, image_height);
  return r;
}

BBox to_box(const PixelRect& rect) noexcept {
  return {static_cast<double>(rect.x0), static_cast<double>(rect.y0),
          static_cast<double>(rect.width()), static_cast<double>(rect.height())};
}

BBox mask_bounding_box(const BinaryMask& mask) {
  int x0 = mask.width(), y0 = mask.height(), x1 = -1, y1 = -1;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.at(y, x)) continue;
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x);
      y1 = std::max(y1, y);
    }
  }
  if (x1 < 0) return {};
  return {static_cast<double>(x0), static_cast<double>(y0), static_cast<double>(x1 - x0 + 1),
          static_cast<double>(y1 - y0 + 1)};
}

double mask_iou(const BinaryMask& a, const BinaryMask& b) {
  if (!a.same_shape(b)) throw ShapeError("mask_iou: masks differ in size");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool pa = a[i] != 0, pb = b[i] != 0;
    inter += (pa && pb) ? 1 : 0;
    uni += (pa || pb) ? 1 : 0;
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

ImageGrid::ImageGrid(int height, int width, std::vector<float> rgb)
    : height_(height), width_(width), data_(std::move(rgb)) {
  if (height <= 0 || width <= 0) throw InvalidArgument("image dimensions must be positive");
  if (data_.size() != static_cast<std::size_t>(height) * width * kChannels) {
    throw ShapeError("image payload size does not match dimensions");
  }
  std::array<double, 3> sum{0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < data_.size(); ++i) {
    const float v = data_[i];
    if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
      throw InvalidArgument("image intensity outside [0,1] at element " + std::to_string(i));
    }
    sum[i % kChannels] += v;
  }
  const double n = static_cast<double>(height) * width;
  for (int c = 0; c < kChannels; ++c) mean_[c] = sum[c] / n;
}

ImageGrid ImageGrid::filled(int height, int width, const Rgb& color) {
  std::vector<float> data(static_cast<std::size_t>(height) * width * kChannels);
  for (std::size_t i = 0; i < data.size(); ++i) data[i] = color[i % kChannels];
  return ImageGrid(height, width, std::move(data));
}

ImageGrid ImageGrid::crop(const PixelRect& rect) const {
  if (rect.empty() || rect.x0 < 0 || rect.y0 < 0 || rect.x1 > width_ || rect.y1 > height_) {
    throw ShapeError("crop rectangle is empty or outside the image");
  }
  std::vector<float> out;
  out.reserve(static_cast<std::size_t>(rect.area()) * kChannels);
  for (int y = rect.y0; y < rect.y1; ++y) {
    const auto row = data_.begin() + (static_cast<std::ptrdiff_t>(y) * width_ + rect.x0) * kChannels;
    out.insert(out.end(), row, row + static_cast<std::ptrdiff_t>(rect.width()) * kChannels);
  }
  return ImageGrid(rect.height(), rect.width(), std::move(out));
}

ImageGrid ImageGrid::with_pixels_replaced(const BinaryMask& mask, const Rgb& fill) const {
  if (mask.height() != height_ || mask.width() != width_) {
    throw ShapeError("replacement mask does not match image size");
  }
  std::vector<float> out = data_;
  for (std::size_t p = 0; p < mask.size(); ++p) {
    if (!mask[p]) continue;
    for (int c = 0; c < kChannels; ++c) out[p * kChannels + c] = fill[c];
  }
  return ImageGrid(height_, width_, std::move(out));
}


void ActivationMap::validate() const {
  for (const float v : values.values()) {
    if (!std::isfinite(v) || v < 0.0f) {
      throw InvalidArgument("activation map for category " + std::to_string(category_id) +
                            " has a negative or non-finite entry");
    }
  }
}

int default_workers() {
  if (const char* env = std::getenv("PMF_WORKERS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 1;
}

}  // namespace pmf
