#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "pmf/core/errors.hpp"

namespace pmf {

/// Dense row-major 2-D grid. Used for activation maps, binary masks and
/// integral images alike.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int height, int width, T fill = T{})
      : height_(height), width_(width), values_(checked_size(height, width), fill) {}
  Grid(int height, int width, std::vector<T> values)
      : height_(height), width_(width), values_(std::move(values)) {
    if (values_.size() != checked_size(height, width)) {
      throw ShapeError("grid payload size does not match " + std::to_string(height) + "x" +
                       std::to_string(width));
    }
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  T& at(int y, int x) { return values_[index(y, x)]; }
  const T& at(int y, int x) const { return values_[index(y, x)]; }
  T& operator[](std::size_t i) { return values_[i]; }
  const T& operator[](std::size_t i) const { return values_[i]; }

  std::span<T> values() noexcept { return values_; }
  std::span<const T> values() const noexcept { return values_; }

  bool same_shape(const Grid& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  static std::size_t checked_size(int height, int width) {
    if (height < 0 || width < 0) throw ShapeError("grid dimensions must be non-negative");
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  }
  std::size_t index(int y, int x) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<T> values_;
};

using BinaryGrid = Grid<std::uint8_t>;
/// Pixel-level binary mask (the pseudo-mask s* and GT masks).
using BinaryMask = Grid<std::uint8_t>;

std::size_t count_set(const BinaryGrid& grid);

using Rgb = std::array<float, 3>;

/// Half-open integer pixel rectangle [x0, x1) x [y0, y1).
struct PixelRect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const noexcept { return x1 - x0; }
  int height() const noexcept { return y1 - y0; }
  long long area() const noexcept {
    return empty() ? 0 : static_cast<long long>(width()) * height();
  }
  bool empty() const noexcept { return x1 <= x0 || y1 <= y0; }
  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

/// Axis-aligned box in pixel units, COCO convention (top-left + size).
struct BBox {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double area() const noexcept { return w * h; }
  double x2() const noexcept { return x + w; }
  double y2() const noexcept { return y + h; }
  double cx() const noexcept { return x + 0.5 * w; }
  double cy() const noexcept { return y + 0.5 * h; }
  bool valid() const noexcept { return w > 0.0 && h > 0.0; }
  friend bool operator==(const BBox&, const BBox&) = default;
};

/// Intersection-over-union. Degenerate overlap yields 0.
double iou(const BBox& a, const BBox& b) noexcept;

/// Box intersected with the image extent [0,width) x [0,height).
BBox clip_box(const BBox& box, int image_height, int image_width) noexcept;

/// Rasterize with half-up rounding of each edge, clipped to the image.
PixelRect rasterize(const BBox& box, int image_height, int image_width) noexcept;

BBox to_box(const PixelRect& rect) noexcept;

/// Tight box around the set pixels of a mask; width/height 0 when empty.
BBox mask_bounding_box(const BinaryMask& mask);

double mask_iou(const BinaryMask& a, const BinaryMask& b);

/// Immutable RGB image, intensities in [0,1], interleaved row-major.
class ImageGrid {
 public:
  static constexpr int kChannels = 3;

  ImageGrid() = default;
  /// Throws InvalidArgument when any value is outside [0,1] or non-finite.
  ImageGrid(int height, int width, std::vector<float> rgb);
  static ImageGrid filled(int height, int width, const Rgb& color);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  bool empty() const noexcept { return data_.empty(); }

  float at(int y, int x, int c) const noexcept {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * kChannels + c];
  }
  Rgb pixel(int y, int x) const noexcept {
    const std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * kChannels;
    return {data_[i], data_[i + 1], data_[i + 2]};
  }
  std::span<const float> data() const noexcept { return data_; }
  /// Per-channel arithmetic mean of the pixel data.
  const std::array<double, 3>& mean_pixel() const noexcept { return mean_; }

  ImageGrid crop(const PixelRect& rect) const;
  /// Copy with every pixel whose mask bit is set replaced by `fill`.
  ImageGrid with_pixels_replaced(const BinaryMask& mask, const Rgb& fill) const;

  friend bool operator==(const ImageGrid& a, const ImageGrid& b) {
    return a.height_ == b.height_ && a.width_ == b.width_ && a.data_ == b.data_;
  }

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<float> data_;
  std::array<double, 3> mean_{0.0, 0.0, 0.0};
};

}  // namespace pmf
