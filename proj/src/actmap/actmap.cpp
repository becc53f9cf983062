#include "pmf/actmap/actmap.hpp"

#include <algorithm>
#include <cmath>

namespace pmf::actmap {

Grid<float> max_normalize(const ActivationMap& map) {
  map.validate();
  Grid<float> out(map.height(), map.width(), 0.0f);
  float peak = 0.0f;
  for (const float v : map.values.values()) peak = std::max(peak, v);
  if (peak <= 0.0f) return out;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = map.values[i] / peak;
  return out;
}

BinaryGrid normalize_threshold(const ActivationMap& map, double threshold) {
  const Grid<float> norm = max_normalize(map);
  BinaryGrid bits(norm.height(), norm.width(), 0);
  for (std::size_t i = 0; i < norm.size(); ++i) {
    bits[i] = norm[i] > 0.0f && static_cast<double>(norm[i]) >= threshold ? 1 : 0;
  }
  return bits;
}

namespace {

void check_target(const char* what, int h, int w, int th, int tw) {
  if (th <= 0 || tw <= 0) throw InvalidArgument(std::string(what) + ": target size must be positive");
  if (h <= 0 || w <= 0) throw ShapeError(std::string(what) + ": source grid is empty");
}

struct Tap {
  int i0, i1;
  double frac;
};

// Half-pixel-centre sampling (corners not aligned).
std::vector<Tap> bilinear_taps(int in, int out) {
  std::vector<Tap> taps(static_cast<std::size_t>(out));
  const double scale = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in - 1));
    const int i0 = static_cast<int>(std::floor(src));
    const int i1 = std::min(i0 + 1, in - 1);
    taps[o] = {i0, i1, src - i0};
  }
  return taps;
}

template <typename T>
Grid<float> resample(const Grid<T>& grid, int th, int tw, UpsampleMode mode) {
  Grid<float> out(th, tw, 0.0f);
  const int h = grid.height(), w = grid.width();
  if (mode == UpsampleMode::kNearest) {
    for (int y = 0; y < th; ++y) {
      const int sy = static_cast<int>(static_cast<long long>(y) * h / th);
      for (int x = 0; x < tw; ++x) {
        const int sx = static_cast<int>(static_cast<long long>(x) * w / tw);
        out.at(y, x) = static_cast<float>(grid.at(sy, sx));
      }
    }
    return out;
  }
  const auto ty = bilinear_taps(h, th), tx = bilinear_taps(w, tw);
  for (int y = 0; y < th; ++y) {
    const Tap& a = ty[y];
    for (int x = 0; x < tw; ++x) {
      const Tap& b = tx[x];
      const double top = (1.0 - b.frac) * grid.at(a.i0, b.i0) + b.frac * grid.at(a.i0, b.i1);
      const double bottom = (1.0 - b.frac) * grid.at(a.i1, b.i0) + b.frac * grid.at(a.i1, b.i1);
      out.at(y, x) = static_cast<float>((1.0 - a.frac) * top + a.frac * bottom);
    }
  }
  return out;
}

}  // namespace

Grid<float> upsample(const Grid<float>& grid, int target_height, int target_width, UpsampleMode mode) {
  check_target("upsample", grid.height(), grid.width(), target_height, target_width);
  return resample(grid, target_height, target_width, mode);
}

BinaryGrid upsample(const BinaryGrid& grid, int target_height, int target_width, UpsampleMode mode) {
  check_target("upsample", grid.height(), grid.width(), target_height, target_width);
  const Grid<float> values = resample(grid, target_height, target_width, mode);
  BinaryGrid out(target_height, target_width, 0);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = values[i] >= 0.5f ? 1 : 0;
  return out;
}

BinaryGrid GuidanceMap::pixel_bits(int image_height, int image_width) const {
  return upsample(bits, image_height, image_width, upsample_mode);
}

Grid<float> GuidanceMap::pixel_soft(int image_height, int image_width, UpsampleMode mode) const {
  return upsample(soft, image_height, image_width, mode);
}

ImageGrid mask_image(const ImageGrid& image, const BinaryGrid& bits, const Rgb& fill, UpsampleMode mode) {
  return image.with_pixels_replaced(upsample(bits, image.height(), image.width(), mode), fill);
}

namespace {

void accumulate(GuidanceMap& g, ActivationMap map, const BinaryGrid& bits) {
  const Grid<float> norm = max_normalize(map);
  if (g.maps.empty()) {
    g.bits = BinaryGrid(bits.height(), bits.width(), 0);
    g.soft = Grid<float>(bits.height(), bits.width(), 0.0f);
  } else if (!g.bits.same_shape(bits)) {
    throw ShapeError("activation maps of one object differ in grid size");
  }
  bool contributed = false;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] && !g.bits[i]) contributed = true;
    g.bits[i] = g.bits[i] | bits[i];
    g.soft[i] = std::max(g.soft[i], norm[i]);
  }
  if (contributed) g.contributing_iterations.push_back(map.iteration);
  g.maps.push_back(std::move(map));
}

}  // namespace

GuidanceMap iterative_masking(const VlmEval& vlm_eval, const ImageGrid& image, int G, double threshold,
                              UpsampleMode mode) {
  if (G < 0) throw InvalidArgument("iterative_masking: G must be >= 0");
  const auto& mean = image.mean_pixel();
  const Rgb fill{static_cast<float>(mean[0]), static_cast<float>(mean[1]), static_cast<float>(mean[2])};
  GuidanceMap g;
  g.upsample_mode = mode;
  ImageGrid current = image;
  for (int i = 0; i <= G; ++i) {
    ActivationMap map = vlm_eval(current, i);
    map.iteration = i;
    const BinaryGrid bits = normalize_threshold(map, threshold);
    accumulate(g, std::move(map), bits);
    if (i < G) current = mask_image(current, bits, fill, mode);
  }
  return g;
}

GuidanceMap guidance_from_maps(std::vector<ActivationMap> maps, double threshold, UpsampleMode mode) {
  if (maps.empty()) throw InvalidArgument("guidance_from_maps: no activation maps");
  GuidanceMap g;
  g.upsample_mode = mode;
  for (std::size_t i = 0; i < maps.size(); ++i) {
    maps[i].iteration = static_cast<int>(i);
    const BinaryGrid bits = normalize_threshold(maps[i], threshold);
    accumulate(g, std::move(maps[i]), bits);
  }
  return g;
}

}  // namespace pmf::actmap
