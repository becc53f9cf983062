#pragma once

#include <string>

#include "pmf/core/types.hpp"

namespace pmf {

/// Binary PPM (P6, maxval 255). Intensities are stored as round(v*255).
void write_ppm(const std::string& path, const ImageGrid& image);
ImageGrid read_ppm(const std::string& path);

/// Rounds every intensity to the nearest k/255 so a PPM round trip is exact.
ImageGrid quantize_8bit(const ImageGrid& image);

}  // namespace pmf
