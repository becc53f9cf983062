#pragma once

#include <string>

#include "pmf/synth/synth.hpp"

namespace pmf::synth {

/// Dataset directory layout:
///   images/img_NNNNN.ppm   8-bit RGB images
///   annotations.json       ground-truth instances (boxes + RLE masks)
///   labels.json            image-level labels only
///   scene_meta.json        category styles and per-instance oracle parts
void write_dataset(const std::string& dir, const Dataset& dataset);

/// Rebuilds the scenes from a dataset directory. Throws InvalidArgument with
/// the missing path when a file is absent.
Dataset read_dataset(const std::string& dir);

ImageGrid load_image(const std::string& dir, const ImageRecord& record);

std::string images_dir(const std::string& dir);
std::string annotations_path(const std::string& dir);
std::string labels_path(const std::string& dir);
std::string scene_meta_path(const std::string& dir);

}  // namespace pmf::synth
