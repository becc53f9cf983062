#pragma once

#include "pmf/boxselect/boxselect.hpp"
#include "pmf/core/annotations.hpp"

namespace pmf::wss {

/// Places the patch mask at the rasterized pseudo-box offset of an
/// image-sized mask. Throws ShapeError when the patch mask does not match the
/// rasterized box.
BinaryMask place_patch_mask(const BBox& box, const BinaryMask& patch_mask, int image_height, int image_width);

/// Pseudo-annotation with bbox = b*, the placed mask as RLE, score = the
/// box-selection score and provenance copied from the pseudo-box. An empty
/// mask is flagged degenerate.
Annotation assemble_pseudo_annotation(const boxselect::PseudoBox& pseudo_box, const BinaryMask& patch_mask,
                                      int image_height, int image_width, int annotation_id, int image_id);

}  // namespace pmf::wss
