#include "pmf/wss/assemble.hpp"

namespace pmf::wss {

BinaryMask place_patch_mask(const BBox& box, const BinaryMask& patch_mask, int image_height, int image_width) {
  const PixelRect r = rasterize(box, image_height, image_width);
  if (patch_mask.height() != r.height() || patch_mask.width() != r.width()) {
    throw ShapeError("patch mask does not match the rasterized pseudo-box");
  }
  BinaryMask full(image_height, image_width, 0);
  for (int y = 0; y < r.height(); ++y) {
    for (int x = 0; x < r.width(); ++x) full.at(r.y0 + y, r.x0 + x) = patch_mask.at(y, x) ? 1 : 0;
  }
  return full;
}

Annotation assemble_pseudo_annotation(const boxselect::PseudoBox& pseudo_box, const BinaryMask& patch_mask,
                                      int image_height, int image_width, int annotation_id, int image_id) {
  const BinaryMask full = place_patch_mask(pseudo_box.box, patch_mask, image_height, image_width);
  Annotation a;
  a.id = annotation_id;
  a.image_id = image_id;
  a.category_id = pseudo_box.category_id;
  a.bbox = pseudo_box.box;
  a.segmentation = rle_encode(full);
  a.score = pseudo_box.score;
  a.degenerate = count_set(full) == 0;
  a.provenance = pseudo_box.provenance;
  return a;
}

}  // namespace pmf::wss
