#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "pmf/core/rng.hpp"
#include "pmf/core/types.hpp"

namespace pmf::proposal {

enum class ProposalSource { kUnsupervised, kWspn, kProxy };

std::string to_string(ProposalSource source);
ProposalSource parse_proposal_source(const std::string& text);

/// Candidate boxes; `scores` is empty or parallel to `boxes`.
struct ProposalSet {
  std::vector<BBox> boxes;
  std::vector<double> scores;
  ProposalSource source = ProposalSource::kUnsupervised;

  std::size_t size() const noexcept { return boxes.size(); }
  bool empty() const noexcept { return boxes.empty(); }
};

struct UnsupervisedOptions {
  std::vector<double> color_tolerances{0.09, 0.16};
  int min_component_area = 12;
  double max_cover_fraction = 0.9;
  std::vector<int> window_sizes{24, 32, 48, 64, 96};
  int jitter_per_box = 4;
  double jitter_scale = 0.08;
  double dedup_iou = 0.95;
};

/// Selective-search substitute. Union of
///  (a) boxes of color-homogeneous connected components at several
///      tolerances, plus unions of adjacent component pairs,
///  (b) a multi-scale sliding-window grid (aspects 1:1, 2:1, 1:2, stride
///      half the window),
///  (c) jittered copies of the component boxes,
/// greedily deduplicated (a box is dropped when its IoU with an earlier kept
/// box is >= dedup_iou). A component whose box covers more than
/// max_cover_fraction of the image is treated as background.
ProposalSet unsupervised_proposals(const ImageGrid& image, RngStream& rng, const UnsupervisedOptions& options = {});

std::vector<BBox> sliding_windows(int image_height, int image_width, const std::vector<int>& sizes);

/// Greedy IoU deduplication preserving input order.
std::vector<BBox> deduplicate(const std::vector<BBox>& boxes, double iou_threshold);

/// Proposals file: {"source": s, "images": [{"image_id": id,
/// "proposals": [{"bbox":[x,y,w,h], "score": v}, ...]}, ...]}.
nlohmann::json proposals_to_json(const std::map<int, ProposalSet>& by_image);
std::map<int, ProposalSet> proposals_from_json(const nlohmann::json& j);
void write_proposals(const std::string& path, const std::map<int, ProposalSet>& by_image);
std::map<int, ProposalSet> read_proposals(const std::string& path);

}  // namespace pmf::proposal
