#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "pmf/core/annotations.hpp"

namespace pmf::eval {

inline constexpr double kMatchIou = 0.5;

enum class Setting { kConstrained, kGeneralized };
enum class IouMode { kBox, kMask };

std::string to_string(Setting setting);
/// Throws InvalidArgument on anything but "constrained" / "generalized".
Setting parse_setting(const std::string& text);

struct ClassRecall {
  int category_id = 0;
  int total = 0;
  int recalled = 0;
  double recall() const noexcept { return total ? static_cast<double>(recalled) / total : 0.0; }
};

/// A GT box is recalled when one of the first K proposals of its image has
/// IoU >= iou_threshold. Categories without GT are omitted. When
/// `categories` is given only those categories are reported.
std::map<int, ClassRecall> recall_at_k(const std::map<int, std::vector<BBox>>& ranked_proposals,
                                       const AnnotationSet& gt, int K, double iou_threshold = kMatchIou,
                                       const std::optional<std::set<int>>& categories = std::nullopt);

/// Mean of per-class recall over the reported categories (0 when empty).
double mean_recall(const std::map<int, ClassRecall>& recall);

struct Match {
  int detection_id = 0;
  int image_id = 0;
  int gt_id = -1;  // -1: false positive
  double iou = 0.0;
  double score = 0.0;
};

struct ClassAp {
  int category_id = 0;
  int num_gt = 0;
  int num_detections = 0;
  double ap = 0.0;  // in [0, 100]
  std::vector<Match> matches;
};

/// Area under the 101-point interpolated precision/recall curve, in [0, 1].
/// `is_tp` is ordered by descending score.
double interpolated_ap(const std::vector<bool>& is_tp, int num_gt);

/// Greedy matching by descending score (ties: lower detection id). Each
/// detection takes the unmatched GT of the same image with the
/// highest IoU (ties: lower GT index in the annotation list); IoU >= 0.5 is a
/// true positive. Detections without a score count as score 1.
ClassAp ap50_for_class(const std::vector<const Annotation*>& detections, const std::vector<const Annotation*>& gts,
                       int category_id, IouMode mode);

/// Per-class AP50 restricted to the given images and categories. Classes
/// with no GT in the restricted set are omitted.
std::map<int, ClassAp> ap50(const AnnotationSet& detections, const AnnotationSet& gt, IouMode mode,
                            const std::set<int>& image_ids, const std::set<int>& categories);

struct SplitSummary {
  std::optional<double> novel;
  std::optional<double> base;
  std::optional<double> all;
};

struct EvalReport {
  Setting setting = Setting::kGeneralized;
  int K = 0;
  std::set<int> image_ids;
  std::set<int> categories;
  std::map<int, ClassAp> box_ap;
  std::map<int, ClassAp> mask_ap;
  std::map<int, ClassRecall> recall;  // empty unless proposals were given
  SplitSummary box_map;
  SplitSummary mask_map;
};

/// Constrained: images containing a novel GT instance, novel vocabulary.
/// Generalized: all images, full vocabulary, novel/base/all summaries.
EvalReport split_eval(const AnnotationSet& predictions, const AnnotationSet& gt, Setting setting,
                      const std::map<int, std::vector<BBox>>* ranked_proposals = nullptr, int K = 0);

nlohmann::json report_to_json(const EvalReport& report, const CategoryTable& categories);
/// category_id,name,split,num_gt,num_detections,ap50_box,ap50_mask,recall
std::string report_to_csv(const EvalReport& report, const CategoryTable& categories);

/// Per-category recall of two proposal methods side by side:
/// category_id,name,split,<a>,<b>
std::string recall_comparison_csv(const CategoryTable& categories, const std::string& name_a,
                                  const std::map<int, ClassRecall>& a, const std::string& name_b,
                                  const std::map<int, ClassRecall>& b);

/// Quality of pseudo-annotations against GT. Each pseudo-annotation is
/// compared with the GT instances of its (image, category): box IoU is the
/// best over those instances and mask IoU is taken against that same
/// instance. (image, label) pairs without a non-degenerate pseudo-annotation
/// are counted in `skipped` and left out of the means.
struct PseudoQuality {
  int evaluated = 0;
  int skipped = 0;
  double mean_box_iou = 0.0;
  double mean_mask_iou = 0.0;
  std::vector<double> box_ious;
  std::vector<double> mask_ious;
};

PseudoQuality pseudo_quality(const AnnotationSet& pseudo, const AnnotationSet& gt);

}  // namespace pmf::eval
