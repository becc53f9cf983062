#include "pmf/eval/evalbench.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace pmf::eval {

std::string to_string(Setting setting) {
  return setting == Setting::kConstrained ? "constrained" : "generalized";
}

Setting parse_setting(const std::string& text) {
  if (text == "constrained") return Setting::kConstrained;
  if (text == "generalized") return Setting::kGeneralized;
  throw InvalidArgument("unknown evaluation setting '" + text + "' (constrained|generalized)");
}

std::map<int, ClassRecall> recall_at_k(const std::map<int, std::vector<BBox>>& ranked_proposals,
                                       const AnnotationSet& gt, int K, double iou_threshold,
                                       const std::optional<std::set<int>>& categories) {
  if (K < 1) throw InvalidArgument("recall_at_k: K must be >= 1");
  std::map<int, ClassRecall> out;
  for (const auto& a : gt.annotations) {
    if (categories && !categories->count(a.category_id)) continue;
    ClassRecall& r = out[a.category_id];
    r.category_id = a.category_id;
    ++r.total;
    const auto it = ranked_proposals.find(a.image_id);
    if (it == ranked_proposals.end()) continue;
    const std::size_t n = std::min(it->second.size(), static_cast<std::size_t>(K));
    for (std::size_t i = 0; i < n; ++i) {
      if (iou(it->second[i], a.bbox) >= iou_threshold) {
        ++r.recalled;
        break;
      }
    }
  }
  return out;
}

double mean_recall(const std::map<int, ClassRecall>& recall) {
  if (recall.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& [id, r] : recall) sum += r.recall();
  return sum / static_cast<double>(recall.size());
}

double interpolated_ap(const std::vector<bool>& is_tp, int num_gt) {
  if (num_gt <= 0) throw InvalidArgument("interpolated_ap: no ground truth");
  const std::size_t n = is_tp.size();
  std::vector<double> precision(n), recall(n);
  int tp = 0;
  for (std::size_t i = 0; i < n; ++i) {
    tp += is_tp[i] ? 1 : 0;
    precision[i] = static_cast<double>(tp) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp) / num_gt;
  }
  for (std::size_t i = n; i-- > 1;) precision[i - 1] = std::max(precision[i - 1], precision[i]);
  // Recall levels sharing one interpolated precision are summed as
  // count * precision.
  double sum = 0.0;
  std::size_t cursor = 0;
  int run = 0;
  double run_precision = 0.0;
  for (int t = 0; t <= 100; ++t) {
    const double level = t / 100.0;
    while (cursor < n && recall[cursor] < level) ++cursor;
    const double p = cursor < n ? precision[cursor] : 0.0;
    if (run > 0 && p != run_precision) {
      sum += run * run_precision;
      run = 0;
    }
    run_precision = p;
    ++run;
  }
  sum += run * run_precision;
  return sum / 101.0;
}

ClassAp ap50_for_class(const std::vector<const Annotation*>& detections, const std::vector<const Annotation*>& gts,
                       int category_id, IouMode mode) {
  ClassAp out;
  out.category_id = category_id;
  out.num_gt = static_cast<int>(gts.size());
  out.num_detections = static_cast<int>(detections.size());
  if (gts.empty()) return out;

  std::vector<const Annotation*> dets = detections;
  std::stable_sort(dets.begin(), dets.end(), [](const Annotation* a, const Annotation* b) {
    const double sa = a->score.value_or(1.0), sb = b->score.value_or(1.0);
    if (sa != sb) return sa > sb;
    return a->id < b->id;
  });
  std::map<int, std::vector<std::size_t>> gt_by_image;
  for (std::size_t g = 0; g < gts.size(); ++g) gt_by_image[gts[g]->image_id].push_back(g);
  std::vector<char> used(gts.size(), 0);
  std::vector<bool> is_tp;
  for (const Annotation* d : dets) {
    Match m{d->id, d->image_id, -1, 0.0, d->score.value_or(1.0)};
    int best = -1;
    double best_iou = 0.0;
    const auto it = gt_by_image.find(d->image_id);
    if (it != gt_by_image.end()) {
      for (const std::size_t g : it->second) {
        if (used[g]) continue;
        const double v = mode == IouMode::kBox ? iou(d->bbox, gts[g]->bbox)
                                               : rle_iou(d->segmentation, gts[g]->segmentation);
        if (v > best_iou) {
          best_iou = v;
          best = static_cast<int>(g);
        }
      }
    }
    m.iou = best_iou;
    const bool tp = best >= 0 && best_iou >= kMatchIou;
    if (tp) {
      used[best] = 1;
      m.gt_id = gts[best]->id;
    }
    is_tp.push_back(tp);
    out.matches.push_back(m);
  }
  out.ap = 100.0 * interpolated_ap(is_tp, out.num_gt);
  return out;
}

std::map<int, ClassAp> ap50(const AnnotationSet& detections, const AnnotationSet& gt, IouMode mode,
                            const std::set<int>& image_ids, const std::set<int>& categories) {
  std::map<int, std::vector<const Annotation*>> det_by_class, gt_by_class;
  for (const auto& a : gt.annotations) {
    if (image_ids.count(a.image_id) && categories.count(a.category_id)) gt_by_class[a.category_id].push_back(&a);
  }
  for (const auto& a : detections.annotations) {
    if (image_ids.count(a.image_id) && categories.count(a.category_id)) det_by_class[a.category_id].push_back(&a);
  }
  std::map<int, ClassAp> out;
  for (const auto& [c, gts] : gt_by_class) out[c] = ap50_for_class(det_by_class[c], gts, c, mode);
  return out;
}

namespace {

SplitSummary summarize(const std::map<int, ClassAp>& per_class, const CategoryTable& table) {
  double sums[3] = {0, 0, 0};
  int counts[3] = {0, 0, 0};
  for (const auto& [c, ap] : per_class) {
    const int slot = table.is_novel(c) ? 0 : 1;
    sums[slot] += ap.ap;
    ++counts[slot];
    sums[2] += ap.ap;
    ++counts[2];
  }
  SplitSummary s;
  if (counts[0]) s.novel = sums[0] / counts[0];
  if (counts[1]) s.base = sums[1] / counts[1];
  if (counts[2]) s.all = sums[2] / counts[2];
  return s;
}

nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

EvalReport split_eval(const AnnotationSet& predictions, const AnnotationSet& gt, Setting setting,
                      const std::map<int, std::vector<BBox>>* ranked_proposals, int K) {
  EvalReport r;
  r.setting = setting;
  r.K = K;
  if (setting == Setting::kConstrained) {
    r.categories = std::set<int>();
    for (const int id : gt.categories.ids(Split::kNovel)) r.categories.insert(id);
    for (const auto& a : gt.annotations) {
      if (r.categories.count(a.category_id)) r.image_ids.insert(a.image_id);
    }
  } else {
    for (const int id : gt.categories.ids()) r.categories.insert(id);
    for (const auto& img : gt.images) r.image_ids.insert(img.id);
  }
  for (const auto& a : predictions.annotations) {
    if (!gt.categories.find(a.category_id)) {
      throw InvalidArgument("prediction uses category " + std::to_string(a.category_id) + " outside the vocabulary");
    }
  }
  r.box_ap = ap50(predictions, gt, IouMode::kBox, r.image_ids, r.categories);
  r.mask_ap = ap50(predictions, gt, IouMode::kMask, r.image_ids, r.categories);
  r.box_map = summarize(r.box_ap, gt.categories);
  r.mask_map = summarize(r.mask_ap, gt.categories);
  if (ranked_proposals) {
    AnnotationSet subset;
    subset.categories = gt.categories;
    for (const auto& a : gt.annotations) {
      if (r.image_ids.count(a.image_id)) subset.annotations.push_back(a);
    }
    r.recall = recall_at_k(*ranked_proposals, subset, K, kMatchIou, r.categories);
  }
  return r;
}

nlohmann::json report_to_json(const EvalReport& report, const CategoryTable& categories) {
  nlohmann::json classes = nlohmann::json::array();
  nlohmann::json matches = nlohmann::json::array();
  for (const auto& [c, box] : report.box_ap) {
    const auto& cat = categories.at(c);
    nlohmann::json e{{"category_id", c},
                     {"name", cat.name},
                     {"split", to_string(cat.split)},
                     {"num_gt", box.num_gt},
                     {"num_detections", box.num_detections},
                     {"ap50_box", box.ap},
                     {"ap50_mask", report.mask_ap.at(c).ap}};
    const auto it = report.recall.find(c);
    e["recall"] = it != report.recall.end() ? nlohmann::json(it->second.recall()) : nlohmann::json(nullptr);
    classes.push_back(std::move(e));
    for (const auto& m : box.matches) {
      matches.push_back({{"category_id", c},
                         {"detection_id", m.detection_id},
                         {"image_id", m.image_id},
                         {"gt_id", m.gt_id},
                         {"iou", m.iou},
                         {"score", m.score}});
    }
  }
  auto summary = [](const SplitSummary& s) {
    return nlohmann::json{{"novel", opt_json(s.novel)}, {"base", opt_json(s.base)}, {"all", opt_json(s.all)}};
  };
  return {{"setting", to_string(report.setting)},
          {"iou_threshold", kMatchIou},
          {"interpolation", "coco-101-point"},
          {"K", report.K},
          {"num_images", report.image_ids.size()},
          {"classes", std::move(classes)},
          {"map50_box", summary(report.box_map)},
          {"map50_mask", summary(report.mask_map)},
          {"box_matches", std::move(matches)}};
}

std::string report_to_csv(const EvalReport& report, const CategoryTable& categories) {
  std::ostringstream out;
  out << "category_id,name,split,num_gt,num_detections,ap50_box,ap50_mask,recall\n";
  for (const auto& [c, box] : report.box_ap) {
    const auto& cat = categories.at(c);
    const auto it = report.recall.find(c);
    out << c << ',' << cat.name << ',' << to_string(cat.split) << ',' << box.num_gt << ',' << box.num_detections << ','
        << fmt(box.ap) << ',' << fmt(report.mask_ap.at(c).ap) << ','
        << (it != report.recall.end() ? fmt(it->second.recall()) : std::string()) << '\n';
  }
  return out.str();
}

std::string recall_comparison_csv(const CategoryTable& categories, const std::string& name_a,
                                  const std::map<int, ClassRecall>& a, const std::string& name_b,
                                  const std::map<int, ClassRecall>& b) {
  std::ostringstream out;
  out << "category_id,name,split," << name_a << ',' << name_b << '\n';
  for (const auto& cat : categories.entries()) {
    const auto ia = a.find(cat.id), ib = b.find(cat.id);
    if (ia == a.end() && ib == b.end()) continue;
    out << cat.id << ',' << cat.name << ',' << to_string(cat.split) << ','
        << (ia != a.end() ? fmt(ia->second.recall()) : std::string()) << ','
        << (ib != b.end() ? fmt(ib->second.recall()) : std::string()) << '\n';
  }
  return out.str();
}

PseudoQuality pseudo_quality(const AnnotationSet& pseudo, const AnnotationSet& gt) {
  std::map<std::pair<int, int>, std::vector<const Annotation*>> gt_by_key;
  for (const auto& a : gt.annotations) gt_by_key[{a.image_id, a.category_id}].push_back(&a);
  std::set<std::pair<int, int>> covered;
  PseudoQuality q;
  for (const auto& p : pseudo.annotations) {
    if (p.degenerate) continue;
    const auto it = gt_by_key.find({p.image_id, p.category_id});
    if (it == gt_by_key.end()) continue;
    covered.insert(it->first);
    const Annotation* best = nullptr;
    double best_iou = -1.0;
    for (const Annotation* g : it->second) {
      const double v = iou(p.bbox, g->bbox);
      if (v > best_iou) {
        best_iou = v;
        best = g;
      }
    }
    q.box_ious.push_back(best_iou);
    q.mask_ious.push_back(rle_iou(p.segmentation, best->segmentation));
  }
  q.evaluated = static_cast<int>(q.box_ious.size());
  q.skipped = static_cast<int>(gt_by_key.size() - covered.size());
  if (q.evaluated) {
    q.mean_box_iou = std::accumulate(q.box_ious.begin(), q.box_ious.end(), 0.0) / q.evaluated;
    q.mean_mask_iou = std::accumulate(q.mask_ious.begin(), q.mask_ious.end(), 0.0) / q.evaluated;
  }
  return q;
}

}  // namespace pmf::eval
