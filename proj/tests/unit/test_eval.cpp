#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "pmf/core/errors.hpp"
#include "pmf/core/rle.hpp"
#include "pmf/eval/evalbench.hpp"
#include "test_support.hpp"

using namespace pmf;
using namespace pmf::eval;

namespace {

constexpr int kH = 64;
constexpr int kW = 64;

Annotation ann(int id, int image_id, int cat, const BBox& b, std::optional<double> score = std::nullopt) {
  Annotation a;
  a.id = id;
  a.image_id = image_id;
  a.category_id = cat;
  a.bbox = b;
  BinaryMask m(kH, kW, 0);
  const PixelRect r = rasterize(b, kH, kW);
  for (int y = r.y0; y < r.y1; ++y)
    for (int x = r.x0; x < r.x1; ++x) m.at(y, x) = 1;
  a.segmentation = rle_encode(m);
  a.score = score;
  return a;
}

AnnotationSet empty_set(int num_images, std::vector<Category> cats) {
  AnnotationSet s;
  for (int i = 1; i <= num_images; ++i) s.images.push_back({i, "img_" + std::to_string(i), kW, kH});
  s.categories = CategoryTable(std::move(cats));
  return s;
}

std::vector<Category> two_cats() { return {{1, "base", Split::kBase}, {2, "novel", Split::kNovel}}; }

// Independent AP: greedy matching, then 101-point interpolation.
double oracle_ap(std::vector<Annotation> dets, const std::vector<Annotation>& gts, int cat) {
  std::vector<Annotation> d, g;
  for (const auto& a : dets)
    if (a.category_id == cat) d.push_back(a);
  for (const auto& a : gts)
    if (a.category_id == cat) g.push_back(a);
  if (g.empty()) return 0.0;
  std::stable_sort(d.begin(), d.end(), [](const Annotation& a, const Annotation& b) {
    const double sa = a.score.value_or(1.0), sb = b.score.value_or(1.0);
    return sa != sb ? sa > sb : a.id < b.id;
  });
  std::vector<bool> used(g.size(), false);
  std::vector<double> prec, rec;
  int tp = 0;
  for (std::size_t k = 0; k < d.size(); ++k) {
    int best = -1;
    double best_iou = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (used[j] || g[j].image_id != d[k].image_id) continue;
      const double v = iou(d[k].bbox, g[j].bbox);
      if (v > best_iou) best_iou = v, best = static_cast<int>(j);
    }
    if (best >= 0 && best_iou >= 0.5) {
      used[static_cast<std::size_t>(best)] = true;
      ++tp;
    }
    prec.push_back(static_cast<double>(tp) / static_cast<double>(k + 1));
    rec.push_back(static_cast<double>(tp) / static_cast<double>(g.size()));
  }
  double sum = 0.0;
  for (int t = 0; t <= 100; ++t) {
    const double r = t / 100.0;
    double p = 0.0;
    for (std::size_t k = 0; k < prec.size(); ++k)
      if (rec[k] >= r - 1e-12) p = std::max(p, prec[k]);
    sum += p;
  }
  return 100.0 * sum / 101.0;
}

}  // namespace

TEST_CASE("interpolated AP hand fixtures") {
  CHECK(interpolated_ap({true, true, true}, 3) == doctest::Approx(1.0));
  CHECK(interpolated_ap({false, false}, 3) == 0.0);
  CHECK(interpolated_ap({}, 3) == 0.0);
  // TP FP TP FP TP over 3 GT: precision 1 up to recall 1/3, 2/3 up to 2/3,
  // 3/5 up to 1. Points 0..33 -> 1, 34..66 -> 2/3, 67..100 -> 3/5.
  const double want = (34.0 * 1.0 + 33.0 * (2.0 / 3.0) + 34.0 * 0.6) / 101.0;
  CHECK(want == doctest::Approx(76.4 / 101.0));
  CHECK(interpolated_ap({true, false, true, false, true}, 3) == doctest::Approx(0.75643564356435644).epsilon(1e-14));
  // Half the GT found at precision 1.
  CHECK(interpolated_ap({true}, 2) == doctest::Approx(51.0 / 101.0));
}

TEST_CASE("AP50 through the matcher") {
  auto gt = empty_set(2, two_cats());
  gt.annotations = {ann(1, 1, 1, {0, 0, 10, 10}), ann(2, 1, 1, {20, 20, 10, 10}), ann(3, 2, 1, {5, 5, 20, 20})};
  auto det = empty_set(2, two_cats());
  det.annotations = {ann(1, 1, 1, {0, 0, 10, 10}, 0.9), ann(2, 1, 1, {40, 40, 5, 5}, 0.8),
                     ann(3, 1, 1, {20, 20, 10, 11}, 0.7), ann(4, 2, 1, {50, 0, 5, 5}, 0.6),
                     ann(5, 2, 1, {5, 5, 20, 19}, 0.5)};
  const std::set<int> imgs{1, 2}, cats{1};
  for (const auto mode : {IouMode::kBox, IouMode::kMask}) {
    const auto r = ap50(det, gt, mode, imgs, cats);
    REQUIRE(r.count(1) == 1);
    CHECK(r.at(1).ap == doctest::Approx(75.64356435643565).epsilon(1e-12));
    CHECK(r.at(1).num_gt == 3);
    CHECK(r.at(1).num_detections == 5);
  }
  SUBCASE("perfect and empty") {
    auto same = gt;
    for (auto& a : same.annotations) a.score = 1.0;
    CHECK(ap50(same, gt, IouMode::kBox, imgs, cats).at(1).ap == doctest::Approx(100.0));
    auto none = empty_set(2, two_cats());
    CHECK(ap50(none, gt, IouMode::kMask, imgs, cats).at(1).ap == 0.0);
  }
  SUBCASE("duplicate detections of one GT count once") {
    auto dup = empty_set(2, two_cats());
    dup.annotations = {ann(1, 1, 1, {0, 0, 10, 10}, 0.9), ann(2, 1, 1, {0, 0, 10, 10}, 0.8)};
    const auto r = ap50(dup, gt, IouMode::kBox, imgs, cats).at(1);
    CHECK(r.matches[0].gt_id == 1);
    CHECK(r.matches[1].gt_id == -1);
  }
}

TEST_CASE("AP matches a straight-line evaluator on random suites") {
  for (std::uint64_t seed = 0; seed < 80; ++seed) {
    RngStream rng(seed, "test.ap");
    auto gt = empty_set(4, two_cats());
    auto det = empty_set(4, two_cats());
    int gid = 1, did = 1;
    for (int img = 1; img <= 4; ++img) {
      const int n = static_cast<int>(rng.uniform_int(0, 3));
      for (int k = 0; k < n; ++k) {
        const BBox b = test::random_box(rng, kW, kH, 4.0);
        const int cat = 1 + static_cast<int>(rng.uniform_int(0, 1));
        gt.annotations.push_back(ann(gid++, img, cat, b));
        if (rng.bernoulli(0.7)) {
          BBox j = b;
          j.x = std::clamp(j.x + rng.normal(0.0, 2.0), 0.0, kW - j.w);
          det.annotations.push_back(ann(did++, img, cat, j, std::round(rng.uniform() * 4) / 4));
        }
      }
      const int fps = static_cast<int>(rng.uniform_int(0, 2));
      for (int k = 0; k < fps; ++k)
        det.annotations.push_back(ann(did++, img, 1 + static_cast<int>(rng.uniform_int(0, 1)),
                                      test::random_box(rng, kW, kH, 4.0), rng.uniform()));
    }
    const auto r = ap50(det, gt, IouMode::kBox, {1, 2, 3, 4}, {1, 2});
    for (const auto& [cat, cap] : r) CHECK(cap.ap == doctest::Approx(oracle_ap(det.annotations, gt.annotations, cat)).epsilon(1e-12));

    // Any strictly increasing rescoring leaves AP unchanged.
    auto rescored = det;
    for (auto& a : rescored.annotations) a.score = std::exp(3.0 * a.score.value_or(1.0)) + 7.0;
    const auto r2 = ap50(rescored, gt, IouMode::kBox, {1, 2, 3, 4}, {1, 2});
    for (const auto& [cat, cap] : r) CHECK(r2.at(cat).ap == doctest::Approx(cap.ap));

    // An extra detection overlapping nothing never raises AP.
    auto extra = det;
    extra.annotations.push_back(ann(999, 1, 1, {0, 0, 1, 1}, 0.99));
    extra.annotations.back().bbox = {-100, -100, 1, 1};
    const auto r3 = ap50(extra, gt, IouMode::kBox, {1, 2, 3, 4}, {1, 2});
    if (r.count(1)) CHECK(r3.at(1).ap <= r.at(1).ap + 1e-9);
  }
}

TEST_CASE("recall at K") {
  auto gt = empty_set(2, two_cats());
  gt.annotations = {ann(1, 1, 1, {0, 0, 10, 10}), ann(2, 1, 2, {20, 20, 10, 10}), ann(3, 2, 2, {5, 5, 20, 20})};
  std::map<int, std::vector<BBox>> props;
  props[1] = {{40, 40, 5, 5}, {0, 0, 10, 10}, {30, 30, 5, 5}, {20, 20, 10, 12}, {1, 1, 1, 1}};
  props[2] = {};
  SUBCASE("brute force over K") {
    for (int K = 1; K <= 6; ++K) {
      const auto r = recall_at_k(props, gt, K);
      for (const auto& [cat, cr] : r) {
        int want = 0, total = 0;
        for (const auto& a : gt.annotations) {
          if (a.category_id != cat) continue;
          ++total;
          const auto& list = props[a.image_id];
          for (int k = 0; k < K && k < static_cast<int>(list.size()); ++k)
            if (iou(list[k], a.bbox) >= 0.5) {
              ++want;
              break;
            }
        }
        CHECK(cr.total == total);
        CHECK(cr.recalled == want);
      }
    }
    CHECK(recall_at_k(props, gt, 1).at(1).recalled == 0);
    CHECK(recall_at_k(props, gt, 2).at(1).recalled == 1);
    CHECK(recall_at_k(props, gt, 4).at(2).recall() == doctest::Approx(0.5));
  }
  SUBCASE("perfect and empty") {
    std::map<int, std::vector<BBox>> perfect;
    for (const auto& a : gt.annotations) perfect[a.image_id].push_back(a.bbox);
    CHECK(mean_recall(recall_at_k(perfect, gt, 50)) == 1.0);
    CHECK(mean_recall(recall_at_k({}, gt, 50)) == 0.0);
    const auto only_novel = recall_at_k(perfect, gt, 50, 0.5, std::set<int>{2});
    CHECK(only_novel.size() == 1);
    CHECK(only_novel.count(2) == 1);
  }
  SUBCASE("monotone in K") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      RngStream rng(seed, "test.recall");
      std::map<int, std::vector<BBox>> rp;
      for (int img = 1; img <= 2; ++img)
        for (int k = 0; k < 30; ++k) rp[img].push_back(test::random_box(rng, kW, kH, 3.0));
      double prev = 0.0;
      for (int K = 1; K <= 30; ++K) {
        const double m = mean_recall(recall_at_k(rp, gt, K));
        CHECK(m >= prev);
        prev = m;
      }
    }
  }
}

TEST_CASE("split evaluation") {
  auto gt = empty_set(3, two_cats());
  gt.annotations = {ann(1, 1, 1, {0, 0, 10, 10}), ann(2, 2, 2, {20, 20, 10, 10}), ann(3, 3, 1, {5, 5, 20, 20})};
  SUBCASE("GT scored against itself is 100") {
    auto pred = gt;
    for (auto& a : pred.annotations) a.score = 1.0;
    const auto g = split_eval(pred, gt, Setting::kGeneralized);
    CHECK(g.box_map.all == doctest::Approx(100.0));
    CHECK(g.mask_map.novel == doctest::Approx(100.0));
    CHECK(g.box_map.base == doctest::Approx(100.0));
    const auto c = split_eval(pred, gt, Setting::kConstrained);
    CHECK(c.image_ids == std::set<int>{2});
    CHECK(c.categories == std::set<int>{2});
    CHECK(c.box_map.novel == doctest::Approx(100.0));
    CHECK_FALSE(c.box_map.base.has_value());
    const auto j = report_to_json(c, gt.categories);
    CHECK(j.at("map50_box").at("base").is_null());
  }
  SUBCASE("novel slot is null without novel categories") {
    auto base_only = empty_set(1, {{1, "a", Split::kBase}, {3, "b", Split::kBase}});
    base_only.annotations = {ann(1, 1, 1, {0, 0, 10, 10})};
    const auto r = split_eval(base_only, base_only, Setting::kGeneralized);
    CHECK_FALSE(r.box_map.novel.has_value());
    CHECK(r.box_map.base.has_value());
  }
  SUBCASE("constrained setting ignores base predictions") {
    auto pred = empty_set(3, two_cats());
    pred.annotations = {ann(1, 2, 2, {20, 20, 10, 10}, 0.5), ann(2, 2, 1, {20, 20, 10, 10}, 0.9)};
    const auto c = split_eval(pred, gt, Setting::kConstrained);
    CHECK(c.box_map.novel == doctest::Approx(100.0));
  }
  CHECK(parse_setting("constrained") == Setting::kConstrained);
  CHECK_THROWS_AS(parse_setting("open"), InvalidArgument);
}

TEST_CASE("pseudo quality") {
  auto gt = empty_set(2, two_cats());
  gt.annotations = {ann(1, 1, 1, {0, 0, 10, 10}), ann(2, 1, 1, {30, 30, 10, 10}), ann(3, 2, 2, {0, 0, 8, 8})};
  auto pseudo = empty_set(2, two_cats());
  pseudo.annotations = {ann(1, 1, 1, {30, 30, 10, 20}, 1.0)};
  const auto q = pseudo_quality(pseudo, gt);
  CHECK(q.evaluated == 1);
  CHECK(q.skipped == 1);
  CHECK(q.mean_box_iou == doctest::Approx(0.5));
  CHECK(q.mean_mask_iou == doctest::Approx(0.5));
}
