#include <doctest.h>

#include <set>

#include "pmf/core/annotations.hpp"
#include "pmf/core/config.hpp"
#include "pmf/core/errors.hpp"
#include "pmf/core/rle.hpp"
#include "pmf/core/rng.hpp"
#include "pmf/core/types.hpp"
#include "test_support.hpp"

using namespace pmf;

TEST_CASE("iou of identical, disjoint and overlapping boxes") {
  const BBox a{0, 0, 2, 2};
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(a, BBox{5, 5, 1, 1}) == 0.0);
  // |a ∩ b| = 1, |a ∪ b| = 4 + 4 - 1
  CHECK(iou(a, BBox{1, 1, 2, 2}) == doctest::Approx(1.0 / 7.0).epsilon(1e-15));
  CHECK(iou(a, BBox{2, 0, 2, 2}) == 0.0);  // touching edges
}

TEST_CASE("iou is symmetric, bounded and 1 only for equal boxes") {
  RngStream rng(1, "test.iou");
  for (int t = 0; t < 2000; ++t) {
    const BBox a = test::random_box(rng, 64, 64), b = test::random_box(rng, 64, 64);
    const double v = iou(a, b);
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    CHECK(v == iou(b, a));
    if (v == 1.0) CHECK(a == b);
    CHECK(iou(a, a) == doctest::Approx(1.0));
  }
}

TEST_CASE("rle of constant masks") {
  CHECK(rle_encode(BinaryMask(2, 2, 0)).counts == std::vector<std::uint32_t>{4});
  CHECK(rle_encode(BinaryMask(2, 2, 1)).counts == std::vector<std::uint32_t>{0, 4});
}

TEST_CASE("rle scans column-major") {
  BinaryMask m(2, 3, 0);
  m.at(0, 1) = 1;  // column 1, row 0 -> scan position 2
  m.at(1, 1) = 1;  // scan position 3
  const Rle r = rle_encode(m);
  CHECK(r.counts == std::vector<std::uint32_t>{2, 2, 2});
  CHECK(r.height == 2);
  CHECK(r.width == 3);
}

TEST_CASE("rle round-trips random masks over 1000 seeds") {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    RngStream rng(seed, "test.rle");
    const BinaryMask m = test::random_mask(rng, 16, 16, rng.uniform());
    const Rle r = rle_encode(m);
    std::uint64_t sum = 0;
    for (const auto c : r.counts) sum += c;
    REQUIRE(sum == 256);
    REQUIRE(rle_decode(r) == m);
    REQUIRE(rle_area(r) == count_set(m));
  }
}

TEST_CASE("rle decode rejects counts not summing to h*w") {
  CHECK_THROWS_AS(rle_decode(Rle{2, 2, {3}}), FormatError);
  CHECK_THROWS_AS(rle_decode(Rle{2, 2, {1, 4}}), FormatError);
}

TEST_CASE("rle intersection and iou agree with dense masks") {
  RngStream rng(3, "test.rle_iou");
  for (int t = 0; t < 200; ++t) {
    const BinaryMask a = test::random_mask(rng, 9, 13, 0.4), b = test::random_mask(rng, 9, 13, 0.5);
    std::uint64_t inter = 0;
    for (std::size_t i = 0; i < a.size(); ++i) inter += (a[i] && b[i]) ? 1 : 0;
    CHECK(rle_intersection(rle_encode(a), rle_encode(b)) == inter);
    CHECK(rle_iou(rle_encode(a), rle_encode(b)) == doctest::Approx(mask_iou(a, b)).epsilon(1e-12));
  }
}

TEST_CASE("rasterize rounds edges half-up and clips") {
  const PixelRect r = rasterize(BBox{1.5, 2.49, 3.0, 3.0}, 10, 10);
  CHECK(r.x0 == 2);
  CHECK(r.y0 == 2);
  CHECK(r.x1 == 5);  // 4.5 -> 5
  CHECK(r.y1 == 5);  // 5.49 -> 5
  const PixelRect c = rasterize(BBox{-4, -4, 100, 100}, 8, 6);
  CHECK(c == PixelRect{0, 0, 6, 8});
}

TEST_CASE("image rejects out-of-range intensities and tracks the mean pixel") {
  CHECK_THROWS_AS(ImageGrid(1, 1, {0.1f, 1.5f, 0.0f}), InvalidArgument);
  CHECK_THROWS_AS(ImageGrid(1, 2, {0.1f, 0.2f, 0.0f}), ShapeError);
  RngStream rng(5, "test.image");
  std::vector<float> data(7 * 5 * 3);
  for (auto& v : data) v = static_cast<float>(rng.uniform());
  const ImageGrid img(7, 5, data);
  for (int c = 0; c < 3; ++c) {
    double s = 0.0;
    for (std::size_t i = c; i < data.size(); i += 3) s += data[i];
    CHECK(img.mean_pixel()[c] == doctest::Approx(s / 35.0).epsilon(1e-6));
  }
}

TEST_CASE("rng streams are reproducible and independent by name and index") {
  RngStream a(42, "x", 3), b(42, "x", 3), c(42, "y", 3), d(42, "x", 4);
  const auto va = a.next_u64();
  CHECK(va == b.next_u64());
  CHECK(va != c.next_u64());
  CHECK(va != d.next_u64());
  RngStream u(7, "uniform");
  for (int i = 0; i < 10000; ++i) {
    const double x = u.uniform();
    REQUIRE(x >= 0.0);
    REQUIRE(x < 1.0);
    const int k = u.uniform_int(-3, 4);
    REQUIRE(k >= -3);
    REQUIRE(k <= 4);
  }
}

TEST_CASE("rng normal variates have unit variance") {
  RngStream rng(9, "normal");
  double s = 0.0, s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    s += x;
    s2 += x * x;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(std::abs(s2 / n - 1.0) < 0.02);
}

TEST_CASE("config validation names each out-of-range field") {
  const std::vector<std::pair<std::string, nlohmann::json>> bad = {
      {"m", 0},         {"G", -1},          {"K", 0},
      {"Z", 0},         {"threshold", 0.0}, {"threshold", 1.0},
      {"bg_weight", 0.0}, {"downsample", 0}, {"wspn_lr", -1.0},
      {"wss_iters", -1}, {"max_skip_fraction", 1.5}, {"occlusion_rate", -0.1}};
  std::set<std::string> seen;
  for (const auto& [key, value] : bad) {
    CAPTURE(key);
    try {
      PipelineConfig{}.merged({{key, value}});
      FAIL("accepted " << key);
    } catch (const ConfigError& e) {
      CHECK(e.field().find(key.substr(0, key.find('_'))) == 0);
      seen.insert(e.field());
    }
  }
  CHECK(seen.size() == 11);  // threshold appears twice
}

TEST_CASE("config json round-trips and rejects unknown keys and versions") {
  PipelineConfig c;
  c.G = 5;
  c.box_upsample = UpsampleMode::kBilinear;
  c.activation_source = ActivationSource::kToyVlm;
  const auto back = PipelineConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK_THROWS_AS(PipelineConfig::from_json({{"version", 1}, {"bogus", 3}}), ConfigError);
  CHECK_THROWS_AS(PipelineConfig::from_json({{"version", 2}}), VersionError);
  CHECK_THROWS_AS(PipelineConfig::from_json({{"G", 2}}), ConfigError);
  CHECK(PipelineConfig::from_json({{"version", 1}}).K == 50);
}

TEST_CASE("defaults match the reference hyper-parameters") {
  const PipelineConfig c;
  CHECK(c.m == 8);
  CHECK(c.K == 50);
  CHECK(c.G == 3);
  CHECK(c.threshold == 0.5);
  CHECK(c.bg_weight == 0.2);
  CHECK(c.wspn.lr == 0.001);
  CHECK(c.wspn.weight_decay == 0.0001);
  CHECK(c.wss.iters == 500);
  CHECK(c.wss.lr == 0.25);
}

TEST_CASE("category table enforces unique ids and base presence") {
  CHECK_THROWS_AS(CategoryTable({{1, "a", Split::kBase}, {1, "b", Split::kNovel}}), InvalidArgument);
  const CategoryTable only_novel({{1, "a", Split::kNovel}});
  CHECK_THROWS(only_novel.require_base());
  const CategoryTable t({{1, "a", Split::kBase}, {2, "b", Split::kNovel}});
  CHECK(t.ids(Split::kNovel) == std::vector<int>{2});
  CHECK(CategoryTable::from_json(t.to_json()) == t);
}

TEST_CASE("annotation json round-trips masks bit-exactly") {
  RngStream rng(11, "test.ann");
  AnnotationSet set;
  set.categories = CategoryTable({{1, "a", Split::kBase}, {2, "b", Split::kNovel}});
  set.images = {{1, "img_00001.ppm", 13, 9}, {2, "img_00002.ppm", 13, 9}};
  for (int i = 0; i < 20; ++i) {
    Annotation a;
    a.id = i + 1;
    a.image_id = 1 + i % 2;
    a.category_id = 1 + i % 2;
    a.bbox = test::random_box(rng, 13, 9);
    a.segmentation = rle_encode(test::random_mask(rng, 9, 13, 0.3));
    if (i % 3 == 0) a.score = rng.uniform();
    set.annotations.push_back(a);
  }
  const auto text = dump_annotations(set);
  const auto back = AnnotationSet::from_json(nlohmann::json::parse(text));
  CHECK(back == set);
  CHECK(dump_annotations(back) == text);
}

TEST_CASE("annotation json rejects dangling references") {
  AnnotationSet set;
  set.categories = CategoryTable({{1, "a", Split::kBase}});
  set.images = {{1, "x.ppm", 4, 4}};
  Annotation a;
  a.id = 1;
  a.image_id = 2;
  a.category_id = 1;
  a.bbox = {0, 0, 1, 1};
  a.segmentation = rle_encode(BinaryMask(4, 4, 0));
  set.annotations.push_back(a);
  CHECK_THROWS_AS(AnnotationSet::from_json(set.to_json()), FormatError);
}

TEST_CASE("label view rejects boxes and masks") {
  LabelSet labels;
  labels.categories = CategoryTable({{1, "a", Split::kBase}});
  labels.images = {{{1, "x.ppm", 4, 4}, {1}}};
  auto j = labels.to_json();
  CHECK(LabelSet::from_json(j) == labels);
  j["images"][0]["bbox"] = {0, 0, 1, 1};
  CHECK_THROWS_AS(LabelSet::from_json(j), FormatError);
  auto k = labels.to_json();
  k["annotations"] = nlohmann::json::array();
  CHECK_THROWS_AS(LabelSet::from_json(k), FormatError);
}
