#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "pmf/core/errors.hpp"
#include "pmf/core/rle.hpp"
#include "pmf/eval/evalbench.hpp"
#include "pmf/synth/dataset_io.hpp"
#include "pmf/synth/synth.hpp"

using namespace pmf;
using namespace pmf::synth;

namespace {

std::pair<int, int> argmax_cell(const ActivationMap& m) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < m.values.size(); ++i)
    if (m.values[i] > m.values[best]) best = i;
  return {static_cast<int>(best) / m.values.width(), static_cast<int>(best) % m.values.width()};
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("pmf_test_" + name);
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("generation is deterministic and independent of workers") {
  GenerateOptions opts;
  opts.num_images = 12;
  opts.seed = 5;
  const auto cats = default_categories();
  const auto a = generate_dataset(opts, cats, 1);
  const auto b = generate_dataset(opts, cats, 3);
  REQUIRE(a.scenes.size() == 12);
  CHECK(a.ground_truth() == b.ground_truth());
  for (std::size_t i = 0; i < a.scenes.size(); ++i) CHECK(a.scenes[i].image == b.scenes[i].image);
  opts.seed = 6;
  CHECK_FALSE(generate_dataset(opts, cats, 1).ground_truth() == a.ground_truth());
}

TEST_CASE("instances are consistent") {
  GenerateOptions opts;
  opts.num_images = 40;
  const auto data = generate_dataset(opts, default_categories());
  for (const auto& scene : data.scenes) {
    BinaryMask seen(scene.image.height(), scene.image.width(), 0);
    std::set<int> labels;
    for (const auto& inst : scene.instances) {
      labels.insert(inst.category_id);
      CHECK(count_set(inst.mask) > 0);
      CHECK(mask_bounding_box(inst.mask) == inst.box);
      for (std::size_t i = 0; i < inst.mask.size(); ++i) {
        if (!inst.mask[i]) continue;
        CHECK(seen[i] == 0);  // no overlap without occlusion
        seen[i] = 1;
      }
      CHECK_FALSE(inst.parts.empty());
    }
    CHECK(std::vector<int>(labels.begin(), labels.end()) == scene.image_labels);
  }
}

TEST_CASE("occlusion keeps masks inside their boxes") {
  GenerateOptions opts;
  opts.num_images = 30;
  opts.occlusion_rate = 0.8;
  opts.seed = 2;
  const auto data = generate_dataset(opts, default_categories());
  for (const auto& scene : data.scenes) {
    for (const auto& inst : scene.instances) {
      const PixelRect r = rasterize(inst.box, scene.image.height(), scene.image.width());
      for (int y = 0; y < scene.image.height(); ++y)
        for (int x = 0; x < scene.image.width(); ++x)
          if (inst.mask.at(y, x)) CHECK((x >= r.x0 && x < r.x1 && y >= r.y0 && y < r.y1));
    }
  }
  opts.occlusion_rate = 1.5;
  CHECK_THROWS_AS(generate_dataset(opts, default_categories()), InvalidArgument);
}

TEST_CASE("ground truth scored against itself is perfect on 500 images") {
  GenerateOptions opts;
  opts.num_images = 500;
  opts.seed = 11;
  const auto data = generate_dataset(opts, default_categories());
  auto pred = data.ground_truth();
  for (auto& a : pred.annotations) a.score = 1.0;
  const auto gt = data.ground_truth();
  const auto r = eval::split_eval(pred, gt, eval::Setting::kGeneralized);
  CHECK(r.box_map.all == doctest::Approx(100.0));
  CHECK(r.mask_map.all == doctest::Approx(100.0));
  CHECK(r.box_map.novel == doctest::Approx(100.0));
  CHECK(r.box_ap.size() == data.categories.table.size());
}

TEST_CASE("oracle activation without noise peaks on the object") {
  GenerateOptions opts;
  opts.num_images = 30;
  opts.seed = 3;
  const auto data = generate_dataset(opts, default_categories());
  OracleOptions o;
  o.noise = 0.0;
  o.use_parts = false;
  int checked = 0;
  for (const auto& scene : data.scenes) {
    for (const int cat : scene.image_labels) {
      int count = 0;
      const Instance* inst = nullptr;
      for (const auto& i : scene.instances)
        if (i.category_id == cat) ++count, inst = &i;
      if (count != 1) continue;
      RngStream rng(0, "oracle");
      const auto m = oracle_activation(scene, cat, scene.image, o, rng);
      const auto [gy, gx] = argmax_cell(m);
      const int cy = static_cast<int>(inst->box.cy()) / o.downsample, cx = static_cast<int>(inst->box.cx()) / o.downsample;
      CHECK(std::abs(gy - cy) <= 1);
      CHECK(std::abs(gx - cx) <= 1);
      CHECK(*std::max_element(m.values.values().begin(), m.values.values().end()) == doctest::Approx(1.0));
      ++checked;
    }
  }
  CHECK(checked > 20);
  CHECK_THROWS_AS(
      [&] {
        RngStream rng(0, "oracle");
        const auto& s = data.scenes[0];
        int absent = 1;
        while (std::count(s.image_labels.begin(), s.image_labels.end(), absent)) ++absent;
        oracle_activation(s, absent, s.image, o, rng);
      }(),
      InvalidArgument);
}

TEST_CASE("masking the discriminative part moves the oracle peak") {
  GenerateOptions opts;
  opts.num_images = 40;
  opts.seed = 4;
  const auto data = generate_dataset(opts, default_categories());
  OracleOptions o;
  o.noise = 0.0;
  int checked = 0;
  for (const auto& scene : data.scenes) {
    for (const auto& inst : scene.instances) {
      if (inst.parts.size() < 2) continue;
      if (std::count_if(scene.instances.begin(), scene.instances.end(),
                        [&](const Instance& i) { return i.category_id == inst.category_id; }) != 1)
        continue;
      RngStream r0(0, "o");
      const auto before = oracle_activation(scene, inst.category_id, scene.image, o, r0);
      const Part& acc = inst.parts[0];
      BinaryMask cover(scene.image.height(), scene.image.width(), 0);
      for (int y = 0; y < scene.image.height(); ++y)
        for (int x = 0; x < scene.image.width(); ++x)
          if (std::hypot(x + 0.5 - acc.cx, y + 0.5 - acc.cy) <= acc.radius) cover.at(y, x) = 1;
      const auto masked = scene.image.with_pixels_replaced(cover, {0.5f, 0.5f, 0.5f});
      RngStream r1(0, "o");
      const auto after = oracle_activation(scene, inst.category_id, masked, o, r1);
      const auto acc_cell = std::make_pair(static_cast<int>(acc.cy) / o.downsample, static_cast<int>(acc.cx) / o.downsample);
      if (argmax_cell(before) != acc_cell) continue;
      const auto second = inst.parts[1];
      const auto second_cell =
          std::make_pair(static_cast<int>(second.cy) / o.downsample, static_cast<int>(second.cx) / o.downsample);
      if (second_cell == acc_cell) continue;
      CHECK(argmax_cell(after) != acc_cell);
      // Masking-unaware oracle ignores the edit.
      OracleOptions blind = o;
      blind.masking_aware = false;
      RngStream r2(0, "o"), r3(0, "o");
      CHECK(oracle_activation(scene, inst.category_id, masked, blind, r2).values ==
            oracle_activation(scene, inst.category_id, scene.image, blind, r3).values);
      ++checked;
    }
  }
  CHECK(checked >= 5);
}

TEST_CASE("oracle cells outside the image are zero") {
  GenerateOptions opts;
  opts.num_images = 3;
  opts.image_size = 120;  // 8 cells of 16, last cell centre at 120
  const auto data = generate_dataset(opts, default_categories());
  OracleOptions o;
  o.noise = 0.5;
  const auto& s = data.scenes[0];
  RngStream rng(1, "o");
  const auto m = oracle_activation(s, s.image_labels[0], s.image, o, rng);
  REQUIRE(m.values.height() == 8);
  for (int i = 0; i < 8; ++i) {
    CHECK(m.values.at(7, i) == 0.0f);
    CHECK(m.values.at(i, 7) == 0.0f);
  }
  for (const float v : m.values.values()) CHECK(v >= 0.0f);
}

TEST_CASE("dataset directories round-trip") {
  GenerateOptions opts;
  opts.num_images = 6;
  opts.seed = 9;
  const auto data = generate_dataset(opts, default_categories());
  const auto dir = scratch_dir("dataset_io");
  write_dataset(dir.string(), data);
  CHECK(std::filesystem::exists(annotations_path(dir.string())));
  CHECK(std::filesystem::exists(labels_path(dir.string())));
  const auto back = read_dataset(dir.string());
  CHECK(back.ground_truth() == data.ground_truth());
  CHECK(back.labels().to_json() == data.labels().to_json());
  REQUIRE(back.scenes.size() == data.scenes.size());
  for (std::size_t i = 0; i < data.scenes.size(); ++i) {
    CHECK(back.scenes[i].image == data.scenes[i].image);
    OracleOptions o;
    RngStream a(2, "o"), b(2, "o");
    const int cat = data.scenes[i].image_labels[0];
    CHECK(oracle_activation(back.scenes[i], cat, back.scenes[i].image, o, a).values ==
          oracle_activation(data.scenes[i], cat, data.scenes[i].image, o, b).values);
  }
  std::filesystem::remove(scene_meta_path(dir.string()));
  CHECK_THROWS_AS(read_dataset(dir.string()), InvalidArgument);
  std::filesystem::remove_all(dir);
}
