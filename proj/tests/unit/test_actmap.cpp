#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "pmf/actmap/actmap.hpp"
#include "pmf/actmap/amap_io.hpp"
#include "pmf/core/errors.hpp"
#include "test_support.hpp"

using namespace pmf;
using namespace pmf::actmap;

namespace {

ActivationMap make_map(int h, int w, std::vector<float> v, int cat = 1) {
  ActivationMap m;
  m.category_id = cat;
  m.values = Grid<float>(h, w, std::move(v));
  return m;
}

// Bilinear resampling with half-pixel centers, written independently.
double bilinear_oracle(const Grid<float>& g, int H, int W, int y, int x) {
  auto src = [](int dst, int in, int out) {
    const double s = (dst + 0.5) * static_cast<double>(in) / out - 0.5;
    return std::clamp(s, 0.0, static_cast<double>(in - 1));
  };
  const double sy = src(y, g.height(), H), sx = src(x, g.width(), W);
  const int y0 = static_cast<int>(std::floor(sy)), x0 = static_cast<int>(std::floor(sx));
  const int y1 = std::min(y0 + 1, g.height() - 1), x1 = std::min(x0 + 1, g.width() - 1);
  const double fy = sy - y0, fx = sx - x0;
  return (1 - fy) * ((1 - fx) * g.at(y0, x0) + fx * g.at(y0, x1)) + fy * ((1 - fx) * g.at(y1, x0) + fx * g.at(y1, x1));
}

}  // namespace

TEST_CASE("normalize-threshold") {
  CHECK(count_set(normalize_threshold(make_map(2, 2, {0, 0, 0, 0}), 0.5)) == 0);
  const auto bits = normalize_threshold(make_map(1, 4, {0.2f, 0.4f, 0.8f, 1.0f}), 0.5);
  CHECK(std::vector<std::uint8_t>(bits.values().begin(), bits.values().end()) == std::vector<std::uint8_t>{0, 0, 1, 1});
  const auto single = normalize_threshold(make_map(2, 3, {0.1f, 0.0f, 3.0f, 0.2f, 0.0f, 0.0f}), 0.5);
  CHECK(single.at(0, 2) == 1);
  CHECK(count_set(single) == 1);
  // Scaling by a positive constant does not change the bits.
  const auto scaled = normalize_threshold(make_map(2, 3, {0.5f, 0.0f, 15.0f, 1.0f, 0.0f, 0.0f}), 0.5);
  CHECK(scaled == single);
}

TEST_CASE("nearest upsampling replicates cells") {
  const Grid<float> one(1, 1, std::vector<float>{0.7f});
  const auto near = upsample(one, 5, 3, UpsampleMode::kNearest);
  const auto bil = upsample(one, 5, 3, UpsampleMode::kBilinear);
  for (const float v : near.values()) CHECK(v == 0.7f);
  for (const float v : bil.values()) CHECK(v == doctest::Approx(0.7));
  const Grid<float> g(2, 2, std::vector<float>{1, 2, 3, 4});
  const auto up = upsample(g, 4, 4, UpsampleMode::kNearest);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) CHECK(up.at(y, x) == g.at(y / 2, x / 2));
}

TEST_CASE("nearest upsampling to a non-multiple size uses proportional footprints") {
  const Grid<float> g(2, 3, std::vector<float>{1, 2, 3, 4, 5, 6});
  const auto up = upsample(g, 5, 7, UpsampleMode::kNearest);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 7; ++x) CHECK(up.at(y, x) == g.at(y * 2 / 5, x * 3 / 7));
}

TEST_CASE("bilinear upsampling matches a straight-line oracle") {
  const Grid<float> g(2, 2, std::vector<float>{0, 1, 1, 0});
  const auto up = upsample(g, 4, 4, UpsampleMode::kBilinear);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) CHECK(up.at(y, x) == doctest::Approx(bilinear_oracle(g, 4, 4, y, x)).epsilon(1e-6));
  CHECK(up.at(0, 0) == doctest::Approx(0.0));
  CHECK(up.at(1, 1) == doctest::Approx(0.375));
  RngStream rng(2, "test.bilinear");
  for (int t = 0; t < 20; ++t) {
    Grid<float> r(1 + t % 4, 2 + t % 3);
    for (auto& v : r.values()) v = static_cast<float>(rng.uniform());
    const int H = 3 + t, W = 5 + 2 * t;
    const auto u = upsample(r, H, W, UpsampleMode::kBilinear);
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) CHECK(u.at(y, x) == doctest::Approx(bilinear_oracle(r, H, W, y, x)).epsilon(1e-5));
  }
}

TEST_CASE("binary bilinear upsampling keeps pixels at or above one half") {
  BinaryGrid b(2, 2, 0);
  b.at(0, 0) = 1;
  const auto up = upsample(b, 4, 4, UpsampleMode::kBilinear);
  const Grid<float> f(2, 2, std::vector<float>{1, 0, 0, 0});
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) CHECK(up.at(y, x) == (bilinear_oracle(f, 4, 4, y, x) >= 0.5 ? 1 : 0));
}

TEST_CASE("mask_image replaces exactly the covered pixels") {
  RngStream rng(3, "test.mask_image");
  std::vector<float> data(32 * 48 * 3);
  for (auto& v : data) v = static_cast<float>(rng.uniform());
  const ImageGrid img(32, 48, data);
  BinaryGrid bits(2, 3, 0);
  bits.at(1, 0) = 1;
  bits.at(0, 2) = 1;
  const Rgb fill{0.25f, 0.5f, 0.75f};
  const auto out = mask_image(img, bits, fill, UpsampleMode::kNearest);
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 48; ++x) {
      const bool covered = bits.at(y / 16, x / 16) != 0;
      CHECK(out.pixel(y, x) == (covered ? fill : img.pixel(y, x)));
    }
  }
  CHECK(std::vector<float>(img.data().begin(), img.data().end()) == data);
}

namespace {

// Cell (0,0) fires while the top-left quadrant is intact; once it is masked,
// cell (1,1) fires instead.
struct TwoBlobStub {
  ImageGrid original;
  ActivationMap operator()(const ImageGrid& image, int iteration) const {
    ActivationMap m = make_map(2, 2, {0, 0, 0, 0});
    m.iteration = iteration;
    if (image.pixel(4, 4) == original.pixel(4, 4)) {
      m.values.at(0, 0) = 1.0f;
      m.values.at(0, 1) = 0.2f;
    } else {
      m.values.at(1, 1) = 0.9f;
    }
    return m;
  }
};

}  // namespace

TEST_CASE("iterative masking exposes the second blob after one step") {
  const ImageGrid img = test::rect_image(32, 32, {0.1f, 0.1f, 0.1f}, {0, 0, 16, 16}, {0.9f, 0.2f, 0.2f});
  const TwoBlobStub stub{img};
  const auto g0 = iterative_masking(stub, img, 0, 0.5);
  CHECK(g0.bits == normalize_threshold(stub(img, 0), 0.5));
  CHECK(count_set(g0.bits) == 1);
  CHECK(g0.bits.at(0, 0) == 1);
  const auto g1 = iterative_masking(stub, img, 1, 0.5);
  CHECK(g1.bits.at(0, 0) == 1);
  CHECK(g1.bits.at(1, 1) == 1);
  CHECK(count_set(g1.bits) == 2);
  CHECK(g1.maps.size() == 2);
  CHECK(g1.contributing_iterations == std::vector<int>{0, 1});
}

TEST_CASE("constant activation makes extra iterations idempotent") {
  const ImageGrid img = test::solid_image(32, 48, {0.3f, 0.3f, 0.3f});
  const VlmEval constant = [](const ImageGrid&, int it) {
    auto m = make_map(2, 3, {0.1f, 1.0f, 0.6f, 0.0f, 0.3f, 0.7f});
    m.iteration = it;
    return m;
  };
  CHECK(iterative_masking(constant, img, 3, 0.5).bits == iterative_masking(constant, img, 0, 0.5).bits);
}

TEST_CASE("each iteration masks the previous iteration's image with the original mean") {
  RngStream rng(4, "test.cumulative");
  std::vector<float> data(32 * 32 * 3);
  for (auto& v : data) v = static_cast<float>(rng.uniform());
  const ImageGrid img(32, 32, data);
  const ImageGrid copy = img;
  std::vector<ImageGrid> seen;
  const VlmEval walker = [&](const ImageGrid& image, int it) {
    seen.push_back(image);
    std::vector<float> v(4, 0.0f);
    v[static_cast<std::size_t>(it % 4)] = 1.0f;
    auto m = make_map(2, 2, v);
    m.iteration = it;
    return m;
  };
  const auto g = iterative_masking(walker, img, 3, 0.5);
  REQUIRE(seen.size() == 4);
  CHECK(seen[0] == img);
  Rgb mean{};
  for (int c = 0; c < 3; ++c) mean[c] = static_cast<float>(img.mean_pixel()[c]);
  for (int i = 1; i < 4; ++i) {
    const auto expect = mask_image(seen[i - 1], normalize_threshold(g.maps[i - 1], 0.5), mean, UpsampleMode::kNearest);
    CHECK(seen[i] == expect);
  }
  CHECK(img == copy);
  CHECK(count_set(g.bits) == 4);
}

TEST_CASE("guidance is monotone in G") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    RngStream rng(seed, "test.monotone");
    std::vector<float> data(48 * 64 * 3);
    for (auto& v : data) v = static_cast<float>(rng.uniform());
    const ImageGrid img(48, 64, data);
    const VlmEval noisy = [seed](const ImageGrid& image, int it) {
      RngStream r(seed, "test.monotone.eval", static_cast<std::uint64_t>(it));
      auto m = make_map(3, 4, std::vector<float>(12));
      for (int i = 0; i < 12; ++i) m.values[i] = static_cast<float>(r.uniform() * (0.5 + image.pixel(i / 4 * 16, i % 4 * 16)[0]));
      m.iteration = it;
      return m;
    };
    BinaryGrid prev;
    for (int G = 0; G <= 5; ++G) {
      const auto g = iterative_masking(noisy, img, G, 0.5);
      if (G > 0) {
        for (std::size_t i = 0; i < prev.size(); ++i) CHECK((prev[i] == 0 || g.bits[i] == 1));
      }
      prev = g.bits;
    }
  }
}

TEST_CASE("guidance from stored maps equals in-process masking") {
  const ImageGrid img = test::rect_image(32, 32, {0.1f, 0.1f, 0.1f}, {0, 0, 16, 16}, {0.9f, 0.2f, 0.2f});
  const TwoBlobStub stub{img};
  const auto live = iterative_masking(stub, img, 2, 0.5);
  const auto replay = guidance_from_maps(live.maps, 0.5);
  CHECK(replay.bits == live.bits);
  CHECK(replay.soft == live.soft);
}

TEST_CASE("soft guidance is the elementwise max of normalized maps") {
  std::vector<ActivationMap> maps = {make_map(1, 3, {2, 1, 0}), make_map(1, 3, {0, 0.5f, 1})};
  maps[1].iteration = 1;
  const auto g = guidance_from_maps(maps, 0.5);
  CHECK(g.soft.at(0, 0) == 1.0f);
  CHECK(g.soft.at(0, 1) == 0.5f);
  CHECK(g.soft.at(0, 2) == 1.0f);
  CHECK(count_set(g.bits) == 3);
}

TEST_CASE("AMAP containers round-trip and number iterations per category") {
  std::vector<ActivationMap> maps = {make_map(2, 3, {0, 1, 2, 3, 4, 5}, 4), make_map(1, 1, {0.5f}, 7),
                                     make_map(2, 3, {5, 4, 3, 2, 1, 0}, 4)};
  std::stringstream buf;
  write_amap(buf, maps);
  const std::string bytes = buf.str();
  CHECK(bytes.substr(0, 4) == "AMAP");
  std::stringstream in(bytes);
  const auto back = read_amap(in);
  REQUIRE(back.size() == 3);
  CHECK(back[0].values == maps[0].values);
  CHECK(back[0].iteration == 0);
  CHECK(back[1].iteration == 0);
  CHECK(back[2].iteration == 1);
  CHECK(back[2].category_id == 4);
}

TEST_CASE("AMAP reader rejects malformed containers") {
  std::vector<ActivationMap> maps = {make_map(1, 2, {0.5f, 1.0f})};
  std::stringstream buf;
  write_amap(buf, maps);
  const std::string bytes = buf.str();
  SUBCASE("version") {
    std::string v = bytes;
    v[4] = 2;
    std::stringstream in(v);
    CHECK_THROWS_AS(read_amap(in), VersionError);
  }
  SUBCASE("negative value") {
    std::string v = bytes;
    v[v.size() - 1] = static_cast<char>(0xBF);  // sign bit of the last f32
    std::stringstream in(v);
    CHECK_THROWS_AS(read_amap(in), FormatError);
  }
  SUBCASE("truncated") {
    std::stringstream in(bytes.substr(0, bytes.size() - 1));
    CHECK_THROWS_AS(read_amap(in), FormatError);
  }
  SUBCASE("trailing bytes") {
    std::stringstream in(bytes + "x");
    CHECK_THROWS_AS(read_amap(in), FormatError);
  }
  SUBCASE("huge grid") {
    std::string v = bytes;
    v[14] = 0x7f;  // h, low byte of a u32 after magic(4) version(2) count(4) category(4)
    v[15] = 0x7f;
    std::stringstream in(v);
    CHECK_THROWS_AS(read_amap(in), FormatError);
  }
  CHECK_THROWS_AS(validate_amap("/nonexistent/file.amap"), InvalidArgument);
}
