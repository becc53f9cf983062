#include <doctest.h>

#include <cmath>

#include "pmf/boxselect/boxselect.hpp"
#include "pmf/core/errors.hpp"
#include "test_support.hpp"

using namespace pmf;
using namespace pmf::boxselect;

namespace {

// Direct pixel loop over the rasterized box.
double brute_score(const Grid<float>& g, const BBox& b) {
  const PixelRect r = rasterize(b, g.height(), g.width());
  double s = 0.0;
  for (int y = r.y0; y < r.y1; ++y)
    for (int x = r.x0; x < r.x1; ++x) s += g.at(y, x);
  return s / std::sqrt(b.w * b.h);
}

std::size_t brute_select(const std::vector<BBox>& cands, const Grid<float>& g) {
  std::size_t best = 0;
  double best_score = -1.0;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    const double s = brute_score(g, cands[i]);
    if (s > best_score || (s == best_score && cands[i].area() < cands[best].area())) {
      best = i;
      best_score = s;
    }
  }
  return best;
}

Grid<float> as_float(const BinaryGrid& b) {
  Grid<float> f(b.height(), b.width());
  for (std::size_t i = 0; i < b.size(); ++i) f[i] = b[i];
  return f;
}

}  // namespace

TEST_CASE("all-ones guidance picks the largest box") {
  const BinaryGrid ones(32, 32, 1);
  const std::vector<BBox> c{{0, 0, 4, 4}, {0, 0, 20, 20}, {2, 2, 16, 16}, {1, 1, 3, 3}};
  const auto pb = select_pseudo_box(c, ones);
  CHECK(pb.index == 1);
  CHECK(pb.box == c[1]);
  CHECK(pb.score == doctest::Approx(20.0));
}

TEST_CASE("single activated pixel picks the smallest covering box") {
  BinaryGrid g(32, 32, 0);
  g.at(10, 12) = 1;
  const std::vector<BBox> c{{0, 0, 32, 32}, {10, 8, 4, 4}, {12, 10, 1, 1}, {20, 20, 2, 2}};
  const auto pb = select_pseudo_box(c, g);
  CHECK(pb.index == 2);
  CHECK(pb.score == doctest::Approx(1.0));
}

TEST_CASE("ties go to the smaller area, then the lower index") {
  const BinaryGrid ones(16, 16, 1);
  // Both boxes score 2 (4 pixels / sqrt(4)); the duplicates tie on area too.
  const std::vector<BBox> c{{0, 0, 2, 2}, {4, 4, 2, 2}};
  CHECK(select_pseudo_box(c, ones).index == 0);
}

TEST_CASE("selection matches a brute-force oracle") {
  for (std::uint64_t seed = 0; seed < 150; ++seed) {
    RngStream rng(seed, "test.boxselect");
    const int H = 16 + static_cast<int>(seed % 40), W = 16 + static_cast<int>(seed % 33);
    const bool soft = seed % 2 == 1;
    Grid<float> g(H, W);
    for (auto& v : g.values()) v = soft ? static_cast<float>(rng.uniform()) : (rng.bernoulli(0.3) ? 1.0f : 0.0f);
    g.at(0, 0) = 1.0f;
    std::vector<BBox> cands;
    const int n = 1 + static_cast<int>(rng.uniform_int(0, 40));
    for (int i = 0; i < n; ++i) cands.push_back(test::random_box(rng, W, H, 1.0));
    const std::size_t want = brute_select(cands, g);
    if (soft) {
      CHECK(select_pseudo_box(cands, g).index == want);
    } else {
      BinaryGrid b(H, W);
      for (std::size_t i = 0; i < b.size(); ++i) b[i] = g[i] > 0.5f ? 1 : 0;
      const auto pb = select_pseudo_box(cands, b);
      CHECK(pb.index == want);
      CHECK(pb.score == doctest::Approx(brute_score(g, cands[want])));
    }
  }
}

TEST_CASE("soft selection is invariant to positive scaling") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    RngStream rng(seed, "test.scale");
    Grid<float> g(24, 24), g2(24, 24);
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] = static_cast<float>(rng.uniform());
      g2[i] = g[i] * 4.0f;  // power of two keeps float sums exact
    }
    std::vector<BBox> cands;
    for (int i = 0; i < 20; ++i) cands.push_back(test::random_box(rng, 24, 24, 1.0));
    CHECK(select_pseudo_box(cands, g).index == select_pseudo_box(cands, g2).index);
  }
}

TEST_CASE("a larger candidate set never lowers the best score") {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    RngStream rng(seed, "test.monotone");
    const auto g = test::random_mask(rng, 32, 32, 0.25);
    std::vector<BBox> cands;
    double prev = 0.0;
    for (int k = 0; k < 30; ++k) {
      cands.push_back(test::random_box(rng, 32, 32, 1.0));
      if (count_set(g) == 0) break;
      const double s = select_pseudo_box(cands, g).score;
      CHECK(s >= prev);
      prev = s;
    }
  }
}

TEST_CASE("empty guidance and empty candidates are rejected") {
  const std::vector<BBox> c{{0, 0, 4, 4}};
  CHECK_THROWS_AS(select_pseudo_box(c, BinaryGrid(8, 8, 0)), NoActivationError);
  CHECK_THROWS_AS(select_pseudo_box(c, Grid<float>(8, 8, 0.0f)), NoActivationError);
  CHECK_THROWS_AS(select_pseudo_box(std::span<const BBox>{}, BinaryGrid(8, 8, 1)), InvalidArgument);
}

TEST_CASE("integral image sums match direct sums") {
  RngStream rng(3, "test.integral");
  const auto m = test::random_mask(rng, 20, 30, 0.5);
  const IntegralImage ii(m);
  const auto f = as_float(m);
  for (int t = 0; t < 200; ++t) {
    const auto b = test::random_box(rng, 30, 20, 1.0);
    const PixelRect r = rasterize(b, 20, 30);
    double s = 0.0;
    for (int y = r.y0; y < r.y1; ++y)
      for (int x = r.x0; x < r.x1; ++x) s += f.at(y, x);
    CHECK(ii.sum(r) == s);
  }
}
