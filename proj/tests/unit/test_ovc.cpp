#include <doctest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "pmf/core/errors.hpp"
#include "pmf/ovc/cemb_io.hpp"
#include "pmf/ovc/embed_trainer.hpp"
#include "pmf/ovc/ovclassify.hpp"
#include "pmf/ovc/prompts.hpp"
#include "test_support.hpp"

using namespace pmf;
using namespace pmf::ovc;

namespace {

// Space whose head is the identity, so the region vector is the embedding.
EmbeddingSpace identity_space(const std::vector<std::vector<double>>& classes, std::vector<double> bg) {
  EmbeddingSpace s;
  const int d = static_cast<int>(bg.size());
  s.class_embeddings = Matrix(static_cast<int>(classes.size()), d);
  for (std::size_t c = 0; c < classes.size(); ++c) {
    s.category_ids.push_back(static_cast<int>(c) + 1);
    for (int k = 0; k < d; ++k) s.class_embeddings(static_cast<int>(c), k) = classes[c][k];
  }
  s.background = std::move(bg);
  s.head = Matrix::identity(d);
  return s;
}

EmbeddingSpace random_space(RngStream& rng, int C, int d, int region_dim, double scale) {
  EmbeddingSpace s;
  s.class_embeddings = Matrix(C, d);
  for (int c = 0; c < C; ++c) s.category_ids.push_back(10 + c);
  for (auto& v : s.class_embeddings.data()) v = rng.normal(0.0, scale);
  s.background.resize(d);
  for (auto& v : s.background) v = rng.normal(0.0, scale);
  s.head = Matrix(d, region_dim);
  for (auto& v : s.head.data()) v = rng.normal(0.0, 1.0);
  return s;
}

std::size_t count_joins(const std::string& s) {
  std::size_t n = 0;
  for (auto p = s.find(" and "); p != std::string::npos; p = s.find(" and ", p + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("region probabilities: hand instances") {
  SUBCASE("zero embeddings are uniform") {
    const auto s = identity_space({{0, 0}, {0, 0}, {0, 0}}, {0, 0});
    const std::vector<double> r{0.3, -1.2};
    for (const double p : region_class_probs(s, r)) CHECK(p == doctest::Approx(0.25));
  }
  SUBCASE("saturation") {
    const auto s = identity_space({{50}, {0}}, {0});
    const std::vector<double> r{1.0};
    const auto p = region_class_probs(s, r);
    CHECK(p[1] >= 1.0 - 1e-15);
    CHECK(p[0] < 1e-20);
  }
  SUBCASE("softmax of 0, 1, 2, 3") {
    const auto s = identity_space({{1}, {2}, {3}}, {0});
    const std::vector<double> r{1.0};
    const auto p = region_class_probs(s, r);
    const double z = 1.0 + std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
    CHECK(p[0] == doctest::Approx(1.0 / z).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(std::exp(1.0) / z).epsilon(1e-12));
    CHECK(p[2] == doctest::Approx(std::exp(2.0) / z).epsilon(1e-12));
    CHECK(p[3] == doctest::Approx(std::exp(3.0) / z).epsilon(1e-12));
  }
  SUBCASE("dot products of +-700 stay finite") {
    const auto s = identity_space({{700}, {-700}, {699}}, {-700});
    const std::vector<double> r{1.0};
    const auto p = region_class_probs(s, r);
    double sum = 0.0;
    for (const double v : p) {
      CHECK(std::isfinite(v));
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p[1] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
  }
}

TEST_CASE("region probabilities normalize over random spaces") {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    RngStream rng(seed, "test.eq");
    const int C = 1 + static_cast<int>(seed % 12);
    const double scale = seed % 4 == 0 ? 60.0 : 1.0;  // large scales push dots toward +-700
    const auto s = random_space(rng, C, 4, 3, scale);
    std::vector<double> r(3);
    for (auto& v : r) v = rng.normal(0.0, seed % 4 == 0 ? 3.0 : 1.0);
    const auto p = region_class_probs(s, r);
    REQUIRE(p.size() == static_cast<std::size_t>(C + 1));
    double sum = 0.0;
    for (const double v : p) {
      CHECK(std::isfinite(v));
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) <= 1e-6);
  }
}

TEST_CASE("classify_region") {
  SUBCASE("singleton vocabulary") {
    const auto s = identity_space({{1.0}, {5.0}}, {0.0});
    const std::vector<double> r{1.0};
    const std::vector<int> vocab{1};
    CHECK(classify_region(s, r, vocab) == 1);
    const std::vector<double> neg{-5.0};
    CHECK_FALSE(classify_region(s, neg, vocab).has_value());
  }
  SUBCASE("positive rescaling keeps the argmax") {
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      RngStream rng(seed, "test.scale");
      auto s = random_space(rng, 5, 4, 4, 1.0);
      std::vector<double> r(4);
      for (auto& v : r) v = rng.normal();
      const std::vector<int> vocab{10, 11, 12, 13, 14};
      const ClassifyOptions plain{1.0, BgWeightMode::kLogit};
      const auto before = classify_region(s, r, vocab, plain);
      const double k = rng.uniform(0.1, 10.0);
      for (auto& v : s.class_embeddings.data()) v *= k;
      for (auto& v : s.background) v *= k;
      CHECK(classify_region(s, r, vocab, plain) == before);
    }
  }
  SUBCASE("brute-force argmax over a restricted vocabulary") {
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
      RngStream rng(seed, "test.argmax");
      const auto s = random_space(rng, 6, 5, 3, 1.0);
      std::vector<double> r(3);
      for (auto& v : r) v = rng.normal();
      std::vector<int> vocab;
      for (int c = 0; c < 6; ++c)
        if (rng.bernoulli(0.5)) vocab.push_back(10 + c);
      if (vocab.empty()) vocab.push_back(12);
      const double w = rng.uniform(0.05, 2.0);
      const auto e = matvec(s.head, r);
      double best = dot(e, s.background) + std::log(w);
      std::optional<int> want;
      for (const int id : vocab) {
        const double v = dot(e, s.class_embeddings.row(id - 10));
        if (v > best) best = v, want = id;
      }
      CHECK(classify_region(s, r, vocab, {w, BgWeightMode::kLogit}) == want);
    }
  }
  SUBCASE("bg weight only moves the background threshold") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      RngStream rng(seed, "test.bgw");
      const auto s = random_space(rng, 4, 4, 4, 1.0);
      std::vector<double> r(4);
      for (auto& v : r) v = rng.normal();
      const std::vector<int> vocab{10, 11, 12, 13};
      const auto low = classify_region(s, r, vocab, {1e-9, BgWeightMode::kLogit});
      const auto loss_mode = classify_region(s, r, vocab, {0.2, BgWeightMode::kLoss});
      const auto one = classify_region(s, r, vocab, {1.0, BgWeightMode::kLogit});
      CHECK(loss_mode == one);
      const auto mid = classify_region(s, r, vocab, {0.2, BgWeightMode::kLogit});
      if (mid) CHECK(mid == low);
    }
  }
  SUBCASE("errors") {
    const auto s = identity_space({{1.0}}, {0.0});
    const std::vector<double> r{1.0};
    CHECK_THROWS_AS(classify_region(s, r, std::vector<int>{}), InvalidArgument);
    CHECK_THROWS_AS(classify_region(s, r, std::vector<int>{99}), InvalidArgument);
  }
}

TEST_CASE("pseudo captions") {
  const std::vector<std::string> zg{"zebra", "giraffe"};
  CHECK(fill_template("A photo of {} in the scene.", zg) == "A photo of zebra and giraffe in the scene.");
  CHECK(fill_template("a black and white photo of the {}.", zg) == "a black and white photo of the zebra and giraffe.");
  CHECK(fill_template("a photo of one {} in the scene.", zg) == "a photo of one zebra and giraffe in the scene.");
  const std::vector<std::string> apple{"apple"};
  CHECK(fill_template("a photo of {article} {}.", apple) == "a photo of an apple.");
  CHECK(fill_template("a photo of {article} {}.", zg) == "a photo of a zebra and giraffe.");
  CHECK_THROWS_AS(fill_template("a photo of {}.", std::vector<std::string>{}), InvalidArgument);
  CHECK_THROWS_AS(validate_template("no slot here"), InvalidArgument);
  CHECK_THROWS_AS(validate_template("{} and {}"), InvalidArgument);

  REQUIRE(prompt_templates().size() == kNumPromptTemplates);
  RngStream rng(0, "test.captions");
  std::set<std::size_t> seen;
  const std::vector<std::string> one{"disc"};
  for (int i = 0; i < 1000; ++i) {
    const auto cap = pseudo_caption(one, rng);
    CHECK(count_joins(cap.text) == count_joins(prompt_templates()[cap.template_id]));
    CHECK(cap.text.find("disc") != std::string::npos);
    CHECK(cap.text == fill_template(prompt_templates()[cap.template_id], one));
    seen.insert(cap.template_id);
  }
  CHECK(seen.size() == kNumPromptTemplates);
  RngStream a(4, "c"), b(4, "c");
  CHECK(pseudo_caption(zg, a).text == pseudo_caption(zg, b).text);
  CHECK_THROWS_AS(pseudo_caption(std::vector<std::string>{}, a), InvalidArgument);
}

TEST_CASE("CEMB containers") {
  const std::vector<ClassEmbedding> entries{{3, {0.5, -1.0, 2.0}}, {9, {0.0, 0.25, -0.125}}};
  std::stringstream buf;
  write_cemb(buf, entries);
  CHECK(buf.str().substr(0, 4) == "CEMB");
  const auto back = read_cemb(buf);
  CHECK(back == entries);

  std::stringstream dup;
  CHECK_THROWS_AS(write_cemb(dup, {{1, {1.0}}, {1, {2.0}}}), InvalidArgument);
  CHECK_THROWS_AS(write_cemb(dup, {{1, {1.0}}, {2, {2.0, 3.0}}}), ShapeError);

  // Hand-built container with a duplicated id.
  std::string bytes = buf.str();
  bytes[10] = 9;  // first entry's category id, after magic(4) version(2) count(4)
  std::stringstream in(bytes);
  CHECK_THROWS_AS(read_cemb(in), FormatError);
  std::string ver = buf.str();
  ver[4] = 7;
  std::stringstream vin(ver);
  CHECK_THROWS_AS(read_cemb(vin), VersionError);
  CHECK_THROWS_AS(load_cemb("/nonexistent.cemb"), InvalidArgument);
}

TEST_CASE("toy text embeddings are unit norm and deterministic") {
  const std::vector<int> ids{1, 2, 5};
  const auto a = toy_text_embeddings(ids, 16, 3), b = toy_text_embeddings(ids, 16, 3);
  CHECK(a == b);
  for (const auto& e : a) {
    double n = 0.0;
    for (const double v : e.vector) n += v * v;
    CHECK(n == doctest::Approx(1.0));
  }
}

TEST_CASE("embedding head gradient matches finite differences") {
  for (const auto mode : {BgWeightMode::kLogit, BgWeightMode::kLoss}) {
    RngStream rng(5, "test.embed.fd");
    const std::vector<int> ids{1, 2, 3};
    EmbeddingSpace s = make_space(toy_text_embeddings(ids, 6, 1), 5, rng);
    for (auto& v : s.background) v = rng.normal(0.0, 0.3);
    std::vector<EmbedSample> samples;
    for (int i = 0; i < 12; ++i) {
      EmbedSample e;
      e.region.resize(5);
      for (auto& v : e.region) v = rng.normal();
      e.target = i % 4 - 1;
      samples.push_back(e);
    }
    const ClassifyOptions opts{0.2, mode};
    const auto g = embed_loss_gradient(s, samples, opts);
    const double eps = 1e-6;
    auto probe = [&](std::span<double> values, std::span<const double> grads) {
      for (std::size_t i = 0; i < values.size(); ++i) {
        const double orig = values[i];
        values[i] = orig + eps;
        const double up = embed_loss(s, samples, opts);
        values[i] = orig - eps;
        const double down = embed_loss(s, samples, opts);
        values[i] = orig;
        CHECK((up - down) / (2 * eps) == doctest::Approx(grads[i]).epsilon(1e-5));
      }
    };
    probe(s.head.data(), g.head.data());
    probe(s.background, g.background);
  }
}

TEST_CASE("embedding head training reduces the loss") {
  RngStream rng(6, "test.embed.train");
  const std::vector<int> ids{1, 2, 3};
  const auto classes = toy_text_embeddings(ids, 8, 2);
  std::vector<EmbedSample> samples;
  for (int i = 0; i < 300; ++i) {
    EmbedSample e;
    e.target = i % 4 - 1;
    e.region.assign(6, 0.0);
    for (auto& v : e.region) v = rng.normal(0.0, 0.3);
    if (e.target >= 0) e.region[static_cast<std::size_t>(e.target)] += 2.0;
    samples.push_back(e);
  }
  RngStream init(7, "init"), train(7, "train");
  const auto space = make_space(classes, 6, init);
  const ClassifyOptions opts;
  const auto r = train_embedding_head(samples, space, {1500, 0.05, 1e-4, 0.9}, opts, train);
  CHECK(embed_loss(r.space, samples, opts) < 0.5 * embed_loss(space, samples, opts));
  CHECK(r.space.class_embeddings == space.class_embeddings);
  int correct = 0, total = 0;
  const std::vector<int> vocab{1, 2, 3};
  for (const auto& e : samples) {
    if (e.target < 0) continue;
    ++total;
    correct += classify_region(r.space, e.region, vocab, {1.0, BgWeightMode::kLogit}) == e.target + 1 ? 1 : 0;
  }
  CHECK(correct > 0.9 * total);
}
