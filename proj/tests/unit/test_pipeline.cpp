#include <doctest.h>

#include <algorithm>
#include <filesystem>

#include "pmf/actmap/amap_io.hpp"
#include "pmf/core/errors.hpp"
#include "pmf/pipeline/manifest.hpp"
#include "pmf/pipeline/pipeline.hpp"
#include "pmf/synth/synth.hpp"
#include "pmf/vlm/aligned.hpp"

using namespace pmf;
using namespace pmf::pipeline;

namespace {

struct Fixture {
  PipelineConfig cfg;
  synth::Dataset data;
  std::vector<ImageProposals> proposals;
  std::map<int, proposal::ProposalSet> ranked;

  Fixture() {
    cfg.num_images = 6;
    cfg.seed = 21;
    cfg.wspn.iters = 150;
    cfg.wss.iters = 60;
    synth::GenerateOptions opts;
    opts.num_images = cfg.num_images;
    opts.seed = cfg.seed;
    data = synth::generate_dataset(opts, synth::default_categories());
    proposals = compute_proposals(data, cfg.seed, 1);
    const auto model = train_wspn_stage(data, proposals, cfg).model;
    ranked = rank_with_wspn(model, proposals, 100, 1);
  }
};

const Fixture& fixture() {
  static const Fixture f;
  return f;
}

}  // namespace

TEST_CASE("proposals do not depend on the worker count") {
  const auto& f = fixture();
  const auto again = compute_proposals(f.data, f.cfg.seed, 3);
  REQUIRE(again.size() == f.proposals.size());
  for (std::size_t i = 0; i < again.size(); ++i) {
    CHECK(again[i].boxes == f.proposals[i].boxes);
    CHECK(again[i].features == f.proposals[i].features);
  }
  for (const auto& [id, set] : f.ranked) CHECK(set.size() <= 100);
}

TEST_CASE("pseudo generation is identical for one and two workers") {
  const auto& f = fixture();
  const auto guidance = make_guidance_fn(f.cfg, f.data);
  const auto a = generate_pseudo_annotations(f.data, f.ranked, f.cfg, guidance, 1);
  const auto b = generate_pseudo_annotations(f.data, f.ranked, f.cfg, guidance, 2);
  CHECK(dump_annotations(a.annotations) == dump_annotations(b.annotations));
  CHECK(a.attempted == b.attempted);
  int labels = 0;
  for (const auto& s : f.data.scenes) labels += static_cast<int>(s.image_labels.size());
  CHECK(a.attempted == labels);
  CHECK(static_cast<int>(a.annotations.annotations.size() + a.skipped.size()) == labels);
  for (std::size_t i = 0; i < a.annotations.annotations.size(); ++i) {
    const auto& ann = a.annotations.annotations[i];
    CHECK(ann.id == static_cast<int>(i) + 1);
    REQUIRE(ann.provenance.has_value());
    CHECK(ann.provenance->G == f.cfg.G);
    CHECK(ann.provenance->K == f.cfg.K);
    // The pseudo-box is one of the first K ranked candidates.
    const auto& cands = f.ranked.at(ann.image_id).boxes;
    const auto end = cands.begin() + std::min<std::ptrdiff_t>(f.cfg.K, static_cast<std::ptrdiff_t>(cands.size()));
    CHECK(std::find(cands.begin(), end, ann.bbox) != end);
  }
}

TEST_CASE("stored activation maps replay the in-process run exactly") {
  const auto& f = fixture();
  const auto live = make_guidance_fn(f.cfg, f.data);
  std::map<int, std::vector<ActivationMap>> stored;
  const auto dir = std::filesystem::temp_directory_path() / "pmf_test_amap_dir";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  for (const auto& scene : f.data.scenes) {
    const auto maps = activation_maps_for_scene(live, scene);
    CHECK(maps.size() == scene.image_labels.size() * static_cast<std::size_t>(f.cfg.G + 1));
    actmap::save_amap((dir / amap_file_name(scene.image_id)).string(), maps);
  }
  stored = load_actmap_dir(dir.string());
  CHECK(stored.size() == f.data.scenes.size());
  PipelineConfig file_cfg = f.cfg;
  file_cfg.activation_source = ActivationSource::kFile;
  const auto replay = make_guidance_fn(file_cfg, f.data, &stored);
  const auto a = generate_pseudo_annotations(f.data, f.ranked, f.cfg, live, 1);
  const auto b = generate_pseudo_annotations(f.data, f.ranked, file_cfg, replay, 1);
  CHECK(dump_annotations(a.annotations) == dump_annotations(b.annotations));

  // Fewer than G+1 maps for a category is an input error.
  PipelineConfig more = file_cfg;
  more.G = f.cfg.G + 1;
  const auto short_fn = make_guidance_fn(more, f.data, &stored);
  CHECK_THROWS_AS(short_fn(f.data.scenes[0], f.data.scenes[0].image_labels[0]), InvalidArgument);
  std::filesystem::remove_all(dir);
  CHECK_THROWS_AS(load_actmap_dir(dir.string()), InvalidArgument);
}

TEST_CASE("skips are reported, not fatal") {
  const auto& f = fixture();
  PipelineConfig cfg = f.cfg;
  cfg.Z = 100000;  // every patch is too small
  const auto r = generate_pseudo_annotations(f.data, f.ranked, cfg, make_guidance_fn(cfg, f.data), 1);
  CHECK(r.annotations.annotations.empty());
  CHECK(r.skip_fraction() == 1.0);
  for (const auto& s : r.skipped) CHECK(s.reason == "patch-too-small");
}

TEST_CASE("aligned toy VLM activation peaks on the object") {
  synth::GenerateOptions opts;
  opts.num_images = 20;
  opts.seed = 8;
  const auto cats = synth::default_categories();
  const auto data = synth::generate_dataset(opts, cats);
  const auto model = vlm::build_aligned_vlm(cats, 8, 16, 8);
  int hits = 0, total = 0;
  for (const auto& scene : data.scenes) {
    for (const int cat : scene.image_labels) {
      const auto m = vlm::aligned_activation(model, scene.image, scene.image_labels, cat, 8);
      std::size_t best = 0;
      for (std::size_t i = 1; i < m.values.size(); ++i)
        if (m.values[i] > m.values[best]) best = i;
      const double cy = (static_cast<double>(best / m.values.width()) + 0.5) * 16;
      const double cx = (static_cast<double>(best % m.values.width()) + 0.5) * 16;
      bool inside = false;
      for (const auto& inst : scene.instances)
        if (inst.category_id == cat && cx >= inst.box.x - 8 && cx <= inst.box.x2() + 8 && cy >= inst.box.y - 8 &&
            cy <= inst.box.y2() + 8)
          inside = true;
      hits += inside ? 1 : 0;
      ++total;
    }
  }
  CHECK(hits >= 0.9 * total);
}

TEST_CASE("run manifests round-trip") {
  RunManifest m;
  m.command = "gen-pseudo";
  m.config.G = 2;
  m.config.seed = 77;
  m.inputs["data"] = "/tmp/data";
  m.outputs["pseudo"] = "pseudo_annotations.json";
  m.timings = {{"guidance", 0.5}, {"segment", 1.25}};
  m.summary = {{"attempted", 10}};
  const auto back = RunManifest::from_json(m.to_json());
  CHECK(back.command == m.command);
  CHECK(back.config.to_json() == m.config.to_json());
  CHECK(back.inputs == m.inputs);
  CHECK(back.outputs == m.outputs);
  CHECK(back.timings == m.timings);
  CHECK(back.summary == m.summary);
  CHECK(m.to_json().at("tool_version") == tool_version());
  auto bad = m.to_json();
  bad["manifest_version"] = 9;
  CHECK_THROWS_AS(RunManifest::from_json(bad), VersionError);
}

TEST_CASE("embedding artifacts round-trip") {
  RngStream rng(3, "t");
  const std::vector<int> ids{1, 2};
  EmbedArtifact a;
  a.space = ovc::make_space(ovc::toy_text_embeddings(ids, 4, 1), 3, rng);
  a.norm = proposal::Standardizer::identity(3);
  a.norm.mean = {0.5, -1.0, 2.0};
  const auto back = embed_artifact_from_json(embed_artifact_to_json(a));
  CHECK(back.space.category_ids == a.space.category_ids);
  CHECK(back.space.head == a.space.head);
  CHECK(back.space.class_embeddings == a.space.class_embeddings);
  CHECK(back.norm.mean == a.norm.mean);
}
