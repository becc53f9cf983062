#include "pmf/pipeline/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <set>

#include "pmf/actmap/amap_io.hpp"
#include "pmf/boxselect/boxselect.hpp"
#include "pmf/core/errors.hpp"
#include "pmf/core/parallel.hpp"
#include "pmf/proposal/features.hpp"
#include "pmf/vlm/aligned.hpp"
#include "pmf/wss/assemble.hpp"
#include "pmf/wss/points.hpp"
#include "pmf/wss/segmenter.hpp"

namespace pmf::pipeline {

std::vector<ImageProposals> compute_proposals(const synth::Dataset& data, std::uint64_t seed, int workers) {
  std::vector<ImageProposals> out(data.scenes.size());
  parallel_for(data.scenes.size(), workers, [&](std::size_t i) {
    const auto& scene = data.scenes[i];
    RngStream rng(seed, "proposal.unsupervised", static_cast<std::uint64_t>(scene.image_id));
    auto set = proposal::unsupervised_proposals(scene.image, rng);
    const proposal::BoxFeatureExtractor extractor(scene.image);
    out[i].image_id = scene.image_id;
    out[i].features = extractor.extract(set.boxes);
    out[i].boxes = std::move(set.boxes);
  });
  return out;
}

std::vector<proposal::WspnTrainImage> wspn_training_set(const synth::Dataset& data,
                                                        const std::vector<ImageProposals>& proposals,
                                                        const std::vector<int>& class_ids) {
  if (proposals.size() != data.scenes.size()) throw ShapeError("wspn_training_set: proposals do not match scenes");
  std::vector<proposal::WspnTrainImage> out;
  out.reserve(data.scenes.size());
  for (std::size_t i = 0; i < data.scenes.size(); ++i) {
    const auto& labels = data.scenes[i].image_labels;
    proposal::WspnTrainImage img;
    img.features = proposals[i].features;
    img.proposals = proposals[i].boxes;
    for (const int c : class_ids) {
      img.labels.push_back(std::binary_search(labels.begin(), labels.end(), c) ? 1 : 0);
    }
    out.push_back(std::move(img));
  }
  return out;
}

proposal::WspnTrainResult train_wspn_stage(const synth::Dataset& data, const std::vector<ImageProposals>& proposals,
                                           const PipelineConfig& config) {
  data.categories.table.require_base();
  const std::vector<int> class_ids = data.categories.table.ids(Split::kBase);
  const auto images = wspn_training_set(data, proposals, class_ids);
  RngStream rng(config.seed, "wspn.train");
  return proposal::train_wspn(images, class_ids, config.wspn, config.wspn_hidden, rng);
}

std::map<int, proposal::ProposalSet> rank_with_wspn(const proposal::WspnModel& model,
                                                    const std::vector<ImageProposals>& proposals, int keep,
                                                    int workers) {
  std::vector<proposal::ProposalSet> ranked(proposals.size());
  parallel_for(proposals.size(), workers, [&](std::size_t i) {
    const auto scores = proposal::wspn_score(model, proposals[i].features);
    ranked[i] = proposal::top_k_proposals(scores, proposals[i].boxes, keep);
  });
  std::map<int, proposal::ProposalSet> out;
  for (std::size_t i = 0; i < proposals.size(); ++i) out[proposals[i].image_id] = std::move(ranked[i]);
  return out;
}

std::map<int, std::vector<BBox>> boxes_only(const std::map<int, proposal::ProposalSet>& ranked) {
  std::map<int, std::vector<BBox>> out;
  for (const auto& [id, set] : ranked) out[id] = set.boxes;
  return out;
}

namespace {

double split_mean(const std::map<int, eval::ClassRecall>& recall, const CategoryTable& table, Split split) {
  double sum = 0.0;
  int n = 0;
  for (const auto& [c, r] : recall) {
    if (table.at(c).split != split) continue;
    sum += r.recall();
    ++n;
  }
  return n ? sum / n : 0.0;
}

}  // namespace

RecallComparison compare_proposal_recall(const synth::Dataset& data, const PipelineConfig& config, int K,
                                         int workers) {
  const auto proposals = compute_proposals(data, config.seed, workers);
  const auto wspn = train_wspn_stage(data, proposals, config);
  const auto wspn_ranked = boxes_only(rank_with_wspn(wspn.model, proposals, K, workers));

  const auto gt = data.ground_truth();
  std::vector<proposal::ProxyTrainImage> proxy_images;
  for (std::size_t i = 0; i < data.scenes.size(); ++i) {
    proposal::ProxyTrainImage img;
    img.features = proposals[i].features;
    img.proposals = proposals[i].boxes;
    for (const auto& inst : data.scenes[i].instances) {
      if (!data.categories.table.is_novel(inst.category_id)) img.base_boxes.push_back(inst.box);
    }
    proxy_images.push_back(std::move(img));
  }
  RngStream proxy_rng(config.seed, "proxy.train");
  const auto proxy = proposal::train_proxy(proxy_images, config.wspn, config.wspn_hidden, proxy_rng);
  std::vector<std::vector<BBox>> proxy_boxes(proposals.size());
  parallel_for(proposals.size(), workers, [&](std::size_t i) {
    proxy_boxes[i] = proposal::proxy_top_k(proxy.model, proposals[i].features, proposals[i].boxes, K).boxes;
  });
  std::map<int, std::vector<BBox>> proxy_ranked;
  for (std::size_t i = 0; i < proposals.size(); ++i) proxy_ranked[proposals[i].image_id] = std::move(proxy_boxes[i]);

  RecallComparison cmp;
  cmp.K = K;
  cmp.wspn = eval::recall_at_k(wspn_ranked, gt, K);
  cmp.proxy = eval::recall_at_k(proxy_ranked, gt, K);
  const auto& table = data.categories.table;
  cmp.wspn_novel = split_mean(cmp.wspn, table, Split::kNovel);
  cmp.proxy_novel = split_mean(cmp.proxy, table, Split::kNovel);
  cmp.wspn_base = split_mean(cmp.wspn, table, Split::kBase);
  cmp.proxy_base = split_mean(cmp.proxy, table, Split::kBase);
  cmp.wspn_loss = wspn.loss_curve;
  cmp.proxy_loss = proxy.loss_curve;
  return cmp;
}

nlohmann::json recall_comparison_to_json(const RecallComparison& cmp, const CategoryTable& categories) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& cat : categories.entries()) {
    const auto a = cmp.wspn.find(cat.id), b = cmp.proxy.find(cat.id);
    if (a == cmp.wspn.end() || b == cmp.proxy.end()) continue;
    rows.push_back({{"category_id", cat.id},
                    {"name", cat.name},
                    {"split", to_string(cat.split)},
                    {"num_gt", a->second.total},
                    {"wspn_recall", a->second.recall()},
                    {"proxy_recall", b->second.recall()}});
  }
  return {{"K", cmp.K},
          {"iou_threshold", eval::kMatchIou},
          {"categories", std::move(rows)},
          {"wspn_novel", cmp.wspn_novel},
          {"proxy_novel", cmp.proxy_novel},
          {"wspn_base", cmp.wspn_base},
          {"proxy_base", cmp.proxy_base},
          {"wspn_final_loss", cmp.wspn_loss.empty() ? 0.0 : cmp.wspn_loss.back()},
          {"proxy_final_loss", cmp.proxy_loss.empty() ? 0.0 : cmp.proxy_loss.back()}};
}

GuidanceFn make_guidance_fn(const PipelineConfig& config, const synth::Dataset& data,
                            const std::map<int, std::vector<ActivationMap>>* file_maps) {
  const PipelineConfig cfg = config;
  switch (config.activation_source) {
    case ActivationSource::kOracleStub:
      return [cfg](const synth::SyntheticScene& scene, int category_id) {
        synth::OracleOptions opts;
        opts.spread = cfg.oracle_spread;
        opts.noise = cfg.oracle_noise;
        opts.downsample = cfg.downsample;
        const RngStream base = RngStream(cfg.seed, "oracle", static_cast<std::uint64_t>(scene.image_id))
                                   .derive("category", static_cast<std::uint64_t>(category_id));
        auto eval = [&](const ImageGrid& image, int iteration) {
          RngStream rng = base.derive("iteration", static_cast<std::uint64_t>(iteration));
          auto map = synth::oracle_activation(scene, category_id, image, opts, rng);
          map.iteration = iteration;
          return map;
        };
        return actmap::iterative_masking(eval, scene.image, cfg.G, cfg.threshold, cfg.box_upsample);
      };
    case ActivationSource::kToyVlm: {
      auto model = std::make_shared<const vlm::AlignedVlm>(
          vlm::build_aligned_vlm(data.categories, cfg.m, cfg.downsample, cfg.seed));
      return [cfg, model](const synth::SyntheticScene& scene, int category_id) {
        auto eval = [&](const ImageGrid& image, int iteration) {
          auto map = vlm::aligned_activation(*model, image, scene.image_labels, category_id, cfg.m);
          map.iteration = iteration;
          return map;
        };
        return actmap::iterative_masking(eval, scene.image, cfg.G, cfg.threshold, cfg.box_upsample);
      };
    }
    case ActivationSource::kFile: {
      if (!file_maps) throw InvalidArgument("activation source 'file' needs activation map files");
      const auto* maps = file_maps;
      return [cfg, maps](const synth::SyntheticScene& scene, int category_id) {
        const auto it = maps->find(scene.image_id);
        if (it == maps->end()) {
          throw InvalidArgument("no activation maps for image " + std::to_string(scene.image_id));
        }
        std::vector<ActivationMap> selected;
        for (const auto& m : it->second) {
          if (m.category_id == category_id) selected.push_back(m);
        }
        if (static_cast<int>(selected.size()) < cfg.G + 1) {
          throw InvalidArgument("image " + std::to_string(scene.image_id) + " category " +
                                std::to_string(category_id) + ": " + std::to_string(selected.size()) +
                                " activation maps, need G+1 = " + std::to_string(cfg.G + 1));
        }
        selected.resize(static_cast<std::size_t>(cfg.G) + 1);
        for (std::size_t i = 0; i < selected.size(); ++i) selected[i].iteration = static_cast<int>(i);
        return actmap::guidance_from_maps(std::move(selected), cfg.threshold, cfg.box_upsample);
      };
    }
  }
  throw InvalidArgument("unknown activation source");
}

std::vector<ActivationMap> activation_maps_for_scene(const GuidanceFn& guidance, const synth::SyntheticScene& scene) {
  std::vector<ActivationMap> out;
  for (const int c : scene.image_labels) {
    auto g = guidance(scene, c);
    for (auto& m : g.maps) out.push_back(std::move(m));
  }
  return out;
}

namespace {

Grid<float> crop_grid(const Grid<float>& grid, const PixelRect& r) {
  Grid<float> out(r.height(), r.width());
  for (int y = r.y0; y < r.y1; ++y) {
    for (int x = r.x0; x < r.x1; ++x) out.at(y - r.y0, x - r.x0) = grid.at(y, x);
  }
  return out;
}

struct PairOutcome {
  int category_id = 0;
  std::optional<Annotation> annotation;
  std::string skip_reason;
};

PairOutcome run_pair(const synth::SyntheticScene& scene, int category_id, std::span<const BBox> candidates,
                     const PipelineConfig& cfg, const GuidanceFn& guidance) {
  PairOutcome out;
  out.category_id = category_id;
  const int H = scene.image.height(), W = scene.image.width();
  try {
    const auto g = guidance(scene, category_id);
    boxselect::PseudoBox pb = cfg.guidance_sum == GuidanceSum::kBinary
                                  ? boxselect::select_pseudo_box(candidates, g.pixel_bits(H, W))
                                  : boxselect::select_pseudo_box(candidates, g.pixel_soft(H, W, cfg.box_upsample));
    pb.category_id = category_id;
    pb.provenance = Provenance{cfg.G, cfg.K, cfg.box_upsample, cfg.guidance_sum};
    const PixelRect rect = rasterize(pb.box, H, W);
    if (rect.empty()) {
      out.skip_reason = "empty-box";
      return out;
    }
    const ImageGrid patch = scene.image.crop(rect);
    const Grid<float> soft = crop_grid(g.pixel_soft(H, W, cfg.point_upsample), rect);
    const auto key = static_cast<std::uint64_t>(category_id);
    RngStream point_rng = RngStream(cfg.seed, "wss.points", static_cast<std::uint64_t>(scene.image_id)).derive("category", key);
    const auto labels = wss::sample_points(soft, cfg.Z, point_rng);
    RngStream seg_rng = RngStream(cfg.seed, "wss.segmenter", static_cast<std::uint64_t>(scene.image_id)).derive("category", key);
    const auto seg = wss::train_patch_segmenter(patch, labels, cfg.wss, seg_rng);
    Annotation ann = wss::assemble_pseudo_annotation(pb, seg.mask, H, W, 0, scene.image_id);
    if (ann.degenerate) {
      out.skip_reason = "empty-mask";
      return out;
    }
    out.annotation = std::move(ann);
  } catch (const NoActivationError&) {
    out.skip_reason = "no-activation";
  } catch (const PatchTooSmallError&) {
    out.skip_reason = "patch-too-small";
  } catch (const UninformativeActivationError&) {
    out.skip_reason = "uninformative-activation";
  }
  return out;
}

}  // namespace

PseudoRunResult generate_pseudo_annotations(const synth::Dataset& data,
                                            const std::map<int, proposal::ProposalSet>& ranked,
                                            const PipelineConfig& config, const GuidanceFn& guidance, int workers) {
  config.validate();
  std::vector<std::vector<PairOutcome>> per_image(data.scenes.size());
  parallel_for(data.scenes.size(), workers, [&](std::size_t i) {
    const auto& scene = data.scenes[i];
    const auto it = ranked.find(scene.image_id);
    if (it == ranked.end() || it->second.empty()) {
      throw InvalidArgument("no ranked proposals for image " + std::to_string(scene.image_id));
    }
    const std::size_t k = std::min(it->second.boxes.size(), static_cast<std::size_t>(config.K));
    const std::span<const BBox> candidates(it->second.boxes.data(), k);
    for (const int c : scene.image_labels) per_image[i].push_back(run_pair(scene, c, candidates, config, guidance));
  });

  PseudoRunResult result;
  result.annotations.images = data.image_records();
  result.annotations.categories = data.categories.table;
  int next_id = 1;
  for (std::size_t i = 0; i < per_image.size(); ++i) {
    for (auto& o : per_image[i]) {
      ++result.attempted;
      if (o.annotation) {
        o.annotation->id = next_id++;
        result.annotations.annotations.push_back(std::move(*o.annotation));
      } else {
        result.skipped.push_back({data.scenes[i].image_id, o.category_id, o.skip_reason});
      }
    }
  }
  return result;
}

double mean_best_candidate_iou(const AnnotationSet& pseudo, const AnnotationSet& gt,
                               const std::map<int, std::vector<BBox>>& ranked, int K) {
  double sum = 0.0;
  int n = 0;
  for (const auto& p : pseudo.annotations) {
    if (p.degenerate) continue;
    const auto it = ranked.find(p.image_id);
    if (it == ranked.end()) continue;
    bool has_gt = false;
    double best = 0.0;
    for (const auto& g : gt.annotations) {
      if (g.image_id != p.image_id || g.category_id != p.category_id) continue;
      has_gt = true;
      const std::size_t k = std::min(it->second.size(), static_cast<std::size_t>(K));
      for (std::size_t i = 0; i < k; ++i) best = std::max(best, iou(it->second[i], g.bbox));
    }
    if (!has_gt) continue;
    sum += best;
    ++n;
  }
  return n ? sum / n : 0.0;
}

namespace {

nlohmann::json matrix_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.data().begin(), m.data().end())}};
}

Matrix matrix_from(const nlohmann::json& j) {
  const int rows = j.at("rows").get<int>(), cols = j.at("cols").get<int>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || data.size() != static_cast<std::size_t>(rows) * cols) {
    throw FormatError("embedding head: matrix payload does not match its shape");
  }
  Matrix m(rows, cols);
  std::copy(data.begin(), data.end(), m.data().begin());
  return m;
}

}  // namespace

nlohmann::json embed_artifact_to_json(const EmbedArtifact& a) {
  return {{"version", 1},
          {"category_ids", a.space.category_ids},
          {"class_embeddings", matrix_json(a.space.class_embeddings)},
          {"background", a.space.background},
          {"head", matrix_json(a.space.head)},
          {"feature_mean", a.norm.mean},
          {"feature_std", a.norm.stddev}};
}

EmbedArtifact embed_artifact_from_json(const nlohmann::json& j) {
  try {
    if (j.at("version").get<int>() != 1) throw VersionError("embedding head", j.at("version").get<unsigned>(), 1);
    EmbedArtifact a;
    a.space.category_ids = j.at("category_ids").get<std::vector<int>>();
    a.space.class_embeddings = matrix_from(j.at("class_embeddings"));
    a.space.background = j.at("background").get<std::vector<double>>();
    a.space.head = matrix_from(j.at("head"));
    a.norm.mean = j.at("feature_mean").get<std::vector<double>>();
    a.norm.stddev = j.at("feature_std").get<std::vector<double>>();
    a.space.validate();
    if (a.norm.mean.size() != static_cast<std::size_t>(a.space.region_dim()) || a.norm.stddev.size() != a.norm.mean.size()) {
      throw FormatError("embedding head: feature normalization does not match the head");
    }
    return a;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("embedding head: ") + e.what());
  }
}

std::vector<ovc::EmbedSample> embed_samples(const synth::Dataset& data, const AnnotationSet& pseudo,
                                            const std::vector<ImageProposals>& proposals,
                                            const proposal::Standardizer& norm, const ovc::EmbeddingSpace& space,
                                            int bg_per_image, RngStream& rng) {
  if (proposals.size() != data.scenes.size()) throw ShapeError("embed_samples: proposals do not match scenes");
  std::vector<ovc::EmbedSample> out;
  for (std::size_t i = 0; i < data.scenes.size(); ++i) {
    const auto& scene = data.scenes[i];
    const auto anns = pseudo.for_image(scene.image_id);
    std::vector<BBox> boxes;
    std::vector<int> targets;
    for (const Annotation* a : anns) {
      if (a->degenerate) continue;
      boxes.push_back(a->bbox);
      targets.push_back(space.index_of(a->category_id));
    }
    std::vector<std::size_t> background;
    for (std::size_t p = 0; p < proposals[i].boxes.size(); ++p) {
      double best = 0.0;
      for (const auto& b : boxes) best = std::max(best, iou(proposals[i].boxes[p], b));
      if (best < 0.3) background.push_back(p);
    }
    rng.shuffle(std::span<std::size_t>(background));
    if (background.size() > static_cast<std::size_t>(bg_per_image)) background.resize(bg_per_image);
    std::sort(background.begin(), background.end());
    for (const std::size_t p : background) boxes.push_back(proposals[i].boxes[p]);
    if (boxes.empty()) continue;

    const proposal::BoxFeatureExtractor extractor(scene.image);
    const Matrix feats = norm.apply(extractor.extract(boxes));
    for (int r = 0; r < feats.rows(); ++r) {
      ovc::EmbedSample s;
      s.region.assign(feats.row(r).begin(), feats.row(r).end());
      s.target = r < static_cast<int>(targets.size()) ? targets[r] : -1;
      out.push_back(std::move(s));
    }
  }
  return out;
}

nlohmann::json classification_report(const EmbedArtifact& artifact, const synth::Dataset& data,
                                     const ovc::ClassifyOptions& options) {
  const auto& table = data.categories.table;
  const std::vector<int> vocabulary = artifact.space.category_ids;
  std::map<int, std::pair<int, int>> per_class;  // correct, total
  for (const auto& scene : data.scenes) {
    if (scene.instances.empty()) continue;
    std::vector<BBox> boxes;
    for (const auto& inst : scene.instances) boxes.push_back(inst.box);
    const proposal::BoxFeatureExtractor extractor(scene.image);
    const Matrix feats = artifact.norm.apply(extractor.extract(boxes));
    for (int r = 0; r < feats.rows(); ++r) {
      const int truth = scene.instances[r].category_id;
      const auto pred = ovc::classify_region(artifact.space, feats.row(r), vocabulary, options);
      auto& slot = per_class[truth];
      slot.first += (pred && *pred == truth) ? 1 : 0;
      ++slot.second;
    }
  }
  nlohmann::json rows = nlohmann::json::array();
  int correct[2] = {0, 0}, total[2] = {0, 0};
  for (const auto& [c, ct] : per_class) {
    const int s = table.is_novel(c) ? 1 : 0;
    correct[s] += ct.first;
    total[s] += ct.second;
    rows.push_back({{"category_id", c},
                    {"name", table.at(c).name},
                    {"split", to_string(table.at(c).split)},
                    {"accuracy", static_cast<double>(ct.first) / ct.second},
                    {"num_gt", ct.second}});
  }
  auto ratio = [](int a, int b) { return b ? nlohmann::json(static_cast<double>(a) / b) : nlohmann::json(nullptr); };
  return {{"bg_weight", options.bg_weight},
          {"bg_weight_mode", to_string(options.mode)},
          {"classes", std::move(rows)},
          {"base_accuracy", ratio(correct[0], total[0])},
          {"novel_accuracy", ratio(correct[1], total[1])},
          {"all_accuracy", ratio(correct[0] + correct[1], total[0] + total[1])}};
}



std::string amap_file_name(int image_id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "img_%05d.amap", image_id);
  return buf;
}

std::map<int, std::vector<ActivationMap>> load_actmap_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw InvalidArgument("activation map directory not found: " + dir);
  std::map<int, std::vector<ActivationMap>> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    int id = 0;
    char tail[8] = {0};
    if (std::sscanf(name.c_str(), "img_%d.%7s", &id, tail) != 2 || std::string(tail) != "amap") continue;
    out[id] = actmap::load_amap(entry.path().string());
  }
  if (out.empty()) throw InvalidArgument("no img_NNNNN.amap files in " + dir);
  return out;
}

}  // namespace pmf::pipeline
