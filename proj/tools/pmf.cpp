// pmf: command-line driver for the pseudo-mask generation pipeline.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "pmf/actmap/amap_io.hpp"
#include "pmf/core/annotations.hpp"
#include "pmf/core/binio.hpp"
#include "pmf/core/errors.hpp"
#include "pmf/core/parallel.hpp"
#include "pmf/eval/evalbench.hpp"
#include "pmf/ovc/cemb_io.hpp"
#include "pmf/ovc/embed_trainer.hpp"
#include "pmf/pipeline/manifest.hpp"
#include "pmf/pipeline/pipeline.hpp"
#include "pmf/proposal/wspn.hpp"
#include "pmf/synth/dataset_io.hpp"
#include "pmf/vlm/toyvlm.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitTooManySkips = 3;

/// Options shared by every subcommand. Flags override the config file.
struct Common {
  std::string config_path;
  std::uint64_t seed = 0;
  int g = 0, k = 0, z = 0;
  double threshold = 0.0;
  std::string mode;
  int workers = 0;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* g_opt = nullptr;
  CLI::Option* k_opt = nullptr;
  CLI::Option* z_opt = nullptr;
  CLI::Option* threshold_opt = nullptr;
  CLI::Option* mode_opt = nullptr;
  CLI::Option* workers_opt = nullptr;

  void attach(CLI::App* app, bool with_mode) {
    app->add_option("--config", config_path, "flat JSON config file")->check(CLI::ExistingFile);
    seed_opt = app->add_option("--seed", seed, "run seed");
    g_opt = app->add_option("--g", g, "masking iterations after the unmasked pass");
    k_opt = app->add_option("--k", k, "top proposals kept as candidates");
    z_opt = app->add_option("--z", z, "points per polarity");
    threshold_opt = app->add_option("--threshold", threshold, "activation cutoff in (0,1)");
    if (with_mode) mode_opt = app->add_option("--mode", mode, "activation source: toy-vlm | oracle-stub | file");
    workers_opt = app->add_option("--workers", workers, "worker threads (default: PMF_WORKERS or 1)");
  }

  pmf::PipelineConfig config() const {
    pmf::PipelineConfig cfg = config_path.empty() ? pmf::PipelineConfig{} : pmf::PipelineConfig::load(config_path);
    json o = json::object();
    if (seed_opt && seed_opt->count()) o["seed"] = seed;
    if (g_opt && g_opt->count()) o["G"] = g;
    if (k_opt && k_opt->count()) o["K"] = k;
    if (z_opt && z_opt->count()) o["Z"] = z;
    if (threshold_opt && threshold_opt->count()) o["threshold"] = threshold;
    if (mode_opt && mode_opt->count()) o["activation_source"] = mode;
    return cfg.merged(o);
  }

  int worker_count() const {
    if (workers_opt && workers_opt->count()) {
      if (workers < 1) throw pmf::ConfigError("workers", "must be >= 1");
      return workers;
    }
    return pmf::default_workers();
  }
};

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

void require_dir(const std::string& dir, const std::string& what) {
  if (!fs::is_directory(dir)) throw pmf::InvalidArgument(what + " directory not found: " + dir);
}

void require_file(const std::string& path, const std::string& what) {
  if (!fs::is_regular_file(path)) throw pmf::InvalidArgument(what + " not found: " + path);
}

// ---------------------------------------------------------------- synth

int run_synth(const Common& common, const std::string& out, int num_images, int image_size, double occlusion,
              CLI::Option* n_opt, CLI::Option* size_opt, CLI::Option* occ_opt) {
  json o = json::object();
  if (n_opt->count()) o["num_images"] = num_images;
  if (size_opt->count()) o["image_size"] = image_size;
  if (occ_opt->count()) o["occlusion_rate"] = occlusion;
  const pmf::PipelineConfig cfg = common.config().merged(o);
  pmf::pipeline::RunManifest manifest;
  manifest.command = "synth";
  manifest.config = cfg;
  {
    pmf::pipeline::StageTimer timer(manifest);
    timer.start("generate");
    pmf::synth::GenerateOptions opts;
    opts.num_images = cfg.num_images;
    opts.image_size = cfg.image_size;
    opts.occlusion_rate = cfg.occlusion_rate;
    opts.seed = cfg.seed;
    const auto data = pmf::synth::generate_dataset(opts, pmf::synth::default_categories(), common.worker_count());
    timer.start("write");
    pmf::synth::write_dataset(out, data);
    manifest.summary = {{"num_images", data.scenes.size()},
                        {"num_instances", data.ground_truth().annotations.size()}};
  }
  manifest.outputs = {{"annotations", pmf::synth::annotations_path(out)},
                      {"labels", pmf::synth::labels_path(out)},
                      {"scene_meta", pmf::synth::scene_meta_path(out)},
                      {"images", pmf::synth::images_dir(out)}};
  manifest.write(out);
  std::cout << "wrote " << manifest.summary["num_images"] << " images to " << out << "\n";
  return 0;
}

// ----------------------------------------------------------- train-wspn

int run_train_wspn(const Common& common, const std::string& data_dir, const std::string& out, int keep) {
  const pmf::PipelineConfig cfg = common.config();
  if (keep < 1) throw pmf::ConfigError("keep", "must be >= 1");
  require_dir(data_dir, "dataset");
  pmf::pipeline::RunManifest manifest;
  manifest.command = "train-wspn";
  manifest.config = cfg;
  manifest.inputs = {{"data", data_dir}};
  const int workers = common.worker_count();
  {
    pmf::pipeline::StageTimer timer(manifest);
    timer.start("load");
    const auto data = pmf::synth::read_dataset(data_dir);
    timer.start("proposals");
    const auto props = pmf::pipeline::compute_proposals(data, cfg.seed, workers);
    timer.start("train");
    const auto trained = pmf::pipeline::train_wspn_stage(data, props, cfg);
    timer.start("rank");
    const auto ranked = pmf::pipeline::rank_with_wspn(trained.model, props, keep, workers);
    timer.start("write");
    fs::create_directories(out);
    pmf::proposal::save_wspn(join(out, "wspn.bin"), trained.model);
    auto proposals_json = pmf::proposal::proposals_to_json(ranked);
    pmf::write_text_file(join(out, "proposals.json"), proposals_json.dump() + "\n");
    std::ostringstream curve;
    curve << "iteration,loss\n";
    for (std::size_t i = 0; i < trained.loss_curve.size(); ++i) {
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.17g", trained.loss_curve[i]);
      curve << i << ',' << buf << '\n';
    }
    pmf::write_text_file(join(out, "loss.csv"), curve.str());
    std::size_t total = 0;
    for (const auto& p : props) total += p.boxes.size();
    manifest.summary = {{"num_images", data.scenes.size()},
                        {"mean_proposals_per_image", static_cast<double>(total) / props.size()},
                        {"kept_per_image", keep},
                        {"final_loss", trained.loss_curve.empty() ? 0.0 : trained.loss_curve.back()}};
  }
  manifest.outputs = {{"model", join(out, "wspn.bin")},
                      {"proposals", join(out, "proposals.json")},
                      {"loss_curve", join(out, "loss.csv")}};
  manifest.write(out);
  std::cout << "trained WSPN; ranked proposals in " << join(out, "proposals.json") << "\n";
  return 0;
}

// ---------------------------------------------------------- gen-actmaps

int run_gen_actmaps(const Common& common, const std::string& data_dir, const std::string& in, int image_id,
                    const std::string& out) {
  const pmf::PipelineConfig cfg = common.config();
  pmf::pipeline::RunManifest manifest;
  manifest.command = "gen-actmaps";
  manifest.config = cfg;
  const std::string maps_dir = join(out, "actmaps");
  fs::create_directories(maps_dir);
  std::size_t files = 0, entries = 0;
  {
    pmf::pipeline::StageTimer timer(manifest);
    if (cfg.activation_source == pmf::ActivationSource::kFile) {
      if (in.empty()) throw pmf::InvalidArgument("--mode file needs --in <file.amap | directory>");
      manifest.inputs = {{"maps", in}};
      timer.start("import");
      std::map<int, std::vector<pmf::ActivationMap>> maps;
      if (fs::is_directory(in)) {
        maps = pmf::pipeline::load_actmap_dir(in);
      } else {
        require_file(in, "activation map file");
        if (image_id < 0) throw pmf::InvalidArgument("a single AMAP file needs --image-id");
        maps[image_id] = pmf::actmap::load_amap(in);
      }
      for (const auto& [id, list] : maps) {
        pmf::actmap::save_amap(join(maps_dir, pmf::pipeline::amap_file_name(id)), list);
        ++files;
        entries += list.size();
      }
    } else {
      require_dir(data_dir, "dataset");
      manifest.inputs = {{"data", data_dir}};
      timer.start("load");
      const auto data = pmf::synth::read_dataset(data_dir);
      timer.start("activations");
      const auto guidance = pmf::pipeline::make_guidance_fn(cfg, data);
      std::vector<std::vector<pmf::ActivationMap>> per_image(data.scenes.size());
      pmf::parallel_for(data.scenes.size(), common.worker_count(), [&](std::size_t i) {
        per_image[i] = pmf::pipeline::activation_maps_for_scene(guidance, data.scenes[i]);
      });
      timer.start("write");
      for (std::size_t i = 0; i < per_image.size(); ++i) {
        pmf::actmap::save_amap(join(maps_dir, pmf::pipeline::amap_file_name(data.scenes[i].image_id)), per_image[i]);
        ++files;
        entries += per_image[i].size();
      }
    }
  }
  manifest.outputs = {{"actmaps", maps_dir}};
  manifest.summary = {{"files", files}, {"entries", entries}, {"source", pmf::to_string(cfg.activation_source)}};
  manifest.write(out);
  std::cout << "wrote " << entries << " activation maps in " << files << " files to " << maps_dir << "\n";
  return 0;
}

// ----------------------------------------------------------- gen-pseudo

int run_gen_pseudo(const Common& common, const std::string& data_dir, const std::string& proposals_path,
                   const std::string& actmaps, const std::string& out) {
  const pmf::PipelineConfig cfg = common.config();
  require_dir(data_dir, "dataset");
  require_file(proposals_path, "proposals file");
  pmf::pipeline::RunManifest manifest;
  manifest.command = "gen-pseudo";
  manifest.config = cfg;
  manifest.inputs = {{"data", data_dir}, {"proposals", proposals_path}};
  pmf::pipeline::PseudoRunResult result;
  {
    pmf::pipeline::StageTimer timer(manifest);
    timer.start("load");
    const auto data = pmf::synth::read_dataset(data_dir);
    const auto ranked = pmf::proposal::read_proposals(proposals_path);
    std::map<int, std::vector<pmf::ActivationMap>> file_maps;
    if (cfg.activation_source == pmf::ActivationSource::kFile) {
      if (actmaps.empty()) throw pmf::InvalidArgument("--mode file needs --actmaps <directory>");
      file_maps = pmf::pipeline::load_actmap_dir(actmaps);
      manifest.inputs["actmaps"] = actmaps;
    }
    timer.start("pseudo");
    const auto guidance = pmf::pipeline::make_guidance_fn(cfg, data, &file_maps);
    result = pmf::pipeline::generate_pseudo_annotations(data, ranked, cfg, guidance, common.worker_count());
    timer.start("write");
    fs::create_directories(out);
    pmf::write_annotations(join(out, "pseudo_annotations.json"), result.annotations);
    json skips = json::array();
    for (const auto& s : result.skipped) {
      skips.push_back({{"image_id", s.image_id}, {"category_id", s.category_id}, {"reason", s.reason}});
    }
    pmf::write_text_file(join(out, "skipped.json"), skips.dump(2) + "\n");
  }
  manifest.outputs = {{"annotations", join(out, "pseudo_annotations.json")}, {"skipped", join(out, "skipped.json")}};
  manifest.summary = {{"attempted", result.attempted},
                      {"produced", result.annotations.annotations.size()},
                      {"skipped", result.skipped.size()},
                      {"skip_fraction", result.skip_fraction()},
                      {"max_skip_fraction", cfg.max_skip_fraction}};
  manifest.write(out);
  std::cout << "pseudo-annotations: " << result.annotations.annotations.size() << " of " << result.attempted
            << " (image, label) pairs, " << result.skipped.size() << " skipped\n";
  if (result.skip_fraction() > cfg.max_skip_fraction) {
    std::cerr << "error: skip fraction " << result.skip_fraction() << " exceeds max_skip_fraction "
              << cfg.max_skip_fraction << "\n";
    return kExitTooManySkips;
  }
  return 0;
}

// ---------------------------------------------------------- train-embed

int run_train_embed(const Common& common, const std::string& data_dir, const std::string& pseudo_path,
                    const std::string& cemb_path, const std::string& out, int dim) {
  const pmf::PipelineConfig cfg = common.config();
  require_dir(data_dir, "dataset");
  require_file(pseudo_path, "pseudo-annotation file");
  pmf::pipeline::RunManifest manifest;
  manifest.command = "train-embed";
  manifest.config = cfg;
  manifest.inputs = {{"data", data_dir}, {"pseudo", pseudo_path}};
  const int workers = common.worker_count();
  {
    pmf::pipeline::StageTimer timer(manifest);
    timer.start("load");
    const auto data = pmf::synth::read_dataset(data_dir);
    const auto pseudo = pmf::read_annotations(pseudo_path);
    std::vector<pmf::ovc::ClassEmbedding> classes;
    if (!cemb_path.empty()) {
      require_file(cemb_path, "class embedding file");
      classes = pmf::ovc::load_cemb(cemb_path);
      manifest.inputs["class_embeddings"] = cemb_path;
    } else {
      classes = pmf::ovc::toy_text_embeddings(data.categories.table.ids(), dim, cfg.seed);
    }
    timer.start("proposals");
    const auto props = pmf::pipeline::compute_proposals(data, cfg.seed, workers);
    std::vector<pmf::Matrix> blocks;
    for (const auto& p : props) blocks.push_back(p.features);
    timer.start("train");
    pmf::pipeline::EmbedArtifact artifact;
    artifact.norm = pmf::proposal::Standardizer::fit(blocks);
    pmf::RngStream init_rng(cfg.seed, "ovc.head_init");
    artifact.space = pmf::ovc::make_space(classes, pmf::proposal::kBoxFeatureDim, init_rng);
    pmf::RngStream sample_rng(cfg.seed, "ovc.samples");
    const auto samples = pmf::pipeline::embed_samples(data, pseudo, props, artifact.norm, artifact.space, 4, sample_rng);
    if (samples.empty()) throw pmf::InvalidArgument("no training samples: the pseudo-annotation file is empty");
    const pmf::ovc::ClassifyOptions options{cfg.bg_weight, cfg.bg_weight_mode};
    pmf::RngStream train_rng(cfg.seed, "ovc.train");
    auto trained = pmf::ovc::train_embedding_head(samples, artifact.space, cfg.embed, options, train_rng);
    artifact.space = std::move(trained.space);
    timer.start("evaluate");
    const json report = pmf::pipeline::classification_report(artifact, data, options);
    timer.start("write");
    fs::create_directories(out);
    pmf::write_text_file(join(out, "embed_head.json"), pmf::pipeline::embed_artifact_to_json(artifact).dump() + "\n");
    pmf::ovc::save_cemb(join(out, "class_embeddings.cemb"), classes);
    pmf::write_text_file(join(out, "classification.json"), report.dump(2) + "\n");
    manifest.summary = {{"samples", samples.size()},
                        {"final_loss", trained.loss_curve.empty() ? 0.0 : trained.loss_curve.back()},
                        {"base_accuracy", report.at("base_accuracy")},
                        {"novel_accuracy", report.at("novel_accuracy")}};
  }
  manifest.outputs = {{"head", join(out, "embed_head.json")},
                      {"class_embeddings", join(out, "class_embeddings.cemb")},
                      {"classification", join(out, "classification.json")}};
  manifest.write(out);
  std::cout << "embedding head trained; GT-box accuracy base=" << manifest.summary["base_accuracy"]
            << " novel=" << manifest.summary["novel_accuracy"] << "\n";
  return 0;
}

// ----------------------------------------------------------------- eval

int run_eval(const Common& common, const std::string& pred, const std::string& gt_path, const std::string& setting,
             const std::string& proposals_path, bool compare, const std::string& data_dir, const std::string& out) {
  const pmf::PipelineConfig cfg = common.config();
  pmf::pipeline::RunManifest manifest;
  manifest.command = "eval";
  manifest.config = cfg;
  fs::create_directories(out);
  pmf::pipeline::StageTimer timer(manifest);
  if (compare) {
    require_dir(data_dir, "dataset");
    manifest.inputs = {{"data", data_dir}};
    timer.start("load");
    const auto data = pmf::synth::read_dataset(data_dir);
    timer.start("compare");
    const auto cmp = pmf::pipeline::compare_proposal_recall(data, cfg, cfg.K, common.worker_count());
    timer.start("write");
    const json j = pmf::pipeline::recall_comparison_to_json(cmp, data.categories.table);
    pmf::write_text_file(join(out, "recall_comparison.json"), j.dump(2) + "\n");
    pmf::write_text_file(join(out, "recall_by_category.csv"),
                         pmf::eval::recall_comparison_csv(data.categories.table, "wspn", cmp.wspn, "proxy", cmp.proxy));
    timer.stop();
    manifest.outputs = {{"json", join(out, "recall_comparison.json")}, {"csv", join(out, "recall_by_category.csv")}};
    manifest.summary = {{"wspn_novel_recall", cmp.wspn_novel}, {"proxy_novel_recall", cmp.proxy_novel}};
    manifest.write(out);
    std::cout << "recall@" << cfg.K << " novel: wspn=" << cmp.wspn_novel << " proxy=" << cmp.proxy_novel << "\n";
    return 0;
  }

  if (pred.empty() || gt_path.empty()) throw pmf::InvalidArgument("eval needs --pred and --gt");
  require_file(pred, "prediction file");
  require_file(gt_path, "ground-truth file");
  manifest.inputs = {{"pred", pred}, {"gt", gt_path}};
  timer.start("load");
  const auto predictions = pmf::read_annotations(pred);
  const auto gt = pmf::read_annotations(gt_path);
  const auto mode = pmf::eval::parse_setting(setting);
  std::map<int, std::vector<pmf::BBox>> ranked;
  if (!proposals_path.empty()) {
    require_file(proposals_path, "proposals file");
    ranked = pmf::pipeline::boxes_only(pmf::proposal::read_proposals(proposals_path));
    manifest.inputs["proposals"] = proposals_path;
  }
  timer.start("evaluate");
  const auto report = pmf::eval::split_eval(predictions, gt, mode, ranked.empty() ? nullptr : &ranked, cfg.K);
  json j = pmf::eval::report_to_json(report, gt.categories);
  const auto quality = pmf::eval::pseudo_quality(predictions, gt);
  j["pseudo_quality"] = {{"evaluated", quality.evaluated},
                         {"skipped", quality.skipped},
                         {"mean_box_iou", quality.mean_box_iou},
                         {"mean_mask_iou", quality.mean_mask_iou}};
  if (!ranked.empty()) {
    j["pseudo_quality"]["mean_best_candidate_iou"] = pmf::pipeline::mean_best_candidate_iou(predictions, gt, ranked, cfg.K);
  }
  timer.start("write");
  pmf::write_text_file(join(out, "report.json"), j.dump(2) + "\n");
  pmf::write_text_file(join(out, "report.csv"), pmf::eval::report_to_csv(report, gt.categories));
  timer.stop();
  manifest.outputs = {{"json", join(out, "report.json")}, {"csv", join(out, "report.csv")}};
  manifest.summary = {{"setting", setting}, {"map50_box", j["map50_box"]}, {"map50_mask", j["map50_mask"]}};
  manifest.write(out);
  std::cout << "setting=" << setting << " mAP50 box " << j["map50_box"].dump() << " mask " << j["map50_mask"].dump()
            << "\n";
  return 0;
}

// -------------------------------------------------------------- inspect

std::string read_magic(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  char buf[4] = {0, 0, 0, 0};
  in.read(buf, 4);
  return std::string(buf, static_cast<std::size_t>(in.gcount()));
}

int run_inspect(const std::string& path) {
  require_file(path, "file");
  const std::string magic = read_magic(path);
  json j;
  if (magic == "AMAP") {
    const auto maps = pmf::actmap::load_amap(path);
    json entries = json::array();
    for (const auto& m : maps) {
      float peak = 0.0f;
      for (const float v : m.values.values()) peak = std::max(peak, v);
      entries.push_back({{"category_id", m.category_id}, {"iteration", m.iteration}, {"h", m.height()},
                         {"w", m.width()}, {"max", peak}});
    }
    j = {{"format", "AMAP"}, {"entries", std::move(entries)}};
  } else if (magic == "CEMB") {
    const auto embs = pmf::ovc::load_cemb(path);
    json entries = json::array();
    for (const auto& e : embs) entries.push_back({{"category_id", e.category_id}, {"dim", e.vector.size()}});
    j = {{"format", "CEMB"}, {"entries", std::move(entries)}};
  } else if (magic == "TVLM") {
    const auto p = pmf::vlm::load_vlm(path);
    j = {{"format", "TVLM"}, {"layers", p.num_layers()}, {"dim", p.dim}, {"vocab", p.token_embeddings.rows()}};
  } else if (magic == "WSPN") {
    const auto m = pmf::proposal::load_wspn(path);
    j = {{"format", "WSPN"}, {"input_dim", m.input_dim()}, {"hidden", m.hidden_dim()}, {"class_ids", m.class_ids}};
  } else {
    const json doc = pmf::read_json_file(path);
    if (doc.is_object() && doc.contains("manifest_version")) {
      const auto m = pmf::pipeline::RunManifest::from_json(doc);
      j = {{"format", "manifest"}, {"command", m.command}, {"seed", m.config.seed}, {"summary", m.summary}};
    } else if (doc.is_object() && doc.contains("annotations")) {
      const auto set = pmf::AnnotationSet::from_json(doc);
      std::size_t degenerate = 0;
      for (const auto& a : set.annotations) degenerate += a.degenerate ? 1 : 0;
      j = {{"format", "annotations"}, {"images", set.images.size()}, {"categories", set.categories.size()},
           {"annotations", set.annotations.size()}, {"degenerate", degenerate}};
    } else if (doc.is_object() && doc.contains("images") && doc.contains("categories")) {
      const auto set = pmf::LabelSet::from_json(doc);
      j = {{"format", "labels"}, {"images", set.images.size()}, {"categories", set.categories.size()}};
    } else if (doc.is_object() && doc.contains("source") && doc.contains("images")) {
      const auto props = pmf::proposal::proposals_from_json(doc);
      std::size_t total = 0;
      for (const auto& [id, p] : props) total += p.size();
      j = {{"format", "proposals"}, {"images", props.size()}, {"proposals", total}};
    } else if (doc.is_object() && doc.contains("version")) {
      j = {{"format", "config"}, {"config", pmf::PipelineConfig::from_json(doc).to_json()}};
    } else {
      throw pmf::FormatError("unrecognized file: " + path);
    }
  }
  std::cout << j.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pseudo-mask generation engine"};
  app.require_subcommand(1);
  app.set_version_flag("--version", pmf::pipeline::tool_version());

  Common synth_c, wspn_c, act_c, pseudo_c, embed_c, eval_c;

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth_c.attach(synth, false);
  std::string synth_out;
  int num_images = 50, image_size = 128;
  double occlusion = 0.0;
  synth->add_option("--out", synth_out, "output dataset directory")->required();
  auto* n_opt = synth->add_option("--num-images", num_images, "number of images");
  auto* size_opt = synth->add_option("--image-size", image_size, "image side in pixels");
  auto* occ_opt = synth->add_option("--occlusion", occlusion, "probability an instance may overlap others");

  auto* wspn = app.add_subcommand("train-wspn", "train the weakly-supervised proposal network");
  wspn_c.attach(wspn, false);
  std::string wspn_data, wspn_out;
  int keep = 300;
  wspn->add_option("--data", wspn_data, "dataset directory")->required();
  wspn->add_option("--out", wspn_out, "output directory")->required();
  wspn->add_option("--keep", keep, "ranked proposals written per image");

  auto* act = app.add_subcommand("gen-actmaps", "compute or import activation maps (AMAP)");
  act_c.attach(act, true);
  std::string act_data, act_in, act_out;
  int act_image = -1;
  act->add_option("--data", act_data, "dataset directory (toy-vlm / oracle-stub)");
  act->add_option("--in", act_in, "AMAP file or directory to import (file mode)");
  act->add_option("--image-id", act_image, "image id of a single imported AMAP file");
  act->add_option("--out", act_out, "output directory")->required();

  auto* pseudo = app.add_subcommand("gen-pseudo", "generate pseudo box and mask annotations");
  pseudo_c.attach(pseudo, true);
  std::string pseudo_data, pseudo_props, pseudo_maps, pseudo_out;
  pseudo->add_option("--data", pseudo_data, "dataset directory")->required();
  pseudo->add_option("--proposals", pseudo_props, "ranked proposals from train-wspn")->required();
  pseudo->add_option("--actmaps", pseudo_maps, "activation map directory (file mode)");
  pseudo->add_option("--out", pseudo_out, "output directory")->required();

  auto* embed = app.add_subcommand("train-embed", "train the open-vocabulary embedding head");
  embed_c.attach(embed, false);
  std::string embed_data, embed_pseudo, embed_cemb, embed_out;
  int embed_dim = 16;
  embed->add_option("--data", embed_data, "dataset directory")->required();
  embed->add_option("--pseudo", embed_pseudo, "pseudo-annotation file")->required();
  embed->add_option("--cemb", embed_cemb, "class embeddings (CEMB); default: toy text embeddings");
  embed->add_option("--dim", embed_dim, "toy text embedding dimension");
  embed->add_option("--out", embed_out, "output directory")->required();

  auto* ev = app.add_subcommand("eval", "score predictions or compare proposal recall");
  eval_c.attach(ev, false);
  std::string eval_pred, eval_gt, eval_setting = "generalized", eval_props, eval_data, eval_out;
  bool compare = false;
  ev->add_option("--pred", eval_pred, "predicted annotations");
  ev->add_option("--gt", eval_gt, "ground-truth annotations");
  ev->add_option("--setting", eval_setting, "constrained | generalized");
  ev->add_option("--proposals", eval_props, "ranked proposals for recall@K");
  ev->add_flag("--compare-proposals", compare, "WSPN vs supervised proxy recall@K per category");
  ev->add_option("--data", eval_data, "dataset directory (--compare-proposals)");
  ev->add_option("--out", eval_out, "output directory")->required();

  auto* inspect = app.add_subcommand("inspect", "summarize any artifact file");
  std::string inspect_path;
  inspect->add_option("path", inspect_path, "file to inspect")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (*synth) return run_synth(synth_c, synth_out, num_images, image_size, occlusion, n_opt, size_opt, occ_opt);
    if (*wspn) return run_train_wspn(wspn_c, wspn_data, wspn_out, keep);
    if (*act) return run_gen_actmaps(act_c, act_data, act_in, act_image, act_out);
    if (*pseudo) return run_gen_pseudo(pseudo_c, pseudo_data, pseudo_props, pseudo_maps, pseudo_out);
    if (*embed) return run_train_embed(embed_c, embed_data, embed_pseudo, embed_cemb, embed_out, embed_dim);
    if (*ev) return run_eval(eval_c, eval_pred, eval_gt, eval_setting, eval_props, compare, eval_data, eval_out);
    if (*inspect) return run_inspect(inspect_path);
  } catch (const pmf::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
