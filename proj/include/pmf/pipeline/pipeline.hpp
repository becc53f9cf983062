#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "pmf/actmap/actmap.hpp"
#include "pmf/core/annotations.hpp"
#include "pmf/core/config.hpp"
#include "pmf/eval/evalbench.hpp"
#include "pmf/ovc/embed_trainer.hpp"
#include "pmf/proposal/supervised_proxy.hpp"
#include "pmf/proposal/wspn.hpp"
#include "pmf/synth/synth.hpp"

namespace pmf::pipeline {

/// Unsupervised proposals of one image with their raw box features.
struct ImageProposals {
  int image_id = 0;
  std::vector<BBox> boxes;
  Matrix features;
};

/// One entry per scene, in dataset order. Each image draws from its own
/// stream, so the result does not depend on `workers`.
std::vector<ImageProposals> compute_proposals(const synth::Dataset& data, std::uint64_t seed, int workers);

/// Image-level label vectors over the base vocabulary; novel labels are
/// dropped.
std::vector<proposal::WspnTrainImage> wspn_training_set(const synth::Dataset& data,
                                                        const std::vector<ImageProposals>& proposals,
                                                        const std::vector<int>& class_ids);

proposal::WspnTrainResult train_wspn_stage(const synth::Dataset& data, const std::vector<ImageProposals>& proposals,
                                           const PipelineConfig& config);

/// Proposals of every image ranked by WSPN confidence, truncated to `keep`.
std::map<int, proposal::ProposalSet> rank_with_wspn(const proposal::WspnModel& model,
                                                    const std::vector<ImageProposals>& proposals, int keep,
                                                    int workers);

std::map<int, std::vector<BBox>> boxes_only(const std::map<int, proposal::ProposalSet>& ranked);

/// WSPN (image labels only) against the supervised proxy (base boxes only):
/// per-category recall@K over every image of the dataset.
struct RecallComparison {
  int K = 0;
  std::map<int, eval::ClassRecall> wspn;
  std::map<int, eval::ClassRecall> proxy;
  double wspn_novel = 0.0;
  double proxy_novel = 0.0;
  double wspn_base = 0.0;
  double proxy_base = 0.0;
  std::vector<double> wspn_loss;
  std::vector<double> proxy_loss;
};

RecallComparison compare_proposal_recall(const synth::Dataset& data, const PipelineConfig& config, int K,
                                         int workers);
nlohmann::json recall_comparison_to_json(const RecallComparison& cmp, const CategoryTable& categories);

/// Union guidance for one (scene, category).
using GuidanceFn = std::function<actmap::GuidanceMap(const synth::SyntheticScene& scene, int category_id)>;

/// oracle-stub and toy-vlm run iterative masking in process; file replays
/// `file_maps` (image id -> G+1 maps per category, in iteration order).
GuidanceFn make_guidance_fn(const PipelineConfig& config, const synth::Dataset& data,
                            const std::map<int, std::vector<ActivationMap>>* file_maps = nullptr);

/// The G+1 per-iteration maps of every label of one scene, grouped by
/// category in label order (the AMAP entry order).
std::vector<ActivationMap> activation_maps_for_scene(const GuidanceFn& guidance, const synth::SyntheticScene& scene);

struct SkipRecord {
  int image_id = 0;
  int category_id = 0;
  std::string reason;
};

struct PseudoRunResult {
  AnnotationSet annotations;
  std::vector<SkipRecord> skipped;
  int attempted = 0;

  double skip_fraction() const noexcept {
    return attempted ? static_cast<double>(skipped.size()) / attempted : 0.0;
  }
};

/// For every (image, label): guidance -> pseudo-box among the first K ranked
/// proposals -> point labels -> patch segmenter -> annotation. Pairs that
/// hit a typed degenerate-input error or yield an empty mask are skipped.
/// Annotation ids run from 1 in (image, category) order.
PseudoRunResult generate_pseudo_annotations(const synth::Dataset& data,
                                            const std::map<int, proposal::ProposalSet>& ranked,
                                            const PipelineConfig& config, const GuidanceFn& guidance, int workers);

/// Mean over pseudo-annotations of the best IoU any of the first K
/// candidates reaches with a GT instance of the same (image, category):
/// an upper bound on the mean pseudo-box IoU.
double mean_best_candidate_iou(const AnnotationSet& pseudo, const AnnotationSet& gt,
                               const std::map<int, std::vector<BBox>>& ranked, int K);

/// Trained region classifier with the feature normalization it expects.
struct EmbedArtifact {
  ovc::EmbeddingSpace space;
  proposal::Standardizer norm;
};

nlohmann::json embed_artifact_to_json(const EmbedArtifact& artifact);
EmbedArtifact embed_artifact_from_json(const nlohmann::json& j);

/// Pseudo-boxes pull their region toward their category; up to
/// `bg_per_image` proposals overlapping no pseudo-box (IoU < 0.3) push
/// toward background.
std::vector<ovc::EmbedSample> embed_samples(const synth::Dataset& data, const AnnotationSet& pseudo,
                                            const std::vector<ImageProposals>& proposals,
                                            const proposal::Standardizer& norm, const ovc::EmbeddingSpace& space,
                                            int bg_per_image, RngStream& rng);

/// Classifies every GT box over the full vocabulary; accuracy per split.
nlohmann::json classification_report(const EmbedArtifact& artifact, const synth::Dataset& data,
                                     const ovc::ClassifyOptions& options);


/// img_NNNNN.amap
std::string amap_file_name(int image_id);
/// Every img_NNNNN.amap in `dir`, keyed by image id. Throws InvalidArgument
/// when the directory is missing or holds no maps.
std::map<int, std::vector<ActivationMap>> load_actmap_dir(const std::string& dir);

}  // namespace pmf::pipeline
