#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pmf/core/config.hpp"
#include "pmf/core/sgd.hpp"
#include "pmf/proposal/proposals.hpp"
#include "pmf/proposal/trunk.hpp"

namespace pmf::proposal {

/// Weakly-supervised proposal network: a shared hidden layer over pooled box
/// features feeding a classification head, a detection head (one logit per
/// class and proposal) and a box-regression head.
struct WspnModel {
  static constexpr std::uint16_t kVersion = 1;

  std::vector<int> class_ids;  // image-label vocabulary (base categories)
  Trunk trunk;
  Matrix w_cls;  // C x hidden
  std::vector<double> b_cls;
  Matrix w_det;  // C x hidden
  std::vector<double> b_det;
  Matrix w_reg;  // 4 x hidden
  std::vector<double> b_reg;

  int num_classes() const noexcept { return static_cast<int>(class_ids.size()); }
  int hidden_dim() const noexcept { return trunk.hidden_dim(); }
  int input_dim() const noexcept { return trunk.input_dim(); }

  static WspnModel init(std::vector<int> class_ids, int input_dim, int hidden, RngStream& rng);
  WspnModel zeros_like() const;
  void validate() const;
  /// Parameters paired with the matching tensors of `grad`.
  std::vector<ParamRef> parameters(const WspnModel& grad);
};

/// Dual-softmax scores for one image. Matrices are C x N.
struct WspnScores {
  Matrix cls;
  Matrix det;
  Matrix sigma_cls;  // softmax over classes, per proposal
  Matrix sigma_det;  // softmax over proposals, per class
  Matrix wc;         // sigma_cls * sigma_det
  std::vector<double> p;  // p_c = sum_i wc(c, i)
  Matrix reg;        // N x 4 predicted deltas
  Trunk::Activations acts;

  int num_classes() const noexcept { return cls.rows(); }
  int num_proposals() const noexcept { return cls.cols(); }
};

/// `features` holds one raw (unstandardized) feature row per proposal.
/// Throws InvalidArgument when there are no proposals.
WspnScores wspn_score(const WspnModel& model, const Matrix& features);

/// Center/size deltas (dx, dy, dw, dh) taking `from` onto `to`.
std::array<double, 4> encode_deltas(const BBox& from, const BBox& to);
BBox apply_deltas(const BBox& box, const std::array<double, 4>& deltas);

struct RegressionTargets {
  std::vector<int> seeds;           // per class: seed proposal index, -1 when absent
  std::vector<int> assigned_class;  // per proposal: class index, -1 when unassigned
  std::vector<std::array<double, 4>> deltas;  // per proposal (zero when unassigned)

  std::size_t num_assigned() const;
};

/// For each present class c the seed is argmax_i wc(c, i) (lowest index on
/// ties). Every proposal with IoU >= 0.5 to a seed regresses onto that seed's
/// box; a proposal near several seeds takes the highest IoU, then the lowest
/// class index.
RegressionTargets make_pseudo_regression_targets(const WspnScores& scores, std::span<const BBox> proposals,
                                                 std::span<const int> labels);

inline constexpr double kBceEpsilon = 1e-7;

struct WspnLoss {
  double classification = 0.0;  // sum over classes of binary cross-entropy
  double regression = 0.0;       // smooth-L1 over assigned proposals / N
  double total() const noexcept { return classification + regression; }
};

double smooth_l1(double x);

WspnLoss wspn_loss(const WspnScores& scores, std::span<const int> labels, const RegressionTargets& targets);

/// Analytic gradient of wspn_loss with the targets held fixed.
WspnModel wspn_gradient(const WspnModel& model, const WspnScores& scores, std::span<const int> labels,
                        const RegressionTargets& targets);

struct WspnTrainImage {
  Matrix features;
  std::vector<BBox> proposals;
  std::vector<int> labels;  // 0/1 per class of the model vocabulary
};

struct WspnTrainResult {
  WspnModel model;
  std::vector<double> loss_curve;  // one entry per iteration
};

/// SGD over images in RNG-shuffled epochs, one image per step. Feature
/// standardization is fitted on the training set before the first step.
/// Throws InvalidArgument on an empty dataset or vocabulary.
WspnTrainResult train_wspn(std::span<const WspnTrainImage> images, std::vector<int> class_ids,
                           const TrainSchedule& schedule, int hidden, RngStream& rng);

/// Indices sorted by confidence descending, then box area descending, then
/// index ascending.
std::vector<std::size_t> rank_proposals(std::span<const double> confidence, std::span<const BBox> boxes);

/// max over classes of sigma_det, per proposal.
std::vector<double> wspn_confidence(const WspnScores& scores);

/// The K highest-ranked proposals (all of them when N <= K).
ProposalSet top_k_proposals(const WspnScores& scores, std::span<const BBox> proposals, int K);

void write_wspn(std::ostream& out, const WspnModel& model);
WspnModel read_wspn(std::istream& in);
void save_wspn(const std::string& path, const WspnModel& model);
WspnModel load_wspn(const std::string& path);

}  // namespace pmf::proposal
