#pragma once

#include <span>
#include <vector>

#include "pmf/core/config.hpp"
#include "pmf/proposal/proposals.hpp"
#include "pmf/proposal/trunk.hpp"

namespace pmf::proposal {

/// Fully supervised class-agnostic objectness scorer, the comparison point
/// for WSPN recall on novel categories. Same features and trunk as WSPN; an
/// objectness logit and a box-regression head are trained on base-category
/// ground-truth boxes only, so unannotated (novel) objects act as
/// background.
struct ProxyModel {
  Trunk trunk;
  std::vector<double> w_obj;  // hidden
  double b_obj = 0.0;
  Matrix w_reg;  // 4 x hidden
  std::vector<double> b_reg;
};

struct ProxyTrainImage {
  Matrix features;
  std::vector<BBox> proposals;
  std::vector<BBox> base_boxes;
};

struct ProxyOptions {
  double positive_iou = 0.5;
  double negative_iou = 0.3;
  int positives_per_image = 16;
  int negatives_per_image = 48;
};

struct ProxyTrainResult {
  ProxyModel model;
  std::vector<double> loss_curve;
};

ProxyTrainResult train_proxy(std::span<const ProxyTrainImage> images, const TrainSchedule& schedule, int hidden,
                             RngStream& rng, const ProxyOptions& options = {});

std::vector<double> proxy_objectness(const ProxyModel& model, const Matrix& features);

/// Ranked by objectness with the same tie-breaks as WSPN.
ProposalSet proxy_top_k(const ProxyModel& model, const Matrix& features, std::span<const BBox> proposals, int K);

}  // namespace pmf::proposal
