#include "pmf/proposal/supervised_proxy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pmf/core/sgd.hpp"
#include "pmf/proposal/wspn.hpp"

namespace pmf::proposal {

namespace {

double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

struct Sample {
  int index;
  double label;
  int gt;  // matched box for positives, -1 otherwise
};

}  // namespace

ProxyTrainResult train_proxy(std::span<const ProxyTrainImage> images, const TrainSchedule& schedule, int hidden,
                             RngStream& rng, const ProxyOptions& options) {
  if (images.empty()) throw InvalidArgument("train_proxy: empty dataset");
  std::vector<Matrix> blocks;
  for (const auto& img : images) {
    if (img.features.rows() < 1 || img.features.rows() != static_cast<int>(img.proposals.size())) {
      throw InvalidArgument("train_proxy: image without proposals or with mismatched features");
    }
    blocks.push_back(img.features);
  }
  ProxyTrainResult result;
  ProxyModel& m = result.model;
  RngStream init_rng = rng.derive("init");
  m.trunk = Trunk::init(images[0].features.cols(), hidden, init_rng);
  m.trunk.norm = Standardizer::fit(blocks);
  m.w_obj.resize(static_cast<std::size_t>(hidden));
  for (auto& v : m.w_obj) v = init_rng.normal(0.0, 0.01);
  m.w_reg = Matrix(4, hidden);
  for (auto& v : m.w_reg.data()) v = init_rng.normal(0.0, 0.01);
  m.b_reg.assign(4, 0.0);

  // Candidate positives/negatives per image are fixed; each step samples
  // a balanced subset.
  std::vector<std::vector<Sample>> pos(images.size()), neg(images.size());
  for (std::size_t n = 0; n < images.size(); ++n) {
    const auto& img = images[n];
    for (std::size_t i = 0; i < img.proposals.size(); ++i) {
      double best = 0.0;
      int best_gt = -1;
      for (std::size_t g = 0; g < img.base_boxes.size(); ++g) {
        const double v = iou(img.proposals[i], img.base_boxes[g]);
        if (v > best) {
          best = v;
          best_gt = static_cast<int>(g);
        }
      }
      if (best >= options.positive_iou) {
        pos[n].push_back({static_cast<int>(i), 1.0, best_gt});
      } else if (best < options.negative_iou) {
        neg[n].push_back({static_cast<int>(i), 0.0, -1});
      }
    }
  }

  Trunk g_trunk = m.trunk.zeros_like();
  std::vector<double> g_wobj(m.w_obj.size());
  std::vector<double> g_bobj(1);
  Matrix g_wreg(4, hidden);
  std::vector<double> g_breg(4);
  std::vector<double> b_obj_view(1, m.b_obj);
  MomentumSgd sgd(schedule);

  std::vector<std::size_t> order(images.size());
  std::size_t cursor = order.size();
  for (int it = 0; it < schedule.iters; ++it) {
    if (cursor == order.size()) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      rng.shuffle(std::span<std::size_t>(order));
      cursor = 0;
    }
    const std::size_t n = order[cursor++];
    const auto& img = images[n];
    std::vector<Sample> batch;
    auto take = [&](std::vector<Sample> pool, int count) {
      rng.shuffle(std::span<Sample>(pool));
      for (int k = 0; k < count && k < static_cast<int>(pool.size()); ++k) batch.push_back(pool[k]);
    };
    take(pos[n], options.positives_per_image);
    take(neg[n], options.negatives_per_image);
    if (batch.empty()) {
      result.loss_curve.push_back(0.0);
      continue;
    }

    Matrix rows(static_cast<int>(batch.size()), img.features.cols());
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const auto src = img.features.row(batch[b].index);
      std::copy(src.begin(), src.end(), rows.row(static_cast<int>(b)).begin());
    }
    const auto acts = m.trunk.forward(rows);
    const Matrix reg = linear_rows(acts.hidden, m.w_reg, m.b_reg);
    const double inv = 1.0 / static_cast<double>(batch.size());
    std::fill(g_trunk.weight.data().begin(), g_trunk.weight.data().end(), 0.0);
    std::fill(g_trunk.bias.begin(), g_trunk.bias.end(), 0.0);
    std::fill(g_wobj.begin(), g_wobj.end(), 0.0);
    g_bobj[0] = 0.0;
    std::fill(g_wreg.data().begin(), g_wreg.data().end(), 0.0);
    std::fill(g_breg.begin(), g_breg.end(), 0.0);
    Matrix dh(rows.rows(), hidden);
    double loss = 0.0;
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const auto h = acts.hidden.row(static_cast<int>(b));
      auto dhb = dh.row(static_cast<int>(b));
      const double z = dot(h, m.w_obj) + m.b_obj;
      const double p = sigmoid(z);
      const double y = batch[b].label;
      loss -= inv * (y * std::log(std::max(p, kBceEpsilon)) + (1.0 - y) * std::log(std::max(1.0 - p, kBceEpsilon)));
      const double dz = inv * (p - y);
      g_bobj[0] += dz;
      for (int k = 0; k < hidden; ++k) {
        g_wobj[k] += dz * h[k];
        dhb[k] += dz * m.w_obj[k];
      }
      if (batch[b].gt < 0) continue;
      const auto t = encode_deltas(img.proposals[batch[b].index], img.base_boxes[batch[b].gt]);
      for (int r = 0; r < 4; ++r) {
        const double diff = reg(static_cast<int>(b), r) - t[r];
        loss += inv * smooth_l1(diff);
        const double d = inv * (std::abs(diff) < 1.0 ? diff : (diff > 0 ? 1.0 : -1.0));
        g_breg[r] += d;
        for (int k = 0; k < hidden; ++k) {
          g_wreg(r, k) += d * h[k];
          dhb[k] += d * m.w_reg(r, k);
        }
      }
    }
    m.trunk.backward(acts, dh, g_trunk);
    result.loss_curve.push_back(loss);
    b_obj_view[0] = m.b_obj;
    sgd.step({{m.trunk.weight.data(), g_trunk.weight.data(), true},
              {m.trunk.bias, g_trunk.bias, false},
              {m.w_obj, g_wobj, true},
              {b_obj_view, g_bobj, false},
              {m.w_reg.data(), g_wreg.data(), true},
              {m.b_reg, g_breg, false}});
    m.b_obj = b_obj_view[0];
  }
  return result;
}

std::vector<double> proxy_objectness(const ProxyModel& model, const Matrix& features) {
  const auto acts = model.trunk.forward(features);
  std::vector<double> out(static_cast<std::size_t>(features.rows()));
  for (int i = 0; i < features.rows(); ++i) out[i] = sigmoid(dot(acts.hidden.row(i), model.w_obj) + model.b_obj);
  return out;
}

ProposalSet proxy_top_k(const ProxyModel& model, const Matrix& features, std::span<const BBox> proposals, int K) {
  if (K < 1) throw InvalidArgument("proxy_top_k: K must be >= 1");
  const auto score = proxy_objectness(model, features);
  const auto order = rank_proposals(score, proposals);
  ProposalSet out;
  out.source = ProposalSource::kProxy;
  for (std::size_t r = 0; r < order.size() && r < static_cast<std::size_t>(K); ++r) {
    out.boxes.push_back(proposals[order[r]]);
    out.scores.push_back(score[order[r]]);
  }
  return out;
}

}  // namespace pmf::proposal
