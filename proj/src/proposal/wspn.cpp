#include "pmf/proposal/wspn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "pmf/core/binio.hpp"

namespace pmf::proposal {

WspnModel WspnModel::init(std::vector<int> class_ids, int input_dim, int hidden, RngStream& rng) {
  if (class_ids.empty()) throw InvalidArgument("WSPN needs at least one class");
  WspnModel m;
  const int c = static_cast<int>(class_ids.size());
  m.class_ids = std::move(class_ids);
  m.trunk = Trunk::init(input_dim, hidden, rng);
  auto fill = [&](Matrix& w, int rows) {
    w = Matrix(rows, hidden);
    for (auto& v : w.data()) v = rng.normal(0.0, 0.01);
  };
  fill(m.w_cls, c);
  fill(m.w_det, c);
  fill(m.w_reg, 4);
  m.b_cls.assign(static_cast<std::size_t>(c), 0.0);
  m.b_det.assign(static_cast<std::size_t>(c), 0.0);
  m.b_reg.assign(4, 0.0);
  return m;
}

WspnModel WspnModel::zeros_like() const {
  WspnModel g;
  g.class_ids = class_ids;
  g.trunk = trunk.zeros_like();
  g.w_cls = Matrix(w_cls.rows(), w_cls.cols());
  g.w_det = Matrix(w_det.rows(), w_det.cols());
  g.w_reg = Matrix(w_reg.rows(), w_reg.cols());
  g.b_cls.assign(b_cls.size(), 0.0);
  g.b_det.assign(b_det.size(), 0.0);
  g.b_reg.assign(b_reg.size(), 0.0);
  return g;
}

void WspnModel::validate() const {
  const int c = num_classes(), h = hidden_dim();
  if (c < 1 || h < 1 || input_dim() < 1) throw ShapeError("WSPN: empty dimensions");
  if (trunk.bias.size() != static_cast<std::size_t>(h) ||
      trunk.norm.mean.size() != static_cast<std::size_t>(input_dim()) ||
      trunk.norm.stddev.size() != static_cast<std::size_t>(input_dim())) {
    throw ShapeError("WSPN: trunk shape mismatch");
  }
  auto head = [&](const Matrix& w, const std::vector<double>& b, int rows) {
    if (w.rows() != rows || w.cols() != h || b.size() != static_cast<std::size_t>(rows)) {
      throw ShapeError("WSPN: head shape mismatch");
    }
  };
  head(w_cls, b_cls, c);
  head(w_det, b_det, c);
  head(w_reg, b_reg, 4);
}

std::vector<ParamRef> WspnModel::parameters(const WspnModel& grad) {
  return {{trunk.weight.data(), grad.trunk.weight.data(), true}, {trunk.bias, grad.trunk.bias, false},
          {w_cls.data(), grad.w_cls.data(), true},               {b_cls, grad.b_cls, false},
          {w_det.data(), grad.w_det.data(), true},               {b_det, grad.b_det, false},
          {w_reg.data(), grad.w_reg.data(), true},               {b_reg, grad.b_reg, false}};
}

namespace {

/// C x N logits from N x C head output.
Matrix transpose(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (int r = 0; r < m.rows(); ++r) {
    for (int c = 0; c < m.cols(); ++c) t(c, r) = m(r, c);
  }
  return t;
}

void softmax_inplace(std::vector<double>& v) {
  const double mx = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (auto& x : v) {
    x = std::exp(x - mx);
    sum += x;
  }
  for (auto& x : v) x /= sum;
}

}  // namespace

WspnScores wspn_score(const WspnModel& model, const Matrix& features) {
  model.validate();
  if (features.rows() < 1) throw InvalidArgument("wspn_score: no proposals");
  WspnScores s;
  s.acts = model.trunk.forward(features);
  s.cls = transpose(linear_rows(s.acts.hidden, model.w_cls, model.b_cls));
  s.det = transpose(linear_rows(s.acts.hidden, model.w_det, model.b_det));
  s.reg = linear_rows(s.acts.hidden, model.w_reg, model.b_reg);
  const int C = s.cls.rows(), N = s.cls.cols();
  s.sigma_cls = Matrix(C, N);
  s.sigma_det = Matrix(C, N);
  s.wc = Matrix(C, N);
  std::vector<double> col(static_cast<std::size_t>(C));
  for (int i = 0; i < N; ++i) {
    for (int c = 0; c < C; ++c) col[c] = s.cls(c, i);
    softmax_inplace(col);
    for (int c = 0; c < C; ++c) s.sigma_cls(c, i) = col[c];
  }
  std::vector<double> row(static_cast<std::size_t>(N));
  for (int c = 0; c < C; ++c) {
    for (int i = 0; i < N; ++i) row[i] = s.det(c, i);
    softmax_inplace(row);
    for (int i = 0; i < N; ++i) s.sigma_det(c, i) = row[i];
  }
  s.p.assign(static_cast<std::size_t>(C), 0.0);
  for (int c = 0; c < C; ++c) {
    double acc = 0.0;
    for (int i = 0; i < N; ++i) {
      s.wc(c, i) = s.sigma_cls(c, i) * s.sigma_det(c, i);
      acc += s.wc(c, i);
    }
    s.p[c] = std::clamp(acc, 0.0, 1.0);
  }
  return s;
}

std::array<double, 4> encode_deltas(const BBox& from, const BBox& to) {
  if (!from.valid() || !to.valid()) throw InvalidArgument("encode_deltas: boxes must have positive size");
  return {(to.cx() - from.cx()) / from.w, (to.cy() - from.cy()) / from.h, std::log(to.w / from.w),
          std::log(to.h / from.h)};
}

BBox apply_deltas(const BBox& box, const std::array<double, 4>& d) {
  const double cx = box.cx() + d[0] * box.w, cy = box.cy() + d[1] * box.h;
  const double w = box.w * std::exp(std::clamp(d[2], -4.0, 4.0)), h = box.h * std::exp(std::clamp(d[3], -4.0, 4.0));
  return {cx - 0.5 * w, cy - 0.5 * h, w, h};
}

std::size_t RegressionTargets::num_assigned() const {
  return static_cast<std::size_t>(std::count_if(assigned_class.begin(), assigned_class.end(), [](int c) { return c >= 0; }));
}

RegressionTargets make_pseudo_regression_targets(const WspnScores& scores, std::span<const BBox> proposals,
                                                 std::span<const int> labels) {
  const int C = scores.num_classes(), N = scores.num_proposals();
  if (static_cast<int>(proposals.size()) != N) throw ShapeError("regression targets: proposal count mismatch");
  if (static_cast<int>(labels.size()) != C) throw ShapeError("regression targets: label count mismatch");
  RegressionTargets t;
  t.seeds.assign(static_cast<std::size_t>(C), -1);
  t.assigned_class.assign(static_cast<std::size_t>(N), -1);
  t.deltas.assign(static_cast<std::size_t>(N), {0.0, 0.0, 0.0, 0.0});
  for (int c = 0; c < C; ++c) {
    if (!labels[c]) continue;
    int best = 0;
    for (int i = 1; i < N; ++i) {
      if (scores.wc(c, i) > scores.wc(c, best)) best = i;
    }
    t.seeds[c] = best;
  }
  for (int i = 0; i < N; ++i) {
    double best_iou = -1.0;
    int best_class = -1;
    for (int c = 0; c < C; ++c) {
      if (t.seeds[c] < 0) continue;
      const double v = iou(proposals[i], proposals[t.seeds[c]]);
      if (v >= 0.5 && v > best_iou) {
        best_iou = v;
        best_class = c;
      }
    }
    if (best_class < 0) continue;
    t.assigned_class[i] = best_class;
    t.deltas[i] = encode_deltas(proposals[i], proposals[t.seeds[best_class]]);
  }
  return t;
}

double smooth_l1(double x) {
  const double a = std::abs(x);
  return a < 1.0 ? 0.5 * x * x : a - 0.5;
}

namespace {

double smooth_l1_grad(double x) { return std::abs(x) < 1.0 ? x : (x > 0.0 ? 1.0 : -1.0); }

void check_labels(const WspnScores& scores, std::span<const int> labels) {
  if (static_cast<int>(labels.size()) != scores.num_classes()) throw ShapeError("WSPN loss: label count mismatch");
}

}  // namespace

WspnLoss wspn_loss(const WspnScores& scores, std::span<const int> labels, const RegressionTargets& targets) {
  check_labels(scores, labels);
  WspnLoss loss;
  for (int c = 0; c < scores.num_classes(); ++c) {
    const double p = std::clamp(scores.p[c], kBceEpsilon, 1.0 - kBceEpsilon);
    loss.classification -= labels[c] ? std::log(p) : std::log(1.0 - p);
  }
  const int N = scores.num_proposals();
  for (int i = 0; i < N; ++i) {
    if (targets.assigned_class[i] < 0) continue;
    for (int k = 0; k < 4; ++k) loss.regression += smooth_l1(scores.reg(i, k) - targets.deltas[i][k]);
  }
  loss.regression /= N;
  return loss;
}

WspnModel wspn_gradient(const WspnModel& model, const WspnScores& s, std::span<const int> labels,
                        const RegressionTargets& targets) {
  check_labels(s, labels);
  const int C = s.num_classes(), N = s.num_proposals(), H = model.hidden_dim();
  WspnModel g = model.zeros_like();

  std::vector<double> dp(static_cast<std::size_t>(C), 0.0);
  for (int c = 0; c < C; ++c) {
    const double p = s.p[c];
    if (p <= kBceEpsilon || p >= 1.0 - kBceEpsilon) continue;
    dp[c] = labels[c] ? -1.0 / p : 1.0 / (1.0 - p);
  }

  Matrix dcls(C, N), ddet(C, N);
  for (int i = 0; i < N; ++i) {
    double acc = 0.0;
    for (int c = 0; c < C; ++c) acc += s.sigma_cls(c, i) * dp[c] * s.sigma_det(c, i);
    for (int c = 0; c < C; ++c) dcls(c, i) = s.sigma_cls(c, i) * (dp[c] * s.sigma_det(c, i) - acc);
  }
  for (int c = 0; c < C; ++c) {
    double acc = 0.0;
    for (int i = 0; i < N; ++i) acc += s.sigma_det(c, i) * dp[c] * s.sigma_cls(c, i);
    for (int i = 0; i < N; ++i) ddet(c, i) = s.sigma_det(c, i) * (dp[c] * s.sigma_cls(c, i) - acc);
  }
  Matrix dreg(N, 4);
  for (int i = 0; i < N; ++i) {
    if (targets.assigned_class[i] < 0) continue;
    for (int k = 0; k < 4; ++k) dreg(i, k) = smooth_l1_grad(s.reg(i, k) - targets.deltas[i][k]) / N;
  }

  Matrix dh(N, H);
  for (int i = 0; i < N; ++i) {
    const auto h = s.acts.hidden.row(i);
    auto dhi = dh.row(i);
    auto head = [&](const Matrix& w, Matrix& gw, std::vector<double>& gb, int r, double d) {
      if (d == 0.0) return;
      gb[r] += d;
      const auto wr = w.row(r);
      auto gr = gw.row(r);
      for (int k = 0; k < H; ++k) {
        gr[k] += d * h[k];
        dhi[k] += d * wr[k];
      }
    };
    for (int c = 0; c < C; ++c) {
      head(model.w_cls, g.w_cls, g.b_cls, c, dcls(c, i));
      head(model.w_det, g.w_det, g.b_det, c, ddet(c, i));
    }
    for (int k = 0; k < 4; ++k) head(model.w_reg, g.w_reg, g.b_reg, k, dreg(i, k));
  }
  model.trunk.backward(s.acts, dh, g.trunk);
  return g;
}

WspnTrainResult train_wspn(std::span<const WspnTrainImage> images, std::vector<int> class_ids,
                           const TrainSchedule& schedule, int hidden, RngStream& rng) {
  if (images.empty()) throw InvalidArgument("train_wspn: empty dataset");
  if (class_ids.empty()) throw InvalidArgument("train_wspn: empty vocabulary");
  const int C = static_cast<int>(class_ids.size());
  std::vector<Matrix> blocks;
  for (const auto& img : images) {
    if (img.features.rows() < 1 || img.features.rows() != static_cast<int>(img.proposals.size())) {
      throw InvalidArgument("train_wspn: image without proposals or with mismatched features");
    }
    if (static_cast<int>(img.labels.size()) != C) throw ShapeError("train_wspn: label count mismatch");
    blocks.push_back(img.features);
  }
  WspnTrainResult result;
  RngStream init_rng = rng.derive("init");
  result.model = WspnModel::init(std::move(class_ids), images[0].features.cols(), hidden, init_rng);
  result.model.trunk.norm = Standardizer::fit(blocks);

  MomentumSgd sgd(schedule);
  std::vector<std::size_t> order(images.size());
  std::size_t cursor = order.size();
  for (int it = 0; it < schedule.iters; ++it) {
    if (cursor == order.size()) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      rng.shuffle(std::span<std::size_t>(order));
      cursor = 0;
    }
    const WspnTrainImage& img = images[order[cursor++]];
    const WspnScores scores = wspn_score(result.model, img.features);
    const RegressionTargets targets = make_pseudo_regression_targets(scores, img.proposals, img.labels);
    result.loss_curve.push_back(wspn_loss(scores, img.labels, targets).total());
    const WspnModel grad = wspn_gradient(result.model, scores, img.labels, targets);
    sgd.step(result.model.parameters(grad));
  }
  return result;
}

std::vector<std::size_t> rank_proposals(std::span<const double> confidence, std::span<const BBox> boxes) {
  if (confidence.size() != boxes.size()) throw ShapeError("rank_proposals: size mismatch");
  std::vector<std::size_t> idx(boxes.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (confidence[a] != confidence[b]) return confidence[a] > confidence[b];
    if (boxes[a].area() != boxes[b].area()) return boxes[a].area() > boxes[b].area();
    return a < b;
  });
  return idx;
}

std::vector<double> wspn_confidence(const WspnScores& scores) {
  std::vector<double> conf(static_cast<std::size_t>(scores.num_proposals()), 0.0);
  for (int i = 0; i < scores.num_proposals(); ++i) {
    for (int c = 0; c < scores.num_classes(); ++c) conf[i] = std::max(conf[i], scores.sigma_det(c, i));
  }
  return conf;
}

ProposalSet top_k_proposals(const WspnScores& scores, std::span<const BBox> proposals, int K) {
  if (K < 1) throw InvalidArgument("top_k_proposals: K must be >= 1");
  const auto conf = wspn_confidence(scores);
  const auto order = rank_proposals(conf, proposals);
  ProposalSet out;
  out.source = ProposalSource::kWspn;
  for (std::size_t r = 0; r < order.size() && r < static_cast<std::size_t>(K); ++r) {
    out.boxes.push_back(proposals[order[r]]);
    out.scores.push_back(conf[order[r]]);
  }
  return out;
}

void write_wspn(std::ostream& out, const WspnModel& model) {
  model.validate();
  BinaryWriter w(out);
  w.magic("WSPN");
  w.u16(WspnModel::kVersion);
  w.u32(static_cast<std::uint32_t>(model.input_dim()));
  w.u32(static_cast<std::uint32_t>(model.hidden_dim()));
  w.u32(static_cast<std::uint32_t>(model.num_classes()));
  for (const int id : model.class_ids) w.u32(static_cast<std::uint32_t>(id));
  w.f32s(std::span<const double>(model.trunk.norm.mean));
  w.f32s(std::span<const double>(model.trunk.norm.stddev));
  w.f32s(model.trunk.weight.data());
  w.f32s(std::span<const double>(model.trunk.bias));
  w.f32s(model.w_cls.data());
  w.f32s(std::span<const double>(model.b_cls));
  w.f32s(model.w_det.data());
  w.f32s(std::span<const double>(model.b_det));
  w.f32s(model.w_reg.data());
  w.f32s(std::span<const double>(model.b_reg));
}

WspnModel read_wspn(std::istream& in) {
  BinaryReader r(in, "WSPN");
  r.expect_magic("WSPN");
  r.expect_version(WspnModel::kVersion);
  const auto d = static_cast<int>(r.u32()), h = static_cast<int>(r.u32()), c = static_cast<int>(r.u32());
  if (d < 1 || h < 1 || c < 1 || d > 4096 || h > 4096 || c > 4096) throw FormatError("WSPN: invalid dimensions");
  WspnModel m;
  for (int k = 0; k < c; ++k) m.class_ids.push_back(static_cast<int>(r.u32()));
  auto matrix = [&](int rows, int cols) {
    Matrix out(rows, cols);
    const auto v = r.f32s_as_double(static_cast<std::size_t>(rows) * cols);
    std::copy(v.begin(), v.end(), out.data().begin());
    return out;
  };
  auto vec = [&](int n) { return r.f32s_as_double(static_cast<std::size_t>(n)); };
  m.trunk.norm.mean = vec(d);
  m.trunk.norm.stddev = vec(d);
  m.trunk.weight = matrix(h, d);
  m.trunk.bias = vec(h);
  m.w_cls = matrix(c, h);
  m.b_cls = vec(c);
  m.w_det = matrix(c, h);
  m.b_det = vec(c);
  m.w_reg = matrix(4, h);
  m.b_reg = vec(4);
  r.expect_end();
  m.validate();
  return m;
}

void save_wspn(const std::string& path, const WspnModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot write " + path);
  write_wspn(out, model);
}

WspnModel load_wspn(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("missing input file: " + path);
  return read_wspn(in);
}

}  // namespace pmf::proposal
