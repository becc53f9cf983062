#include "pmf/wss/segmenter.hpp"

#include <algorithm>
#include <cmath>

#include "pmf/core/sgd.hpp"

namespace pmf::wss {

namespace {

constexpr int kWidths[4] = {3, 8, 8, 1};
constexpr int kKernels[3] = {1, 1, 1};

std::size_t widx(const ConvLayer& l, int o, int i, int ky, int kx) {
  return ((static_cast<std::size_t>(o) * l.in + i) * l.kernel + ky) * l.kernel + kx;
}

double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

void check_points(const PatchInput& input, const PointLabels& labels) {
  for (const auto& p : labels.points) {
    if (p.x < 0 || p.y < 0 || p.x >= input.width || p.y >= input.height) {
      throw ShapeError("segmenter: labeled point outside the patch");
    }
  }
  if (labels.points.empty()) throw InvalidArgument("segmenter: no labeled points");
}

/// Activations in the receptive field of one output pixel: a1 over a
/// (2*r1+1)^2 window around the point, a2 over (2*r2+1)^2, z the logit.
struct LocalPass {
  int r1 = 0;
  int r2 = 0;
  std::vector<double> a1;
  std::vector<char> in1;
  std::vector<double> a2;
  std::vector<char> in2;
  double z = 0.0;

  explicit LocalPass(const Segmenter& net) {
    r2 = net.layers[2].kernel / 2;
    r1 = r2 + net.layers[1].kernel / 2;
    a1.assign(static_cast<std::size_t>(8) * s1() * s1(), 0.0);
    in1.assign(static_cast<std::size_t>(s1()) * s1(), 0);
    a2.assign(static_cast<std::size_t>(8) * s2() * s2(), 0.0);
    in2.assign(static_cast<std::size_t>(s2()) * s2(), 0);
  }
  int s1() const { return 2 * r1 + 1; }
  int s2() const { return 2 * r2 + 1; }
  std::size_t i1(int c, int y, int x) const { return (static_cast<std::size_t>(c) * s1() + y) * s1() + x; }
  std::size_t i2(int c, int y, int x) const { return (static_cast<std::size_t>(c) * s2() + y) * s2() + x; }
};

void local_forward(const Segmenter& net, const PatchInput& in, int px, int py, LocalPass& lp) {
  const ConvLayer& l1 = net.layers[0];
  const ConvLayer& l2 = net.layers[1];
  const ConvLayer& l3 = net.layers[2];
  const int h1 = l1.kernel / 2, h2 = l2.kernel / 2;
  for (int dy = 0; dy < lp.s1(); ++dy) {
    for (int dx = 0; dx < lp.s1(); ++dx) {
      const int y = py + dy - lp.r1, x = px + dx - lp.r1;
      const bool inside = y >= 0 && x >= 0 && y < in.height && x < in.width;
      lp.in1[static_cast<std::size_t>(dy) * lp.s1() + dx] = inside;
      for (int o = 0; o < 8; ++o) {
        if (!inside) {
          lp.a1[lp.i1(o, dy, dx)] = 0.0;
          continue;
        }
        double acc = l1.bias[o];
        for (int c = 0; c < 3; ++c) {
          for (int ky = 0; ky < l1.kernel; ++ky) {
            const int yy = y + ky - h1;
            if (yy < 0 || yy >= in.height) continue;
            for (int kx = 0; kx < l1.kernel; ++kx) {
              const int xx = x + kx - h1;
              if (xx < 0 || xx >= in.width) continue;
              acc += l1.weight[widx(l1, o, c, ky, kx)] * in.at(c, yy, xx);
            }
          }
        }
        lp.a1[lp.i1(o, dy, dx)] = acc > 0.0 ? acc : 0.0;
      }
    }
  }
  for (int dy = 0; dy < lp.s2(); ++dy) {
    for (int dx = 0; dx < lp.s2(); ++dx) {
      const bool inside = lp.in1[static_cast<std::size_t>(dy + h2) * lp.s1() + dx + h2];
      lp.in2[static_cast<std::size_t>(dy) * lp.s2() + dx] = inside;
      for (int o = 0; o < 8; ++o) {
        if (!inside) {
          lp.a2[lp.i2(o, dy, dx)] = 0.0;
          continue;
        }
        double acc = l2.bias[o];
        for (int c = 0; c < 8; ++c) {
          for (int ky = 0; ky < l2.kernel; ++ky) {
            for (int kx = 0; kx < l2.kernel; ++kx) acc += l2.weight[widx(l2, o, c, ky, kx)] * lp.a1[lp.i1(c, dy + ky, dx + kx)];
          }
        }
        lp.a2[lp.i2(o, dy, dx)] = acc > 0.0 ? acc : 0.0;
      }
    }
  }
  double z = l3.bias[0];
  for (int c = 0; c < 8; ++c) {
    for (int ky = 0; ky < l3.kernel; ++ky) {
      for (int kx = 0; kx < l3.kernel; ++kx) z += l3.weight[widx(l3, 0, c, ky, kx)] * lp.a2[lp.i2(c, ky, kx)];
    }
  }
  lp.z = z;
}

void local_backward(const Segmenter& net, const PatchInput& in, int px, int py, const LocalPass& lp, double dz,
                    Segmenter& g) {
  const ConvLayer& l1 = net.layers[0];
  const ConvLayer& l2 = net.layers[1];
  const ConvLayer& l3 = net.layers[2];
  ConvLayer& g1 = g.layers[0];
  ConvLayer& g2 = g.layers[1];
  ConvLayer& g3 = g.layers[2];
  const int h1 = l1.kernel / 2;
  g3.bias[0] += dz;
  std::vector<double> d2(lp.a2.size(), 0.0);
  for (int c = 0; c < 8; ++c) {
    for (int ky = 0; ky < l3.kernel; ++ky) {
      for (int kx = 0; kx < l3.kernel; ++kx) {
        const double a = lp.a2[lp.i2(c, ky, kx)];
        g3.weight[widx(g3, 0, c, ky, kx)] += dz * a;
        if (a > 0.0) d2[lp.i2(c, ky, kx)] = dz * l3.weight[widx(l3, 0, c, ky, kx)];
      }
    }
  }
  std::vector<double> d1(lp.a1.size(), 0.0);
  for (int dy = 0; dy < lp.s2(); ++dy) {
    for (int dx = 0; dx < lp.s2(); ++dx) {
      for (int o = 0; o < 8; ++o) {
        const double d = d2[lp.i2(o, dy, dx)];
        if (d == 0.0) continue;
        g2.bias[o] += d;
        for (int c = 0; c < 8; ++c) {
          for (int ky = 0; ky < l2.kernel; ++ky) {
            for (int kx = 0; kx < l2.kernel; ++kx) {
              const double a = lp.a1[lp.i1(c, dy + ky, dx + kx)];
              g2.weight[widx(g2, o, c, ky, kx)] += d * a;
              if (a > 0.0) d1[lp.i1(c, dy + ky, dx + kx)] += d * l2.weight[widx(l2, o, c, ky, kx)];
            }
          }
        }
      }
    }
  }
  for (int dy = 0; dy < lp.s1(); ++dy) {
    for (int dx = 0; dx < lp.s1(); ++dx) {
      if (!lp.in1[static_cast<std::size_t>(dy) * lp.s1() + dx]) continue;
      const int y = py + dy - lp.r1, x = px + dx - lp.r1;
      for (int o = 0; o < 8; ++o) {
        const double d = d1[lp.i1(o, dy, dx)];
        if (d == 0.0) continue;
        g1.bias[o] += d;
        for (int c = 0; c < 3; ++c) {
          for (int ky = 0; ky < l1.kernel; ++ky) {
            const int yy = y + ky - h1;
            if (yy < 0 || yy >= in.height) continue;
            for (int kx = 0; kx < l1.kernel; ++kx) {
              const int xx = x + kx - h1;
              if (xx < 0 || xx >= in.width) continue;
              g1.weight[widx(g1, o, c, ky, kx)] += d * in.at(c, yy, xx);
            }
          }
        }
      }
    }
  }
}

/// Dense same-padded convolution over a channel-major buffer.
std::vector<double> conv_full(const ConvLayer& l, const std::vector<double>& src, int H, int W, bool relu) {
  std::vector<double> out(static_cast<std::size_t>(l.out) * H * W);
  const int half = l.kernel / 2;
  for (int o = 0; o < l.out; ++o) {
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        double acc = l.bias[o];
        for (int c = 0; c < l.in; ++c) {
          for (int ky = 0; ky < l.kernel; ++ky) {
            const int yy = y + ky - half;
            if (yy < 0 || yy >= H) continue;
            for (int kx = 0; kx < l.kernel; ++kx) {
              const int xx = x + kx - half;
              if (xx < 0 || xx >= W) continue;
              acc += l.weight[widx(l, o, c, ky, kx)] * src[(static_cast<std::size_t>(c) * H + yy) * W + xx];
            }
          }
        }
        out[(static_cast<std::size_t>(o) * H + y) * W + x] = relu ? std::max(acc, 0.0) : acc;
      }
    }
  }
  return out;
}

}  // namespace

Segmenter Segmenter::init(RngStream& rng) {
  Segmenter net;
  for (int l = 0; l < 3; ++l) {
    ConvLayer& layer = net.layers[l];
    layer.in = kWidths[l];
    layer.out = kWidths[l + 1];
    layer.kernel = kKernels[l];
    const int taps = layer.kernel * layer.kernel;
    layer.weight.resize(static_cast<std::size_t>(layer.out) * layer.in * taps);
    const double s = std::sqrt((l < 2 ? 2.0 : 1.0) / (layer.in * taps));
    for (auto& w : layer.weight) w = rng.normal(0.0, s);
    layer.bias.assign(static_cast<std::size_t>(layer.out), 0.0);
  }
  return net;
}

Segmenter Segmenter::zeros_like() const {
  Segmenter g = *this;
  for (auto& l : g.layers) {
    std::fill(l.weight.begin(), l.weight.end(), 0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
  return g;
}

std::vector<ParamRef> Segmenter::parameters(const Segmenter& grad) {
  std::vector<ParamRef> out;
  for (int l = 0; l < 3; ++l) {
    out.push_back({layers[l].weight, grad.layers[l].weight, true});
    out.push_back({layers[l].bias, grad.layers[l].bias, false});
  }
  return out;
}

PatchInput standardize_patch(const ImageGrid& patch) {
  PatchInput in;
  in.height = patch.height();
  in.width = patch.width();
  const std::size_t n = static_cast<std::size_t>(in.height) * in.width;
  in.data.resize(3 * n);
  for (int c = 0; c < 3; ++c) {
    double sum = 0.0, sq = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      const double v = patch.data()[p * 3 + c];
      sum += v;
      sq += v * v;
    }
    const double mean = sum / n;
    const double sd = std::max(1e-3, std::sqrt(std::max(0.0, sq / n - mean * mean)));
    for (std::size_t p = 0; p < n; ++p) in.data[c * n + p] = (patch.data()[p * 3 + c] - mean) / sd;
  }
  return in;
}

Grid<float> predict(const Segmenter& net, const PatchInput& input) {
  const int H = input.height, W = input.width;
  const auto a1 = conv_full(net.layers[0], input.data, H, W, true);
  const auto a2 = conv_full(net.layers[1], a1, H, W, true);
  const auto z = conv_full(net.layers[2], a2, H, W, false);
  Grid<float> out(H, W, 0.0f);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(sigmoid(z[i]));
  return out;
}

double point_loss(const Segmenter& net, const PatchInput& input, const PointLabels& labels) {
  check_points(input, labels);
  LocalPass lp(net);
  double loss = 0.0;
  for (const auto& p : labels.points) {
    local_forward(net, input, p.x, p.y, lp);
    loss += softplus(lp.z) - (p.label ? lp.z : 0.0);
  }
  return loss / static_cast<double>(labels.points.size());
}

Segmenter point_loss_gradient(const Segmenter& net, const PatchInput& input, const PointLabels& labels,
                              double* loss) {
  check_points(input, labels);
  Segmenter g = net.zeros_like();
  LocalPass lp(net);
  const double inv = 1.0 / static_cast<double>(labels.points.size());
  double total = 0.0;
  for (const auto& p : labels.points) {
    local_forward(net, input, p.x, p.y, lp);
    total += softplus(lp.z) - (p.label ? lp.z : 0.0);
    const double dz = inv * (sigmoid(lp.z) - (p.label ? 1.0 : 0.0));
    local_backward(net, input, p.x, p.y, lp, dz, g);
  }
  if (loss) *loss = total * inv;
  return g;
}

SegPatch train_patch_segmenter(const ImageGrid& patch, const PointLabels& labels, const TrainSchedule& schedule,
                               RngStream& rng) {
  const PatchInput input = standardize_patch(patch);
  check_points(input, labels);
  Segmenter net = Segmenter::init(rng);
  MomentumSgd sgd(schedule);
  SegPatch out;
  out.loss_curve.reserve(static_cast<std::size_t>(std::max(0, schedule.iters)));
  for (int it = 0; it < schedule.iters; ++it) {
    double loss = 0.0;
    const Segmenter g = point_loss_gradient(net, input, labels, &loss);
    out.loss_curve.push_back(loss);
    sgd.step(net.parameters(g));
  }
  out.probabilities = predict(net, input);
  out.mask = BinaryMask(input.height, input.width, 0);
  for (std::size_t i = 0; i < out.mask.size(); ++i) out.mask[i] = out.probabilities[i] >= 0.5f ? 1 : 0;
  int correct = 0;
  for (const auto& p : labels.points) {
    correct += (out.probabilities.at(p.y, p.x) >= 0.5f) == (p.label == 1) ? 1 : 0;
  }
  out.point_accuracy = static_cast<double>(correct) / static_cast<double>(labels.points.size());
  return out;
}

}  // namespace pmf::wss
