#include "pmf/proposal/features.hpp"

#include <algorithm>
#include <cmath>

namespace pmf::proposal {

BoxFeatureExtractor::BoxFeatureExtractor(const ImageGrid& image) : height_(image.height()), width_(image.width()) {
  const int H = height_, W = width_;
  const std::size_t plane = static_cast<std::size_t>(H + 1) * (W + 1);
  integral_.assign(plane * kChannels, 0.0);
  std::vector<double> px(kChannels);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      double grad = 0.0;
      for (int c = 0; c < 3; ++c) {
        const double gx = image.at(y, std::min(x + 1, W - 1), c) - image.at(y, std::max(x - 1, 0), c);
        const double gy = image.at(std::min(y + 1, H - 1), x, c) - image.at(std::max(y - 1, 0), x, c);
        grad = std::max(grad, std::hypot(gx, gy));
      }
      const Rgb p = image.pixel(y, x);
      px[0] = p[0];
      px[1] = p[1];
      px[2] = p[2];
      px[3] = grad;
      px[4] = *std::max_element(p.begin(), p.end()) - *std::min_element(p.begin(), p.end());
      px[5] = p[0] * p[0];
      px[6] = p[1] * p[1];
      px[7] = p[2] * p[2];
      for (int c = 0; c < kChannels; ++c) {
        double* I = integral_.data() + plane * c;
        const std::size_t s = static_cast<std::size_t>(W + 1);
        I[(y + 1) * s + (x + 1)] = px[c] + I[y * s + (x + 1)] + I[(y + 1) * s + x] - I[y * s + x];
      }
    }
  }
}

double BoxFeatureExtractor::sum(int channel, const PixelRect& r) const {
  if (r.empty()) return 0.0;
  const std::size_t plane = static_cast<std::size_t>(height_ + 1) * (width_ + 1);
  const double* I = integral_.data() + plane * channel;
  const std::size_t s = static_cast<std::size_t>(width_ + 1);
  return I[r.y1 * s + r.x1] - I[r.y0 * s + r.x1] - I[r.y1 * s + r.x0] + I[r.y0 * s + r.x0];
}

std::vector<double> BoxFeatureExtractor::sums(const PixelRect& r) const {
  std::vector<double> out(kChannels);
  for (int c = 0; c < kChannels; ++c) out[c] = sum(c, r);
  return out;
}

namespace {

PixelRect grow(const PixelRect& r, int mx, int my, int H, int W) {
  return {std::max(0, r.x0 - mx), std::max(0, r.y0 - my), std::min(W, r.x1 + mx), std::min(H, r.y1 + my)};
}

PixelRect shrink(const PixelRect& r, int b) {
  PixelRect s{r.x0 + b, r.y0 + b, r.x1 - b, r.y1 - b};
  if (s.empty()) return {r.x0, r.y0, r.x0, r.y0};
  return s;
}

}  // namespace

std::vector<double> BoxFeatureExtractor::operator()(const BBox& box) const {
  const int H = height_, W = width_;
  PixelRect in = rasterize(box, H, W);
  if (in.empty()) {
    in.x0 = std::clamp(in.x0, 0, W - 1);
    in.y0 = std::clamp(in.y0, 0, H - 1);
    in.x1 = std::max(in.x1, in.x0 + 1);
    in.y1 = std::max(in.y1, in.y0 + 1);
  }
  const int w = in.width(), h = in.height();
  const PixelRect outer = grow(in, std::max(2, static_cast<int>(std::lround(0.25 * w))),
                               std::max(2, static_cast<int>(std::lround(0.25 * h))), H, W);
  const PixelRect core = shrink(in, std::max(1, static_cast<int>(std::lround(0.15 * std::min(w, h)))));

  const auto s_in = sums(in), s_out = sums(outer), s_core = sums(core);
  const double a_in = static_cast<double>(in.area());
  const double a_ring = static_cast<double>(outer.area() - in.area());
  const double a_core = static_cast<double>(core.area());
  const double a_band = a_in - a_core;

  std::vector<double> f;
  f.reserve(kBoxFeatureDim);
  double mean_in[5], mean_ring[5];
  for (int c = 0; c < 5; ++c) {
    mean_in[c] = s_in[c] / a_in;
    mean_ring[c] = a_ring > 0 ? (s_out[c] - s_in[c]) / a_ring : mean_in[c];
  }
  for (int c = 0; c < 5; ++c) f.push_back(mean_in[c]);
  for (int c = 0; c < 5; ++c) f.push_back(mean_ring[c]);
  for (int c = 0; c < 5; ++c) f.push_back(mean_in[c] - mean_ring[c]);
  const double band_grad = a_band > 0 ? (s_in[3] - s_core[3]) / a_band : mean_in[3];
  const double core_grad = a_core > 0 ? s_core[3] / a_core : mean_in[3];
  f.push_back(band_grad);
  f.push_back(core_grad);
  for (int c = 0; c < 3; ++c) {
    const double var = s_in[5 + c] / a_in - mean_in[c] * mean_in[c];
    f.push_back(std::sqrt(std::max(0.0, var)));
  }
  for (int c = 0; c < 3; ++c) {
    const double band_mean = a_band > 0 ? (s_in[c] - s_core[c]) / a_band : mean_in[c];
    f.push_back(std::abs(band_mean - mean_ring[c]));
  }
  f.push_back(std::log(static_cast<double>(w) / W));
  f.push_back(std::log(static_cast<double>(h) / H));
  f.push_back(std::log(static_cast<double>(w) / h));
  return f;
}

Matrix BoxFeatureExtractor::extract(std::span<const BBox> boxes) const {
  Matrix out(static_cast<int>(boxes.size()), kBoxFeatureDim);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const auto f = (*this)(boxes[i]);
    std::copy(f.begin(), f.end(), out.row(static_cast<int>(i)).begin());
  }
  return out;
}

Standardizer Standardizer::fit(std::span<const Matrix> blocks) {
  if (blocks.empty() || blocks[0].cols() == 0) throw InvalidArgument("Standardizer::fit: no features");
  const int d = blocks[0].cols();
  std::vector<double> sum(static_cast<std::size_t>(d), 0.0), sq(static_cast<std::size_t>(d), 0.0);
  double n = 0.0;
  for (const auto& m : blocks) {
    if (m.cols() != d) throw ShapeError("Standardizer::fit: feature widths differ");
    for (int r = 0; r < m.rows(); ++r) {
      for (int c = 0; c < d; ++c) {
        sum[c] += m(r, c);
        sq[c] += m(r, c) * m(r, c);
      }
      n += 1.0;
    }
  }
  if (n == 0.0) throw InvalidArgument("Standardizer::fit: no rows");
  Standardizer s;
  for (int c = 0; c < d; ++c) {
    const double mu = sum[c] / n;
    s.mean.push_back(mu);
    s.stddev.push_back(std::max(1e-6, std::sqrt(std::max(0.0, sq[c] / n - mu * mu))));
  }
  return s;
}

Standardizer Standardizer::identity(int dim) {
  return {std::vector<double>(static_cast<std::size_t>(dim), 0.0), std::vector<double>(static_cast<std::size_t>(dim), 1.0)};
}

Matrix Standardizer::apply(const Matrix& features) const {
  if (static_cast<std::size_t>(features.cols()) != mean.size()) throw ShapeError("Standardizer: feature width mismatch");
  Matrix out = features;
  for (int r = 0; r < out.rows(); ++r) {
    for (int c = 0; c < out.cols(); ++c) out(r, c) = (out(r, c) - mean[c]) / stddev[c];
  }
  return out;
}

}  // namespace pmf::proposal
