#include "pmf/proposal/trunk.hpp"

#include <cmath>

namespace pmf::proposal {

Trunk Trunk::init(int input_dim, int hidden, RngStream& rng) {
  if (input_dim < 1 || hidden < 1) throw InvalidArgument("trunk dimensions must be positive");
  Trunk t;
  t.norm = Standardizer::identity(input_dim);
  t.weight = Matrix(hidden, input_dim);
  const double s = std::sqrt(2.0 / input_dim);
  for (auto& v : t.weight.data()) v = rng.normal(0.0, s);
  t.bias.assign(static_cast<std::size_t>(hidden), 0.0);
  return t;
}

Trunk Trunk::zeros_like() const {
  Trunk t;
  t.norm = norm;
  t.weight = Matrix(weight.rows(), weight.cols());
  t.bias.assign(bias.size(), 0.0);
  return t;
}

Trunk::Activations Trunk::forward(const Matrix& raw_features) const {
  if (raw_features.cols() != input_dim()) throw ShapeError("trunk: feature width mismatch");
  Activations a;
  a.input = norm.apply(raw_features);
  a.hidden = linear_rows(a.input, weight, bias);
  for (auto& v : a.hidden.data()) v = v > 0.0 ? v : 0.0;
  return a;
}

void Trunk::backward(const Activations& acts, const Matrix& d_hidden, Trunk& grad) const {
  const int n = acts.hidden.rows(), h = hidden_dim(), d = input_dim();
  for (int i = 0; i < n; ++i) {
    const auto x = acts.input.row(i);
    for (int k = 0; k < h; ++k) {
      if (acts.hidden(i, k) <= 0.0) continue;
      const double g = d_hidden(i, k);
      if (g == 0.0) continue;
      grad.bias[k] += g;
      auto gw = grad.weight.row(k);
      for (int j = 0; j < d; ++j) gw[j] += g * x[j];
    }
  }
}

Matrix linear_rows(const Matrix& hidden, const Matrix& weight, const std::vector<double>& bias) {
  if (hidden.cols() != weight.cols() || static_cast<std::size_t>(weight.rows()) != bias.size()) {
    throw ShapeError("linear_rows: dimension mismatch");
  }
  Matrix out(hidden.rows(), weight.rows());
  for (int i = 0; i < hidden.rows(); ++i) {
    const auto h = hidden.row(i);
    for (int r = 0; r < weight.rows(); ++r) out(i, r) = dot(h, weight.row(r)) + bias[r];
  }
  return out;
}

}  // namespace pmf::proposal
