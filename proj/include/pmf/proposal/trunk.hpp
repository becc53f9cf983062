#pragma once

#include "pmf/core/matrix.hpp"
#include "pmf/core/rng.hpp"
#include "pmf/proposal/features.hpp"

namespace pmf::proposal {

/// Shared hidden layer over standardized box features: h = ReLU(W x + b).
struct Trunk {
  Standardizer norm;
  Matrix weight;  // hidden x input
  std::vector<double> bias;

  int input_dim() const noexcept { return weight.cols(); }
  int hidden_dim() const noexcept { return weight.rows(); }

  static Trunk init(int input_dim, int hidden, RngStream& rng);
  /// Zero-valued trunk of the same shape (gradient accumulator).
  Trunk zeros_like() const;

  struct Activations {
    Matrix input;   // N x input, standardized
    Matrix hidden;  // N x hidden, after ReLU
  };
  Activations forward(const Matrix& raw_features) const;
  /// Accumulates dL/dW, dL/db into `grad` given dL/dh (N x hidden).
  void backward(const Activations& acts, const Matrix& d_hidden, Trunk& grad) const;
};

/// out(i, r) = sum_k hidden(i, k) * weight(r, k) + bias(r)
Matrix linear_rows(const Matrix& hidden, const Matrix& weight, const std::vector<double>& bias);

}  // namespace pmf::proposal
