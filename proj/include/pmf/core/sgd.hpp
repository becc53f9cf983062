#pragma once

#include <span>
#include <vector>

#include "pmf/core/config.hpp"
#include "pmf/core/errors.hpp"

namespace pmf {

/// One parameter tensor and its gradient, viewed as flat arrays.
struct ParamRef {
  std::span<double> value;
  std::span<const double> grad;
  bool decay = true;  // weight decay applies (weights, not biases)
};

/// SGD with momentum and L2 weight decay:
///   v <- momentum * v + (g + weight_decay * w);  w <- w - lr * v
class MomentumSgd {
 public:
  explicit MomentumSgd(const TrainSchedule& schedule) : schedule_(schedule) {}

  void step(const std::vector<ParamRef>& params) {
    if (velocity_.empty()) {
      for (const auto& p : params) velocity_.emplace_back(p.value.size(), 0.0);
    }
    if (velocity_.size() != params.size()) throw ShapeError("MomentumSgd: parameter list changed");
    for (std::size_t t = 0; t < params.size(); ++t) {
      const auto& p = params[t];
      auto& v = velocity_[t];
      if (v.size() != p.value.size() || p.grad.size() != p.value.size()) {
        throw ShapeError("MomentumSgd: parameter shape changed");
      }
      const double wd = p.decay ? schedule_.weight_decay : 0.0;
      for (std::size_t i = 0; i < v.size(); ++i) {
        v[i] = schedule_.momentum * v[i] + p.grad[i] + wd * p.value[i];
        p.value[i] -= schedule_.lr * v[i];
      }
    }
  }

 private:
  TrainSchedule schedule_;
  std::vector<std::vector<double>> velocity_;
};

}  // namespace pmf
