#pragma once

#include <cstdint>
#include <vector>

#include "prbcast/tensor.hpp"

namespace prbcast::ad {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adam with bias correction. One state instance per training run; moment
/// shapes are pinned to the parameter shapes at construction.
class AdamState {
 public:
  AdamState(const std::vector<Param>& params, AdamConfig config);

  /// In-place update; `grads` must align 1:1 with `params`.
  void step(std::vector<Param>& params, const std::vector<Tensor>& grads);

  std::int64_t step_count() const { return step_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::int64_t step_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

/// Scales gradients so their global L2 norm does not exceed `max_norm`.
/// Returns the pre-clip norm.
double clip_global_norm(std::vector<Tensor>& grads, double max_norm);

}  // namespace prbcast::ad
