#include "prbcast/optimizer.hpp"

#include <cmath>

#include "prbcast/errors.hpp"

namespace prbcast::ad {

AdamState::AdamState(const std::vector<Param>& params, AdamConfig config) : config_(config) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const Param& p : params) {
    m_.push_back(Tensor::zeros(p.value.shape()));
    v_.push_back(Tensor::zeros(p.value.shape()));
  }
}

void AdamState::step(std::vector<Param>& params, const std::vector<Tensor>& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw ContractError("adam: parameter/gradient count mismatch");
  }
  ++step_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& w = params[i].value;
    const Tensor& g = grads[i];
    if (!w.same_shape(g)) {
      throw ShapeError("adam: parameter '" + params[i].name + "' " + w.shape_str() +
                       " vs gradient " + g.shape_str());
    }
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (std::size_t j = 0; j < w.numel(); ++j) {
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      w[j] -= config_.learning_rate * mhat / (std::sqrt(vhat) + config_.epsilon);
    }
  }
}

double clip_global_norm(std::vector<Tensor>& grads, double max_norm) {
  double sq = 0.0;
  for (const Tensor& g : grads) {
    for (std::size_t i = 0; i < g.numel(); ++i) sq += g[i] * g[i];
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double factor = max_norm / norm;
    for (Tensor& g : grads) {
      for (std::size_t i = 0; i < g.numel(); ++i) g[i] *= factor;
    }
  }
  return norm;
}

}  // namespace prbcast::ad
