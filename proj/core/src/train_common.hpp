#pragma once

// Internal training machinery shared by the neural forecasters. Not part of
// the installed API.

#include <cstdint>
#include <string>
#include <vector>

#include "prbcast/errors.hpp"
#include "prbcast/model_config.hpp"
#include "prbcast/optimizer.hpp"
#include "prbcast/rng.hpp"
#include "prbcast/tape.hpp"
#include "prbcast/time_series.hpp"

namespace prbcast::detail {

inline constexpr int kTimeFeatures = 4;
inline constexpr double kGradClipNorm = 10.0;

/// Sinusoidal position-in-day and position-in-week encodings (2 values
/// each) for the sample at `unix_seconds`. Weeks are anchored to Monday.
inline void write_time_features(std::int64_t unix_seconds, double* out) {
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  constexpr std::int64_t kDay = 86400;
  constexpr std::int64_t kWeek = 7 * kDay;
  const std::int64_t day_sec = ((unix_seconds % kDay) + kDay) % kDay;
  // The Unix epoch fell on a Thursday, three days into a Monday week.
  const std::int64_t week_sec = ((unix_seconds + 3 * kDay) % kWeek + kWeek) % kWeek;
  const double day_phase = kTwoPi * static_cast<double>(day_sec) / static_cast<double>(kDay);
  const double week_phase = kTwoPi * static_cast<double>(week_sec) / static_cast<double>(kWeek);
  out[0] = std::sin(day_phase);
  out[1] = std::cos(day_phase);
  out[2] = std::sin(week_phase);
  out[3] = std::cos(week_phase);
}

/// Uniform [-1/sqrt(fan_in), +1/sqrt(fan_in)] weight init.
inline ad::Tensor init_weight(std::size_t rows, std::size_t cols, Xoshiro256StarStar& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
  ad::Tensor w({rows, cols});
  for (std::size_t i = 0; i < w.numel(); ++i) w[i] = rng.uniform(-bound, bound);
  return w;
}

inline ad::Tensor zeros_1d(std::size_t n) { return ad::Tensor::zeros({n}); }

inline std::vector<ad::Var> bind_params(ad::Tape& tape, const std::vector<ad::Param>& params) {
  std::vector<ad::Var> vars;
  vars.reserve(params.size());
  for (const ad::Param& p : params) vars.push_back(tape.leaf(p.value));
  return vars;
}

/// Requires at least one full training window; reports required vs
/// available per the sizing-error contract.
inline void require_window(const TimeSeries& train, std::size_t window_len, const char* model) {
  if (train.size() < window_len) {
    throw SizingError(std::string(model) + ": training needs at least " +
                      std::to_string(window_len) + " samples (context + horizon), available " +
                      std::to_string(train.size()));
  }
}

/// Shared optimization driver: uniformly random window starts each batch,
/// Adam with global-norm clipping, per-epoch loss curve. `build_loss`
/// receives (tape, bound param vars, window starts) and returns the scalar
/// batch loss.
template <typename BuildLoss>
void run_training(std::vector<ad::Param>& params, const ModelConfig& config,
                  std::size_t train_len, std::size_t window_len, BuildLoss&& build_loss,
                  std::vector<double>& loss_curve, double& final_loss) {
  Xoshiro256StarStar data_rng(derive_seed(config.seed, "windows"));
  ad::AdamState adam(params, ad::AdamConfig{.learning_rate = config.learning_rate});
  const std::size_t max_start = train_len - window_len;

  loss_curve.clear();
  loss_curve.reserve(static_cast<std::size_t>(config.epochs));
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (int b = 0; b < config.batches_per_epoch; ++b) {
      std::vector<std::size_t> starts(static_cast<std::size_t>(config.batch_size));
      for (auto& s : starts) s = static_cast<std::size_t>(data_rng.below(max_start + 1));
      try {
        ad::Tape tape;
        const std::vector<ad::Var> vars = bind_params(tape, params);
        const ad::Var loss = build_loss(tape, vars, starts);
        epoch_loss += loss.value().item();
        std::vector<ad::Tensor> all_grads = tape.backward(loss);
        std::vector<ad::Tensor> grads;
        grads.reserve(vars.size());
        for (const ad::Var& v : vars) grads.push_back(std::move(all_grads[v.id()]));
        ad::clip_global_norm(grads, kGradClipNorm);
        adam.step(params, grads);
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + ": " + e.what());
      }
    }
    loss_curve.push_back(epoch_loss / static_cast<double>(config.batches_per_epoch));
  }
  final_loss = loss_curve.empty() ? 0.0 : loss_curve.back();
}

/// Mean of `count` samples starting at `start` plus one (the scale nu).
inline double window_scale(const TimeSeries& series, std::size_t start, std::size_t count) {
  double sum = 0.0;
  for (std::size_t i = 0; i < count; ++i) sum += series.values[start + i];
  return 1.0 + sum / static_cast<double>(count);
}

}  // namespace prbcast::detail
