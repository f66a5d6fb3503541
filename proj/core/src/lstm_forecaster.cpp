#include <cstring>

#include "prbcast/errors.hpp"
#include "prbcast/forecaster.hpp"
#include "prbcast/model_graphs.hpp"
#include "train_common.hpp"

namespace prbcast {

namespace {

using ad::Tensor;
using ad::Var;
using detail::kTimeFeatures;

// Parameter layout: per layer "lstm.l<k>.w" (in+H, 4H) and "lstm.l<k>.b"
// (4H), then "head.w" (H, horizon) and "head.b" (horizon). The forget-gate
// bias starts at 1.
std::vector<ad::Param> init_lstm_params(const ModelConfig& config, std::size_t input_size) {
  Xoshiro256StarStar rng(derive_seed(config.seed, "init"));
  const std::size_t hidden = static_cast<std::size_t>(config.hidden_size);
  std::vector<ad::Param> params;
  for (int l = 0; l < config.num_layers; ++l) {
    const std::size_t in = l == 0 ? input_size : hidden;
    Tensor w = detail::init_weight(in + hidden, 4 * hidden, rng);
    Tensor b = detail::zeros_1d(4 * hidden);
    for (std::size_t j = hidden; j < 2 * hidden; ++j) b[j] = 1.0;
    params.push_back({"lstm.l" + std::to_string(l) + ".w", std::move(w)});
    params.push_back({"lstm.l" + std::to_string(l) + ".b", std::move(b)});
  }
  params.push_back(
      {"head.w", detail::init_weight(hidden, static_cast<std::size_t>(config.horizon), rng)});
  params.push_back({"head.b", detail::zeros_1d(static_cast<std::size_t>(config.horizon))});
  return params;
}

struct BoundLstm {
  std::vector<graphs::LstmLayerVars> layers;
  Var head_w;
  Var head_b;
};

BoundLstm bind_lstm(const std::vector<Var>& vars, int num_layers) {
  BoundLstm bound;
  for (int l = 0; l < num_layers; ++l) {
    bound.layers.push_back({vars[2 * l], vars[2 * l + 1]});
  }
  bound.head_w = vars[2 * static_cast<std::size_t>(num_layers)];
  bound.head_b = vars[2 * static_cast<std::size_t>(num_layers) + 1];
  return bound;
}

/// Encodes scaled context values (B, C) through the stack; returns final
/// top hidden state (B, H).
Var encode_context(ad::Tape& tape, const BoundLstm& bound, const Tensor& scaled_context,
                   std::size_t batch, std::size_t context_len, std::size_t hidden) {
  auto states = graphs::lstm_zero_state(tape, bound.layers.size(), batch, hidden);
  Var top;
  for (std::size_t t = 0; t < context_len; ++t) {
    Tensor x({batch, 1});
    for (std::size_t bi = 0; bi < batch; ++bi) x[bi] = scaled_context[bi * context_len + t];
    top = graphs::lstm_stack_step(bound.layers, tape.constant(std::move(x)), states);
  }
  return top;
}

}  // namespace

TrainedModel train_lstm(const TimeSeries& train, const ModelConfig& config) {
  config.validate();
  const std::size_t context_len = static_cast<std::size_t>(config.context_length);
  const std::size_t horizon = static_cast<std::size_t>(config.horizon);
  const std::size_t window = context_len + horizon;
  detail::require_window(train, window, "lstm");

  TrainedModel model;
  model.config = config;
  model.params = init_lstm_params(config, 1);
  const std::size_t hidden = static_cast<std::size_t>(config.hidden_size);

  auto build_loss = [&](ad::Tape& tape, const std::vector<Var>& vars,
                        const std::vector<std::size_t>& starts) -> Var {
    const std::size_t batch = starts.size();
    const BoundLstm bound = bind_lstm(vars, config.num_layers);

    Tensor context({batch, context_len});
    Tensor target({batch, horizon});
    for (std::size_t bi = 0; bi < batch; ++bi) {
      const double nu = detail::window_scale(train, starts[bi], context_len);
      for (std::size_t t = 0; t < context_len; ++t) {
        context[bi * context_len + t] = train.values[starts[bi] + t] / nu;
      }
      for (std::size_t t = 0; t < horizon; ++t) {
        target[bi * horizon + t] = train.values[starts[bi] + context_len + t] / nu;
      }
    }
    const Var top = encode_context(tape, bound, context, batch, context_len, hidden);
    const Var pred = ad::add_bias(ad::matmul(top, bound.head_w), bound.head_b);
    const Var diff = ad::sub(pred, tape.constant(std::move(target)));
    return ad::reduce_mean(ad::mul(diff, diff));
  };

  detail::run_training(model.params, config, train.size(), window, build_loss, model.loss_curve,
                       model.final_loss);
  return model;
}

PointForecast predict_lstm(const TrainedModel& model, const TimeSeries& context) {
  const ModelConfig& config = model.config;
  if (model.params.empty()) throw StateError("lstm: model has no trained parameters");
  const std::size_t context_len = static_cast<std::size_t>(config.context_length);
  if (context.size() < context_len) {
    throw SizingError("lstm: prediction needs a context of " + std::to_string(context_len) +
                      " samples, got " + std::to_string(context.size()));
  }
  const std::size_t offset = context.size() - context_len;
  const double nu = detail::window_scale(context, offset, context_len);

  ad::Tape tape;
  const std::vector<Var> vars = detail::bind_params(tape, model.params);
  const BoundLstm bound = bind_lstm(vars, config.num_layers);
  Tensor scaled({1, context_len});
  for (std::size_t t = 0; t < context_len; ++t) scaled[t] = context.values[offset + t] / nu;
  const Var top = encode_context(tape, bound, scaled, 1, context_len,
                                 static_cast<std::size_t>(config.hidden_size));
  const Var pred = ad::add_bias(ad::matmul(top, bound.head_w), bound.head_b);

  PointForecast out;
  out.start_unix = context.end_unix();
  out.step_seconds = context.step_seconds;
  out.values.resize(static_cast<std::size_t>(config.horizon));
  for (std::size_t t = 0; t < out.values.size(); ++t) out.values[t] = pred.value()[t] * nu;
  return out;
}

}  // namespace prbcast
