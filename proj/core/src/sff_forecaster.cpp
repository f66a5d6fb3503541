#include "prbcast/errors.hpp"
#include "prbcast/forecaster.hpp"
#include "prbcast/model_graphs.hpp"
#include "train_common.hpp"

namespace prbcast {

namespace {

using ad::Tensor;
using ad::Var;

// MLP over the scaled context: num_layers tanh blocks, then a linear head
// emitting (mu, sigma_raw) for every horizon step.
std::vector<ad::Param> init_sff_params(const ModelConfig& config) {
  Xoshiro256StarStar rng(derive_seed(config.seed, "init"));
  const std::size_t hidden = static_cast<std::size_t>(config.hidden_size);
  const std::size_t horizon = static_cast<std::size_t>(config.horizon);
  std::vector<ad::Param> params;
  std::size_t in = static_cast<std::size_t>(config.context_length);
  for (int l = 0; l < config.num_layers; ++l) {
    params.push_back({"mlp.l" + std::to_string(l) + ".w", detail::init_weight(in, hidden, rng)});
    params.push_back({"mlp.l" + std::to_string(l) + ".b", detail::zeros_1d(hidden)});
    in = hidden;
  }
  params.push_back({"head.w", detail::init_weight(in, 2 * horizon, rng)});
  params.push_back({"head.b", detail::zeros_1d(2 * horizon)});
  return params;
}

struct SffOutputs {
  Var mu;     // (B, horizon)
  Var sigma;  // (B, horizon)
};

SffOutputs sff_forward(ad::Tape& tape, const std::vector<Var>& vars, const ModelConfig& config,
                       Tensor scaled_context) {
  const std::size_t horizon = static_cast<std::size_t>(config.horizon);
  Var x = tape.constant(std::move(scaled_context));
  for (int l = 0; l < config.num_layers; ++l) {
    x = ad::tanh(ad::add_bias(ad::matmul(x, vars[2 * l]), vars[2 * l + 1]));
  }
  const std::size_t head = 2 * static_cast<std::size_t>(config.num_layers);
  const Var raw = ad::add_bias(ad::matmul(x, vars[head]), vars[head + 1]);
  SffOutputs out;
  out.mu = ad::slice(raw, 1, 0, horizon);
  out.sigma = graphs::sigma_activation(ad::slice(raw, 1, horizon, horizon));
  return out;
}

}  // namespace

TrainedModel train_sff(const TimeSeries& train, const ModelConfig& config) {
  config.validate();
  const std::size_t context_len = static_cast<std::size_t>(config.context_length);
  const std::size_t horizon = static_cast<std::size_t>(config.horizon);
  const std::size_t window = context_len + horizon;
  detail::require_window(train, window, "sff");

  TrainedModel model;
  model.config = config;
  model.params = init_sff_params(config);

  auto build_loss = [&](ad::Tape& tape, const std::vector<Var>& vars,
                        const std::vector<std::size_t>& starts) -> Var {
    const std::size_t batch = starts.size();
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
    const SffOutputs out = sff_forward(tape, vars, config, std::move(context));
    const Var terms = graphs::gaussian_nll_terms(out.mu, out.sigma, tape.constant(std::move(target)));
    return ad::reduce_mean(terms);
  };

  detail::run_training(model.params, config, train.size(), window, build_loss, model.loss_curve,
                       model.final_loss);
  return model;
}

ForecastDistribution predict_sff(const TrainedModel& model, const TimeSeries& context) {
  const ModelConfig& config = model.config;
  if (model.params.empty()) throw StateError("sff: model has no trained parameters");
  const std::size_t context_len = static_cast<std::size_t>(config.context_length);
  if (context.size() < context_len) {
    throw SizingError("sff: prediction needs a context of " + std::to_string(context_len) +
                      " samples, got " + std::to_string(context.size()));
  }
  const std::size_t offset = context.size() - context_len;
  const double nu = detail::window_scale(context, offset, context_len);

  ad::Tape tape;
  const std::vector<Var> vars = detail::bind_params(tape, model.params);
  Tensor scaled({1, context_len});
  for (std::size_t t = 0; t < context_len; ++t) scaled[t] = context.values[offset + t] / nu;
  const SffOutputs out = sff_forward(tape, vars, config, std::move(scaled));

  std::vector<GaussianParams> per_step(static_cast<std::size_t>(config.horizon));
  for (std::size_t t = 0; t < per_step.size(); ++t) {
    per_step[t].mu = out.mu.value()[t] * nu;
    per_step[t].sigma = out.sigma.value()[t] * nu;
  }
  return ForecastDistribution::from_gaussians(context.end_unix(), context.step_seconds,
                                              std::move(per_step));
}

}  // namespace prbcast
