#include "prbcast/errors.hpp"
#include "prbcast/forecaster.hpp"
#include "prbcast/model_graphs.hpp"
#include "train_common.hpp"

namespace prbcast {

namespace {

using ad::Tensor;
using ad::Var;
using detail::kTimeFeatures;

// Autoregressive RNN: input at step t is [z_{t-1}/nu, time features of t];
// the top hidden state maps to GaussianParams for z_t/nu.
constexpr std::size_t kInputSize = 1 + kTimeFeatures;

std::vector<ad::Param> init_deepar_params(const ModelConfig& config) {
  Xoshiro256StarStar rng(derive_seed(config.seed, "init"));
  const std::size_t hidden = static_cast<std::size_t>(config.hidden_size);
  std::vector<ad::Param> params;
  for (int l = 0; l < config.num_layers; ++l) {
    const std::size_t in = l == 0 ? kInputSize : hidden;
    Tensor w = detail::init_weight(in + hidden, 4 * hidden, rng);
    Tensor b = detail::zeros_1d(4 * hidden);
    for (std::size_t j = hidden; j < 2 * hidden; ++j) b[j] = 1.0;
    params.push_back({"rnn.l" + std::to_string(l) + ".w", std::move(w)});
    params.push_back({"rnn.l" + std::to_string(l) + ".b", std::move(b)});
  }
  params.push_back({"head.mu.w", detail::init_weight(hidden, 1, rng)});
  params.push_back({"head.mu.b", detail::zeros_1d(1)});
  params.push_back({"head.sigma.w", detail::init_weight(hidden, 1, rng)});
  params.push_back({"head.sigma.b", detail::zeros_1d(1)});
  return params;
}

struct BoundDeepar {
  std::vector<graphs::LstmLayerVars> layers;
  Var mu_w, mu_b;
  Var sigma_w, sigma_b;
};

BoundDeepar bind_deepar(const std::vector<Var>& vars, int num_layers) {
  BoundDeepar bound;
  for (int l = 0; l < num_layers; ++l) bound.layers.push_back({vars[2 * l], vars[2 * l + 1]});
  const std::size_t base = 2 * static_cast<std::size_t>(num_layers);
  bound.mu_w = vars[base];
  bound.mu_b = vars[base + 1];
  bound.sigma_w = vars[base + 2];
  bound.sigma_b = vars[base + 3];
  return bound;
}

struct StepOutput {
  Var mu;     // (B, 1)
  Var sigma;  // (B, 1)
};

StepOutput deepar_step(const BoundDeepar& bound, const Var& input,
                       std::vector<graphs::LstmState>& states) {
  const Var top = graphs::lstm_stack_step(bound.layers, input, states);
  StepOutput out;
  out.mu = ad::add_bias(ad::matmul(top, bound.mu_w), bound.mu_b);
  out.sigma = graphs::sigma_activation(ad::add_bias(ad::matmul(top, bound.sigma_w), bound.sigma_b));
  return out;
}

/// Input tensor for one step: column 0 carries the scaled previous values,
/// the rest the target step's time features (shared across the batch when
/// `timestamps` has one entry per batch row).
Tensor step_input(const std::vector<double>& scaled_prev, const std::vector<std::int64_t>& ts) {
  const std::size_t batch = scaled_prev.size();
  Tensor x({batch, kInputSize});
  for (std::size_t bi = 0; bi < batch; ++bi) {
    x[bi * kInputSize] = scaled_prev[bi];
    detail::write_time_features(ts.size() == 1 ? ts[0] : ts[bi], &x.vec()[bi * kInputSize + 1]);
  }
  return x;
}

}  // namespace

TrainedModel train_deepar(const TimeSeries& train, const ModelConfig& config) {
  config.validate();
  const std::size_t context_len = static_cast<std::size_t>(config.context_length);
  const std::size_t horizon = static_cast<std::size_t>(config.horizon);
  const std::size_t window = context_len + horizon;
  detail::require_window(train, window, "deepar");

  TrainedModel model;
  model.config = config;
  model.params = init_deepar_params(config);
  const std::size_t hidden = static_cast<std::size_t>(config.hidden_size);

  auto build_loss = [&](ad::Tape& tape, const std::vector<Var>& vars,
                        const std::vector<std::size_t>& starts) -> Var {
    const std::size_t batch = starts.size();
    const BoundDeepar bound = bind_deepar(vars, config.num_layers);
    std::vector<double> nu(batch);
    for (std::size_t bi = 0; bi < batch; ++bi) {
      nu[bi] = detail::window_scale(train, starts[bi], context_len);
    }

    auto states = graphs::lstm_zero_state(tape, bound.layers.size(), batch, hidden);
    std::vector<Var> nll_terms;
    nll_terms.reserve(window - 1);
    std::vector<double> prev(batch);
    std::vector<std::int64_t> ts(batch);
    for (std::size_t t = 1; t < window; ++t) {
      Tensor target({batch, 1});
      for (std::size_t bi = 0; bi < batch; ++bi) {
        prev[bi] = train.values[starts[bi] + t - 1] / nu[bi];
        ts[bi] = train.timestamp_at(starts[bi] + t);
        target[bi] = train.values[starts[bi] + t] / nu[bi];
      }
      const StepOutput out = deepar_step(bound, tape.constant(step_input(prev, ts)), states);
      nll_terms.push_back(
          graphs::gaussian_nll_terms(out.mu, out.sigma, tape.constant(std::move(target))));
    }
    return ad::reduce_mean(ad::concat(nll_terms, 1));
  };

  detail::run_training(model.params, config, train.size(), window, build_loss, model.loss_curve,
                       model.final_loss);
  return model;
}

ForecastDistribution deepar_sample_paths(const TrainedModel& model, const TimeSeries& context,
                                         int horizon, int num_paths, std::uint64_t seed) {
  const ModelConfig& config = model.config;
  if (model.params.empty()) throw StateError("deepar: model has no trained parameters");
  if (horizon <= 0) throw ConfigError("deepar: horizon must be positive");
  if (num_paths < 2) throw ConfigError("deepar: need at least 2 sample paths");
  const std::size_t context_len = static_cast<std::size_t>(config.context_length);
  if (context.size() < context_len) {
    throw SizingError("deepar: prediction needs a context of " + std::to_string(context_len) +
                      " samples, got " + std::to_string(context.size()));
  }

  const std::size_t offset = context.size() - context_len;
  const double nu = detail::window_scale(context, offset, context_len);
  const std::size_t paths = static_cast<std::size_t>(num_paths);
  const std::size_t h = static_cast<std::size_t>(horizon);

  ad::Tape tape;
  const std::vector<Var> vars = detail::bind_params(tape, model.params);
  const BoundDeepar bound = bind_deepar(vars, config.num_layers);
  auto states = graphs::lstm_zero_state(tape, bound.layers.size(), paths,
                                        static_cast<std::size_t>(config.hidden_size));

  // Warm up on the observed context (every path sees the same history).
  std::vector<double> prev(paths);
  std::vector<std::int64_t> ts(1);
  for (std::size_t t = 1; t < context_len; ++t) {
    const double scaled = context.values[offset + t - 1] / nu;
    for (auto& p : prev) p = scaled;
    ts[0] = context.timestamp_at(offset + t);
    deepar_step(bound, tape.constant(step_input(prev, ts)), states);
  }

  Xoshiro256StarStar rng(seed);
  std::vector<std::vector<double>> sample_paths(paths, std::vector<double>(h));
  const double last_scaled = context.values[context.size() - 1] / nu;
  for (auto& p : prev) p = last_scaled;
  for (std::size_t k = 0; k < h; ++k) {
    ts[0] = context.timestamp_at(context.size() + k);
    const StepOutput out = deepar_step(bound, tape.constant(step_input(prev, ts)), states);
    for (std::size_t s = 0; s < paths; ++s) {
      const double draw = rng.normal(out.mu.value()[s], out.sigma.value()[s]);
      prev[s] = draw;
      sample_paths[s][k] = draw * nu;
    }
  }
  return ForecastDistribution::from_sample_paths(context.end_unix(), context.step_seconds,
                                                 std::move(sample_paths));
}

}  // namespace prbcast
