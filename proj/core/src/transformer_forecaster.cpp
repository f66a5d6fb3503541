#include <cmath>

#include "prbcast/errors.hpp"
#include "prbcast/forecaster.hpp"
#include "prbcast/model_graphs.hpp"
#include "train_common.hpp"

namespace prbcast {

namespace {

using ad::Tensor;
using ad::Var;
using detail::kTimeFeatures;

// Minimal encoder-decoder: one pre-norm encoder layer (self-attention +
// feed-forward) over the embedded context, one pre-norm decoder layer
// (self-attention, encoder-decoder cross-attention, feed-forward) over the
// embedded horizon time features, then per-step Gaussian heads. The decoder
// emits all horizon steps in a single pass.
constexpr std::size_t kEncFeatures = 1 + kTimeFeatures;
constexpr std::size_t kDecFeatures = kTimeFeatures;

struct TransformerShape {
  std::size_t d_model;
  std::size_t d_ff;
};

void push_linear(std::vector<ad::Param>& params, const std::string& name, std::size_t in,
                 std::size_t out, Xoshiro256StarStar& rng) {
  params.push_back({name + ".w", detail::init_weight(in, out, rng)});
  params.push_back({name + ".b", detail::zeros_1d(out)});
}

void push_norm(std::vector<ad::Param>& params, const std::string& name, std::size_t d) {
  params.push_back({name + ".gain", ad::Tensor::full({d}, 1.0)});
  params.push_back({name + ".bias", detail::zeros_1d(d)});
}

void push_attention(std::vector<ad::Param>& params, const std::string& name, std::size_t d,
                    Xoshiro256StarStar& rng) {
  push_linear(params, name + ".q", d, d, rng);
  push_linear(params, name + ".k", d, d, rng);
  push_linear(params, name + ".v", d, d, rng);
  push_linear(params, name + ".o", d, d, rng);
}

std::vector<ad::Param> init_transformer_params(const ModelConfig& config) {
  Xoshiro256StarStar rng(derive_seed(config.seed, "init"));
  const std::size_t d = static_cast<std::size_t>(config.model_dim);
  const std::size_t ff = static_cast<std::size_t>(config.hidden_size);
  std::vector<ad::Param> params;
  push_linear(params, "enc.embed", kEncFeatures, d, rng);
  push_linear(params, "dec.embed", kDecFeatures, d, rng);
  push_norm(params, "enc.norm1", d);
  push_attention(params, "enc.self", d, rng);
  push_norm(params, "enc.norm2", d);
  push_linear(params, "enc.ffn.1", d, ff, rng);
  push_linear(params, "enc.ffn.2", ff, d, rng);
  push_norm(params, "enc.final_norm", d);
  push_norm(params, "dec.norm1", d);
  push_attention(params, "dec.self", d, rng);
  push_norm(params, "dec.norm2", d);
  push_attention(params, "dec.cross", d, rng);
  push_norm(params, "dec.norm3", d);
  push_linear(params, "dec.ffn.1", d, ff, rng);
  push_linear(params, "dec.ffn.2", ff, d, rng);
  push_norm(params, "dec.final_norm", d);
  push_linear(params, "head.mu", d, 1, rng);
  push_linear(params, "head.sigma", d, 1, rng);
  return params;
}

struct BoundTransformer {
  Var enc_embed_w, enc_embed_b;
  Var dec_embed_w, dec_embed_b;
  graphs::LayerNormVars enc_norm1;
  graphs::AttentionVars enc_self;
  graphs::LayerNormVars enc_norm2;
  graphs::FfnVars enc_ffn;
  graphs::LayerNormVars enc_final;
  graphs::LayerNormVars dec_norm1;
  graphs::AttentionVars dec_self;
  graphs::LayerNormVars dec_norm2;
  graphs::AttentionVars dec_cross;
  graphs::LayerNormVars dec_norm3;
  graphs::FfnVars dec_ffn;
  graphs::LayerNormVars dec_final;
  Var mu_w, mu_b;
  Var sigma_w, sigma_b;
};

BoundTransformer bind_transformer(const std::vector<Var>& v) {
  std::size_t i = 0;
  auto next = [&]() { return v[i++]; };
  BoundTransformer b;
  b.enc_embed_w = next();
  b.enc_embed_b = next();
  b.dec_embed_w = next();
  b.dec_embed_b = next();
  b.enc_norm1 = {next(), next()};
  b.enc_self = {next(), next(), next(), next(), next(), next(), next(), next()};
  b.enc_norm2 = {next(), next()};
  b.enc_ffn = {next(), next(), next(), next()};
  b.enc_final = {next(), next()};
  b.dec_norm1 = {next(), next()};
  b.dec_self = {next(), next(), next(), next(), next(), next(), next(), next()};
  b.dec_norm2 = {next(), next()};
  b.dec_cross = {next(), next(), next(), next(), next(), next(), next(), next()};
  b.dec_norm3 = {next(), next()};
  b.dec_ffn = {next(), next(), next(), next()};
  b.dec_final = {next(), next()};
  b.mu_w = next();
  b.mu_b = next();
  b.sigma_w = next();
  b.sigma_b = next();
  return b;
}

/// Sinusoidal positional encoding table, (len, d).
Tensor positional_encoding(std::size_t len, std::size_t d) {
  Tensor pe({len, d});
  for (std::size_t pos = 0; pos < len; ++pos) {
    for (std::size_t i = 0; i < d; ++i) {
      const double angle = static_cast<double>(pos) /
                           std::pow(10000.0, static_cast<double>(2 * (i / 2)) / static_cast<double>(d));
      pe[pos * d + i] = (i % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

/// Broadcast-add a (T, D) table onto a (B, T, D) tensor by tiling it.
Var add_position_table(ad::Tape& tape, const Var& x, const Tensor& table) {
  const std::size_t batch = x.shape()[0];
  Tensor tiled({batch, table.dim(0), table.dim(1)});
  for (std::size_t bi = 0; bi < batch; ++bi) {
    for (std::size_t j = 0; j < table.numel(); ++j) tiled[bi * table.numel() + j] = table[j];
  }
  return ad::add(x, tape.constant(std::move(tiled)));
}

struct TransformerOutputs {
  Var mu;     // (B, H, 1)
  Var sigma;  // (B, H, 1)
};

/// Full forward pass from already-assembled encoder inputs (B, C, 5) and
/// decoder inputs (B, H, 4). Exposed to the prediction path and, through
/// predict_transformer's permutation diagnostic, to tests.
TransformerOutputs transformer_forward(ad::Tape& tape, const BoundTransformer& b,
                                       const ModelConfig& config, Tensor enc_in, Tensor dec_in) {
  const std::size_t heads = static_cast<std::size_t>(config.num_heads);
  const std::size_t d = static_cast<std::size_t>(config.model_dim);
  const std::size_t context_len = enc_in.dim(1);
  const std::size_t horizon = dec_in.dim(1);

  Var enc = ad::add_bias(ad::matmul(tape.constant(std::move(enc_in)), b.enc_embed_w), b.enc_embed_b);
  Var dec = ad::add_bias(ad::matmul(tape.constant(std::move(dec_in)), b.dec_embed_w), b.dec_embed_b);
  if (config.use_positional_encoding) {
    enc = add_position_table(tape, enc, positional_encoding(context_len, d));
    dec = add_position_table(tape, dec, positional_encoding(horizon, d));
  }

  // Encoder layer (pre-norm).
  {
    const Var normed = graphs::apply_layer_norm(b.enc_norm1, enc);
    enc = ad::add(enc, graphs::multihead_attention(b.enc_self, normed, normed, heads));
    enc = ad::add(enc, graphs::feed_forward(b.enc_ffn, graphs::apply_layer_norm(b.enc_norm2, enc)));
    enc = graphs::apply_layer_norm(b.enc_final, enc);
  }

  // Decoder layer (pre-norm); single-pass decoding needs no causal mask.
  {
    const Var normed = graphs::apply_layer_norm(b.dec_norm1, dec);
    dec = ad::add(dec, graphs::multihead_attention(b.dec_self, normed, normed, heads));
    dec = ad::add(dec, graphs::multihead_attention(
                           b.dec_cross, graphs::apply_layer_norm(b.dec_norm2, dec), enc, heads));
    dec = ad::add(dec, graphs::feed_forward(b.dec_ffn, graphs::apply_layer_norm(b.dec_norm3, dec)));
    dec = graphs::apply_layer_norm(b.dec_final, dec);
  }

  TransformerOutputs out;
  out.mu = ad::add_bias(ad::matmul(dec, b.mu_w), b.mu_b);
  out.sigma = graphs::sigma_activation(ad::add_bias(ad::matmul(dec, b.sigma_w), b.sigma_b));
  return out;
}

void fill_encoder_input(const TimeSeries& series, std::size_t start, std::size_t context_len,
                        double nu, std::size_t batch_index, Tensor& x) {
  for (std::size_t t = 0; t < context_len; ++t) {
    double* row = x.data() + (batch_index * context_len + t) * kEncFeatures;
    row[0] = series.values[start + t] / nu;
    detail::write_time_features(series.timestamp_at(start + t), row + 1);
  }
}

void fill_decoder_input(const TimeSeries& series, std::size_t first_index, std::size_t horizon,
                        std::size_t batch_index, Tensor& x) {
  for (std::size_t t = 0; t < horizon; ++t) {
    double* row = x.data() + (batch_index * horizon + t) * kDecFeatures;
    detail::write_time_features(series.timestamp_at(first_index + t), row);
  }
}

}  // namespace

TrainedModel train_transformer(const TimeSeries& train, const ModelConfig& config) {
  config.validate();
  const std::size_t context_len = static_cast<std::size_t>(config.context_length);
  const std::size_t horizon = static_cast<std::size_t>(config.horizon);
  const std::size_t window = context_len + horizon;
  detail::require_window(train, window, "transformer");

  TrainedModel model;
  model.config = config;
  model.params = init_transformer_params(config);

  auto build_loss = [&](ad::Tape& tape, const std::vector<Var>& vars,
                        const std::vector<std::size_t>& starts) -> Var {
    const std::size_t batch = starts.size();
    const BoundTransformer bound = bind_transformer(vars);
    Tensor enc_in({batch, context_len, kEncFeatures});
    Tensor dec_in({batch, horizon, kDecFeatures});
    Tensor target({batch, horizon, 1});
    for (std::size_t bi = 0; bi < batch; ++bi) {
      const double nu = detail::window_scale(train, starts[bi], context_len);
      fill_encoder_input(train, starts[bi], context_len, nu, bi, enc_in);
      fill_decoder_input(train, starts[bi] + context_len, horizon, bi, dec_in);
      for (std::size_t t = 0; t < horizon; ++t) {
        target[bi * horizon + t] = train.values[starts[bi] + context_len + t] / nu;
      }
    }
    const TransformerOutputs out =
        transformer_forward(tape, bound, config, std::move(enc_in), std::move(dec_in));
    const Var terms =
        graphs::gaussian_nll_terms(out.mu, out.sigma, tape.constant(std::move(target)));
    return ad::reduce_mean(terms);
  };

  detail::run_training(model.params, config, train.size(), window, build_loss, model.loss_curve,
                       model.final_loss);
  return model;
}

ForecastDistribution predict_transformer(const TrainedModel& model, const TimeSeries& context) {
  const ModelConfig& config = model.config;
  if (model.params.empty()) throw StateError("transformer: model has no trained parameters");
  const std::size_t context_len = static_cast<std::size_t>(config.context_length);
  const std::size_t horizon = static_cast<std::size_t>(config.horizon);
  if (context.size() < context_len) {
    throw SizingError("transformer: prediction needs a context of " + std::to_string(context_len) +
                      " samples, got " + std::to_string(context.size()));
  }
  const std::size_t offset = context.size() - context_len;
  const double nu = detail::window_scale(context, offset, context_len);

  ad::Tape tape;
  const std::vector<Var> vars = detail::bind_params(tape, model.params);
  const BoundTransformer bound = bind_transformer(vars);
  Tensor enc_in({1, context_len, kEncFeatures});
  Tensor dec_in({1, horizon, kDecFeatures});
  fill_encoder_input(context, offset, context_len, nu, 0, enc_in);
  fill_decoder_input(context, context.size(), horizon, 0, dec_in);
  const TransformerOutputs out =
      transformer_forward(tape, bound, config, std::move(enc_in), std::move(dec_in));

  std::vector<GaussianParams> per_step(horizon);
  for (std::size_t t = 0; t < horizon; ++t) {
    per_step[t].mu = out.mu.value()[t] * nu;
    per_step[t].sigma = out.sigma.value()[t] * nu;
  }
  return ForecastDistribution::from_gaussians(context.end_unix(), context.step_seconds,
                                              std::move(per_step));
}

}  // namespace prbcast
