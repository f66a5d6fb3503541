#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "prbcast/forecast.hpp"
#include "prbcast/model_config.hpp"
#include "prbcast/tensor.hpp"
#include "prbcast/time_series.hpp"

namespace prbcast {

/// Learned weights, the config that produced them, and training metadata.
/// Immutable after training; concurrent readers may forecast in parallel.
struct TrainedModel {
  ModelConfig config;
  std::vector<ad::Param> params;
  double final_loss = 0.0;
  std::vector<double> loss_curve;  ///< mean training loss per epoch
};

using Forecast = std::variant<PointForecast, ForecastDistribution>;

/// forecast[t] = context[len - season + (t mod season)].
/// Throws SizingError when the context is shorter than one season.
PointForecast seasonal_naive_forecast(const TimeSeries& context, int season_length, int horizon);

/// Trains the forecaster selected by config.kind. Deterministic per
/// (data, config, seed). Throws SizingError when the series cannot supply
/// one training window, NumericError (with epoch index) when the loss
/// diverges.
TrainedModel train_model(const TimeSeries& train, const ModelConfig& config);

/// Produces the model's native forecast. `horizon` must not exceed the
/// trained horizon (except for seasonal-naive); `num_paths`/`seed` apply to
/// sampling forecasters only.
Forecast make_forecast(const TrainedModel& model, const TimeSeries& context, int horizon,
                       int num_paths, std::uint64_t seed);

// Per-architecture entry points; train_model/make_forecast dispatch here.
TrainedModel train_lstm(const TimeSeries& train, const ModelConfig& config);
PointForecast predict_lstm(const TrainedModel& model, const TimeSeries& context);

TrainedModel train_sff(const TimeSeries& train, const ModelConfig& config);
ForecastDistribution predict_sff(const TrainedModel& model, const TimeSeries& context);

TrainedModel train_deepar(const TimeSeries& train, const ModelConfig& config);
/// Ancestral sampling: unrolls the RNN over the context, then draws each
/// step from N(mu_t, sigma_t^2) and feeds the draw back. Deterministic per
/// seed. Throws StateError on an untrained model.
ForecastDistribution deepar_sample_paths(const TrainedModel& model, const TimeSeries& context,
                                         int horizon, int num_paths, std::uint64_t seed);

TrainedModel train_transformer(const TimeSeries& train, const ModelConfig& config);
ForecastDistribution predict_transformer(const TrainedModel& model, const TimeSeries& context);

}  // namespace prbcast
