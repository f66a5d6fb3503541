#include "prbcast/forecaster.hpp"

#include "prbcast/errors.hpp"

namespace prbcast {

TrainedModel train_model(const TimeSeries& train, const ModelConfig& config) {
  config.validate();
  switch (config.kind) {
    case ModelKind::kSeasonalNaive: {
      // Nothing to learn; the config is the model.
      TrainedModel model;
      model.config = config;
      return model;
    }
    case ModelKind::kLstm:
      return train_lstm(train, config);
    case ModelKind::kSff:
      return train_sff(train, config);
    case ModelKind::kDeepar:
      return train_deepar(train, config);
    case ModelKind::kTransformer:
      return train_transformer(train, config);
  }
  throw ContractError("train_model: unhandled model kind");
}

Forecast make_forecast(const TrainedModel& model, const TimeSeries& context, int horizon,
                       int num_paths, std::uint64_t seed) {
  if (horizon <= 0) throw ConfigError("forecast horizon must be positive");
  if (model.config.kind != ModelKind::kSeasonalNaive && horizon > model.config.horizon) {
    throw ConfigError("requested horizon " + std::to_string(horizon) +
                      " exceeds trained horizon " + std::to_string(model.config.horizon));
  }
  switch (model.config.kind) {
    case ModelKind::kSeasonalNaive:
      return seasonal_naive_forecast(context, model.config.season_length, horizon);
    case ModelKind::kLstm: {
      PointForecast pf = predict_lstm(model, context);
      pf.values.resize(static_cast<std::size_t>(horizon));
      return pf;
    }
    case ModelKind::kSff: {
      ForecastDistribution fd = predict_sff(model, context);
      if (static_cast<std::size_t>(horizon) == fd.horizon()) return fd;
      std::vector<GaussianParams> trimmed(fd.gaussians().begin(),
                                          fd.gaussians().begin() + horizon);
      return ForecastDistribution::from_gaussians(fd.start_unix(), fd.step_seconds(),
                                                  std::move(trimmed));
    }
    case ModelKind::kDeepar:
      return deepar_sample_paths(model, context, horizon, num_paths, seed);
    case ModelKind::kTransformer: {
      ForecastDistribution fd = predict_transformer(model, context);
      if (static_cast<std::size_t>(horizon) == fd.horizon()) return fd;
      std::vector<GaussianParams> trimmed(fd.gaussians().begin(),
                                          fd.gaussians().begin() + horizon);
      return ForecastDistribution::from_gaussians(fd.start_unix(), fd.step_seconds(),
                                                  std::move(trimmed));
    }
  }
  throw ContractError("make_forecast: unhandled model kind");
}

}  // namespace prbcast
