#include <string>

#include "prbcast/errors.hpp"
#include "prbcast/forecaster.hpp"

namespace prbcast {

PointForecast seasonal_naive_forecast(const TimeSeries& context, int season_length, int horizon) {
  if (season_length <= 0) throw ConfigError("seasonal_naive: season_length must be positive");
  if (horizon <= 0) throw ConfigError("seasonal_naive: horizon must be positive");
  const std::size_t season = static_cast<std::size_t>(season_length);
  if (context.size() < season) {
    throw SizingError("seasonal_naive: context of " + std::to_string(context.size()) +
                      " samples is shorter than one season (" + std::to_string(season) + ")");
  }
  PointForecast out;
  out.start_unix = context.end_unix();
  out.step_seconds = context.step_seconds;
  out.values.resize(static_cast<std::size_t>(horizon));
  const std::size_t base = context.size() - season;
  for (std::size_t t = 0; t < out.values.size(); ++t) {
    out.values[t] = context.values[base + t % season];
  }
  return out;
}

}  // namespace prbcast
