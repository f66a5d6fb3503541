#include "prbcast/trace_gen.hpp"

#include <algorithm>
#include <cmath>

#include "prbcast/errors.hpp"
#include "prbcast/rng.hpp"

namespace prbcast {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
constexpr std::int64_t kDaySeconds = 86400;
constexpr std::int64_t kWeekSeconds = 7 * kDaySeconds;
constexpr int kBurstSteps = 4;
}  // namespace

void TraceGenConfig::validate() const {
  if (length == 0) throw ConfigError("trace config: length must be positive");
  if (!(capacity > 0.0)) throw ConfigError("trace config: capacity must be positive");
  if (!(base_load > 0.0) || base_load >= capacity) {
    throw ConfigError("trace config: base_load must lie in (0, capacity)");
  }
  if (daily_amplitude < 0.0) throw ConfigError("trace config: daily_amplitude must be >= 0");
  if (weekly_amplitude < 0.0) throw ConfigError("trace config: weekly_amplitude must be >= 0");
  if (noise_ar_coeff < 0.0 || noise_ar_coeff >= 1.0) {
    throw ConfigError("trace config: noise_ar_coeff must lie in [0, 1)");
  }
  if (noise_sigma < 0.0) throw ConfigError("trace config: noise_sigma must be >= 0");
  if (burst_rate < 0.0) throw ConfigError("trace config: burst_rate must be >= 0");
  if (burst_height < 0.0) throw ConfigError("trace config: burst_height must be >= 0");
  if (step_seconds <= 0) throw ConfigError("trace config: step_seconds must be positive");
}

TimeSeries generate_prb_trace(const TraceGenConfig& config) {
  config.validate();

  TimeSeries series;
  series.series_id = config.series_id;
  series.start_unix = config.start_unix;
  series.step_seconds = config.step_seconds;
  series.capacity = config.capacity;
  series.values.resize(config.length);

  Xoshiro256StarStar rng(config.seed);
  const double day_frac = static_cast<double>(config.step_seconds) / kDaySeconds;
  const double week_frac = static_cast<double>(config.step_seconds) / kWeekSeconds;
  const double burst_prob = config.burst_rate * day_frac;

  std::vector<double> burst(config.length, 0.0);
  double e = 0.0;
  for (std::size_t t = 0; t < config.length; ++t) {
    // Fixed draw order per step (noise first, then burst arrival) pins the
    // stream layout that determinism tests rely on.
    e = config.noise_ar_coeff * e + rng.normal() * config.noise_sigma;
    if (rng.uniform01() < burst_prob) {
      for (std::size_t k = t; k < std::min(t + kBurstSteps, config.length); ++k) {
        burst[k] += config.burst_height;
      }
    }
    const double td = static_cast<double>(t);
    const double level = config.base_load +
                         config.daily_amplitude * std::sin(kTwoPi * td * day_frac) +
                         config.weekly_amplitude * std::sin(kTwoPi * td * week_frac) + e + burst[t];
    series.values[t] = std::clamp(level, 0.0, config.capacity);
  }
  return series;
}

}  // namespace prbcast
