#pragma once

#include <cstdint>
#include <string>

#include "prbcast/time_series.hpp"

namespace prbcast {

/// Synthetic PRB trace: base load + daily/weekly sinusoids + AR(1) noise +
/// Poisson-placed rectangular bursts, clipped to [0, capacity].
///
/// Stands in for live O1 telemetry; generation is bit-deterministic per seed.
struct TraceGenConfig {
  std::size_t length = 4000;
  double base_load = 120.0;
  double daily_amplitude = 60.0;
  double weekly_amplitude = 0.0;
  double noise_ar_coeff = 0.0;  ///< in [0, 1)
  double noise_sigma = 0.0;
  double burst_rate = 0.0;  ///< expected bursts per day
  double burst_height = 0.0;
  std::uint64_t seed = 0;
  double capacity = 273.0;  ///< default: 100 MHz NR carrier, 273 PRBs

  std::int64_t step_seconds = 900;  ///< 15-minute sampling, 96 steps/day
  std::int64_t start_unix = 1704067200;  ///< 2024-01-01T00:00:00Z (a Monday)
  std::string series_id = "cell-0";

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// values[t] = clip(base + A_d sin(2pi t / day) + A_w sin(2pi t / week)
///                  + e_t + bursts_t, 0, capacity)
/// with e_t = ar * e_{t-1} + N(0, sigma^2), and bursts arriving as a
/// per-step Bernoulli(rate * step / day) process, each adding a
/// `burst_height` rectangle lasting 4 steps.
TimeSeries generate_prb_trace(const TraceGenConfig& config);

}  // namespace prbcast
