#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "prbcast/gaussian.hpp"

namespace prbcast {

/// Single-trajectory forecast from the point baselines.
struct PointForecast {
  std::int64_t start_unix = 0;
  std::int64_t step_seconds = 900;
  std::vector<double> values;

  std::size_t horizon() const { return values.size(); }
};

/// Predictive distribution over a horizon: either S sample paths or one
/// Gaussian per step. Quantiles from sample paths interpolate between order
/// statistics; parametric quantiles are mu + sigma * Phi^-1(level).
class ForecastDistribution {
 public:
  static ForecastDistribution from_sample_paths(std::int64_t start_unix, std::int64_t step_seconds,
                                                std::vector<std::vector<double>> paths);
  static ForecastDistribution from_gaussians(std::int64_t start_unix, std::int64_t step_seconds,
                                             std::vector<GaussianParams> per_step);

  std::int64_t start_unix() const { return start_unix_; }
  std::int64_t step_seconds() const { return step_seconds_; }
  std::size_t horizon() const { return horizon_; }

  bool has_paths() const { return !paths_.empty(); }
  bool is_parametric() const { return !gaussians_.empty(); }
  std::size_t num_paths() const { return paths_.size(); }

  const std::vector<std::vector<double>>& paths() const { return paths_; }
  const std::vector<GaussianParams>& gaussians() const { return gaussians_; }

  /// Per-step quantile at `level` in (0, 1); throws DomainError outside.
  std::vector<double> quantile(double level) const;
  std::vector<double> median() const { return quantile(0.5); }

  /// All sample values for one step (parametric form has none).
  std::vector<double> samples_at(std::size_t step) const;

  /// Draws `num_paths` independent per-step sample paths from a parametric
  /// distribution (pass-through when paths already exist). Deterministic
  /// per seed.
  ForecastDistribution materialized(std::size_t num_paths, std::uint64_t seed) const;

 private:
  ForecastDistribution() = default;

  std::int64_t start_unix_ = 0;
  std::int64_t step_seconds_ = 900;
  std::size_t horizon_ = 0;
  std::vector<std::vector<double>> paths_;            // S x N, S >= 2
  std::vector<std::vector<double>> sorted_by_step_;   // N columns, each sorted (quantile cache)
  std::vector<GaussianParams> gaussians_;             // per step
};

/// Empirical quantile of a sorted sample using linear interpolation between
/// order statistics (position (n-1) * level).
double sorted_quantile(const std::vector<double>& sorted, double level);

}  // namespace prbcast
