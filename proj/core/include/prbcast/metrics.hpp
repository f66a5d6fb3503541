#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "prbcast/forecast.hpp"

namespace prbcast::metrics {

/// The nine report levels 0.1 .. 0.9.
inline constexpr std::array<double, 9> kQuantileLevels = {0.1, 0.2, 0.3, 0.4, 0.5,
                                                          0.6, 0.7, 0.8, 0.9};

/// (1/N) sum (Y - F)^2.
double mse(std::span<const double> actual, std::span<const double> forecast);

/// (1/N) sum |Y - F|: the plain mean absolute error.
double mae_eq2(std::span<const double> actual, std::span<const double> forecast);

/// mae(actual, forecast) divided by the in-sample seasonal-naive MAE of the
/// training series, mean_t |train[t] - train[t-season]|. Throws
/// DegenerateScaleError when the training series is perfectly seasonal.
double mase_scaled(std::span<const double> actual, std::span<const double> forecast,
                   std::span<const double> train, int season_length);

/// (1/N) sum |Y - F| / |Y|. Any Y == 0 throws DomainError; callers that want
/// to skip zeros must pre-filter explicitly.
double mape(std::span<const double> actual, std::span<const double> forecast);

/// sum |Y - F| / sum |Y|. Throws DegenerateScaleError on all-zero actuals.
double nd(std::span<const double> actual, std::span<const double> forecast);

/// (1/N) sum 1{Y < F}: fraction of actuals strictly below the level-q
/// forecast. Ties count as not covered.
double coverage(std::span<const double> actual, std::span<const double> quantile_forecast);

enum class QlAggregation { kSum, kMean };

/// Pinball loss at level q:
///   (Y - F) * q       when Y >= F,
///   (F - Y) * (1 - q) when Y <  F;
/// aggregated as a sum by default (the comparison table's convention).
double quantile_loss(std::span<const double> actual, std::span<const double> quantile_forecast,
                     double q, QlAggregation agg = QlAggregation::kSum);

/// All metric values for one (model, test window) pair. Distribution-based
/// fields are absent for models evaluated as pure point forecasters.
struct EvaluationReport {
  std::string model;
  std::size_t n = 0;
  double mse = 0.0;
  double mae_eq2 = 0.0;
  double mase_scaled = 0.0;
  double mape = 0.0;
  std::optional<double> nd;
  std::optional<std::array<double, 9>> quantile_loss;  ///< sum-aggregated, levels 0.1..0.9
  std::optional<std::array<double, 9>> coverage;

  std::string to_json() const;
  static EvaluationReport from_json(const std::string& text);
};

enum class PointEvalMode {
  kPointOnly,          ///< report mse/mae/mase/mape only (the LSTM treatment)
  kConstantQuantiles,  ///< use the point value at every level (the SN treatment)
};

EvaluationReport evaluate_point(const std::string& model_name, const PointForecast& forecast,
                                std::span<const double> actual, std::span<const double> train,
                                int season_length, PointEvalMode mode);

/// Point metrics are computed on the predictive median.
EvaluationReport evaluate_distribution(const std::string& model_name,
                                       const ForecastDistribution& forecast,
                                       std::span<const double> actual,
                                       std::span<const double> train, int season_length);

}  // namespace prbcast::metrics
