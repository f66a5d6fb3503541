#include "prbcast/metrics.hpp"

#include <cmath>
#include <cstdio>

#include <nlohmann/json.hpp>

#include "prbcast/errors.hpp"

namespace prbcast::metrics {

namespace {

void check_lengths(const char* op, std::span<const double> a, std::span<const double> f) {
  if (a.size() != f.size() || a.empty()) {
    throw ContractError(std::string(op) + ": length mismatch (actual " + std::to_string(a.size()) +
                        ", forecast " + std::to_string(f.size()) + ")");
  }
}

// mean of squares >= square of mean of |residuals| (Jensen); a violation
// means a metric implementation broke.
void check_jensen(double mse_v, double mae_v) {
  if (mse_v + 1e-9 * (1.0 + mse_v) < mae_v * mae_v) {
    throw ContractError("evaluation: mse " + std::to_string(mse_v) + " < mae^2 " +
                        std::to_string(mae_v * mae_v));
  }
}

}  // namespace

double mse(std::span<const double> actual, std::span<const double> forecast) {
  check_lengths("mse", actual, forecast);
  double acc = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double d = actual[i] - forecast[i];
    acc += d * d;
  }
  return acc / static_cast<double>(actual.size());
}

double mae_eq2(std::span<const double> actual, std::span<const double> forecast) {
  check_lengths("mae_eq2", actual, forecast);
  double acc = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) acc += std::abs(actual[i] - forecast[i]);
  return acc / static_cast<double>(actual.size());
}

double mase_scaled(std::span<const double> actual, std::span<const double> forecast,
                   std::span<const double> train, int season_length) {
  check_lengths("mase_scaled", actual, forecast);
  if (season_length <= 0) throw ConfigError("mase_scaled: season_length must be positive");
  const std::size_t season = static_cast<std::size_t>(season_length);
  if (train.size() <= season) {
    throw SizingError("mase_scaled: training series of " + std::to_string(train.size()) +
                      " samples cannot scale with season " + std::to_string(season));
  }
  double denom = 0.0;
  for (std::size_t t = season; t < train.size(); ++t) {
    denom += std::abs(train[t] - train[t - season]);
  }
  denom /= static_cast<double>(train.size() - season);
  if (denom == 0.0) {
    throw DegenerateScaleError(
        "mase_scaled: training series is perfectly seasonal (zero in-sample naive error)");
  }
  return mae_eq2(actual, forecast) / denom;
}

double mape(std::span<const double> actual, std::span<const double> forecast) {
  check_lengths("mape", actual, forecast);
  double acc = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (actual[i] == 0.0) {
      throw DomainError("mape: actual value at index " + std::to_string(i) +
                        " is zero; percentage error undefined");
    }
    acc += std::abs(actual[i] - forecast[i]) / std::abs(actual[i]);
  }
  return acc / static_cast<double>(actual.size());
}

double nd(std::span<const double> actual, std::span<const double> forecast) {
  check_lengths("nd", actual, forecast);
  double num = 0.0;
  double denom = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    num += std::abs(actual[i] - forecast[i]);
    denom += std::abs(actual[i]);
  }
  if (denom == 0.0) throw DegenerateScaleError("nd: all actual values are zero");
  return num / denom;
}

double coverage(std::span<const double> actual, std::span<const double> quantile_forecast) {
  check_lengths("coverage", actual, quantile_forecast);
  std::size_t below = 0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (actual[i] < quantile_forecast[i]) ++below;
  }
  return static_cast<double>(below) / static_cast<double>(actual.size());
}

double quantile_loss(std::span<const double> actual, std::span<const double> quantile_forecast,
                     double q, QlAggregation agg) {
  check_lengths("quantile_loss", actual, quantile_forecast);
  if (!(q > 0.0) || !(q < 1.0)) {
    throw DomainError("quantile_loss: level " + std::to_string(q) + " outside (0, 1)");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double y = actual[i];
    const double f = quantile_forecast[i];
    acc += y >= f ? (y - f) * q : (f - y) * (1.0 - q);
  }
  return agg == QlAggregation::kSum ? acc : acc / static_cast<double>(actual.size());
}

EvaluationReport evaluate_point(const std::string& model_name, const PointForecast& forecast,
                                std::span<const double> actual, std::span<const double> train,
                                int season_length, PointEvalMode mode) {
  check_lengths("evaluate_point", actual, forecast.values);
  EvaluationReport report;
  report.model = model_name;
  report.n = actual.size();
  report.mse = mse(actual, forecast.values);
  report.mae_eq2 = mae_eq2(actual, forecast.values);
  report.mase_scaled = mase_scaled(actual, forecast.values, train, season_length);
  report.mape = mape(actual, forecast.values);
  check_jensen(report.mse, report.mae_eq2);
  if (mode == PointEvalMode::kConstantQuantiles) {
    report.nd = nd(actual, forecast.values);
    std::array<double, 9> ql{};
    std::array<double, 9> cov{};
    for (std::size_t i = 0; i < kQuantileLevels.size(); ++i) {
      ql[i] = quantile_loss(actual, forecast.values, kQuantileLevels[i]);
      cov[i] = coverage(actual, forecast.values);
    }
    report.quantile_loss = ql;
    report.coverage = cov;
  }
  return report;
}

EvaluationReport evaluate_distribution(const std::string& model_name,
                                       const ForecastDistribution& forecast,
                                       std::span<const double> actual,
                                       std::span<const double> train, int season_length) {
  if (actual.size() != forecast.horizon()) {
    throw ContractError("evaluate_distribution: horizon " + std::to_string(forecast.horizon()) +
                        " vs actual length " + std::to_string(actual.size()));
  }
  std::vector<std::vector<double>> quantiles;
  quantiles.reserve(kQuantileLevels.size());
  for (double level : kQuantileLevels) quantiles.push_back(forecast.quantile(level));
  const std::vector<double>& median = quantiles[4];

  EvaluationReport report;
  report.model = model_name;
  report.n = actual.size();
  report.mse = mse(actual, median);
  report.mae_eq2 = mae_eq2(actual, median);
  report.mase_scaled = mase_scaled(actual, median, train, season_length);
  report.mape = mape(actual, median);
  check_jensen(report.mse, report.mae_eq2);
  report.nd = nd(actual, median);
  std::array<double, 9> ql{};
  std::array<double, 9> cov{};
  for (std::size_t i = 0; i < kQuantileLevels.size(); ++i) {
    ql[i] = quantile_loss(actual, quantiles[i], kQuantileLevels[i]);
    cov[i] = coverage(actual, quantiles[i]);
  }
  report.quantile_loss = ql;
  report.coverage = cov;
  return report;
}

namespace {

std::string level_key(double level) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "%.1f", level);
  return buf;
}

}  // namespace

std::string EvaluationReport::to_json() const {
  nlohmann::ordered_json j;
  j["model"] = model;
  j["n"] = n;
  j["mse"] = mse;
  j["mae_eq2"] = mae_eq2;
  j["mase_scaled"] = mase_scaled;
  j["mape"] = mape;
  if (nd) j["nd"] = *nd;
  if (quantile_loss) {
    nlohmann::ordered_json ql;
    for (std::size_t i = 0; i < kQuantileLevels.size(); ++i) {
      ql[level_key(kQuantileLevels[i])] = (*quantile_loss)[i];
    }
    j["quantile_loss"] = std::move(ql);
  }
  if (coverage) {
    nlohmann::ordered_json cov;
    for (std::size_t i = 0; i < kQuantileLevels.size(); ++i) {
      cov[level_key(kQuantileLevels[i])] = (*coverage)[i];
    }
    j["coverage"] = std::move(cov);
  }
  return j.dump(2);
}

EvaluationReport EvaluationReport::from_json(const std::string& text) {
  EvaluationReport report;
  try {
    const auto j = nlohmann::json::parse(text);
    report.model = j.at("model").get<std::string>();
    report.n = j.at("n").get<std::size_t>();
    report.mse = j.at("mse").get<double>();
    report.mae_eq2 = j.at("mae_eq2").get<double>();
    report.mase_scaled = j.at("mase_scaled").get<double>();
    report.mape = j.at("mape").get<double>();
    if (j.contains("nd")) report.nd = j.at("nd").get<double>();
    if (j.contains("quantile_loss")) {
      std::array<double, 9> ql{};
      for (std::size_t i = 0; i < kQuantileLevels.size(); ++i) {
        ql[i] = j.at("quantile_loss").at(level_key(kQuantileLevels[i])).get<double>();
      }
      report.quantile_loss = ql;
    }
    if (j.contains("coverage")) {
      std::array<double, 9> cov{};
      for (std::size_t i = 0; i < kQuantileLevels.size(); ++i) {
        cov[i] = j.at("coverage").at(level_key(kQuantileLevels[i])).get<double>();
      }
      report.coverage = cov;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("evaluation report: bad JSON: ") + e.what());
  }
  return report;
}

}  // namespace prbcast::metrics
