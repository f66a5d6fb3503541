#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace prbcast {

/// Parsed forecast CSV (the backtest artifact): the actual line, any point
/// baselines, and optionally a median with its 0.1/0.9 band.
struct ForecastPlotData {
  std::vector<double> actual;
  std::vector<std::pair<std::string, std::vector<double>>> lines;  ///< baselines and/or "point"
  std::vector<double> median;  ///< empty for point-model files
  std::vector<double> q10;
  std::vector<double> q90;
};

/// Reads a forecast_<model>.csv; throws ParseError listing any missing
/// required columns.
ForecastPlotData parse_forecast_csv(const std::filesystem::path& path);

/// Parsed histogram CSV: per-model bin counts plus marker values.
struct HistogramPlotData {
  std::vector<double> bin_left;
  std::vector<std::pair<std::string, std::vector<int>>> counts;
  std::vector<std::pair<std::string, double>> markers;
};

HistogramPlotData parse_histogram_csv(const std::filesystem::path& path);

/// Self-contained deterministic SVG: one shaded band polygon (when quantile
/// columns exist) plus one polyline per series, axes, and a legend. No
/// external plotting dependency, so identical inputs give identical bytes.
std::string render_forecast_svg(const ForecastPlotData& data, const std::string& title);

/// Fig-style grouped bars (30 per model, zero-height bars included) with
/// vertical marker lines.
std::string render_histogram_svg(const HistogramPlotData& data, const std::string& title);

}  // namespace prbcast
