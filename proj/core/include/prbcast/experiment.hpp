#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "prbcast/comparison.hpp"
#include "prbcast/model_config.hpp"
#include "prbcast/time_series.hpp"
#include "prbcast/trace_gen.hpp"

namespace prbcast {

struct TraceSource {
  enum class Kind { kGenerate, kFile };
  Kind kind = Kind::kGenerate;
  TraceGenConfig generate;
  std::filesystem::path file;
};

/// One end-to-end backtest: trace -> split -> train every model -> evaluate
/// -> comparison table + plot data.
struct ExperimentConfig {
  TraceSource trace;
  SplitSpec split{.context_length = 96, .horizon = 24, .test_windows = 2};
  int season_length = 96;
  int histogram_step = -1;  ///< step (within the first test window); -1 = horizon/2
  /// (name, config) pairs; names key seed fan-out, table columns, and
  /// artifact files.
  std::vector<std::pair<std::string, ModelConfig>> models;
  std::uint64_t master_seed = 0;
  std::filesystem::path output_dir = "backtest-out";

  void validate() const;
};

/// The documented standard setup: the seeded synthetic trace with all five
/// models at desk-scale training budgets.
ExperimentConfig default_experiment_config();

/// Reads a .json or .toml experiment document.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Canonical JSON for hashing and the run manifest.
std::string experiment_config_to_json(const ExperimentConfig& config);

/// FNV-1a fingerprint of the canonical config JSON, as 16 hex digits.
std::string config_hash_hex(const ExperimentConfig& config);

struct ExperimentResult {
  ComparisonTable table;
  std::vector<std::filesystem::path> artifacts;
};

/// Runs the whole experiment and writes table.txt, table.json,
/// report_<model>.json, forecast_<model>.csv, histogram.csv and
/// manifest.json into output_dir. Deterministic per master seed: reruns
/// produce byte-identical artifacts. Any model failure aborts with the
/// model named.
ExperimentResult run_experiment(const ExperimentConfig& config);

/// Pooled-sample histogram behind the distribution figure: fixed bin count
/// over the pooled range of all models' samples at one step.
struct HistogramData {
  std::vector<double> bin_left;
  double bin_width = 0.0;
  std::vector<std::pair<std::string, std::vector<int>>> counts;   ///< per model, one count per bin
  std::vector<std::pair<std::string, double>> markers;            ///< true value + point baselines
};

inline constexpr int kHistogramBins = 30;

HistogramData compute_histogram(
    const std::vector<std::pair<std::string, std::vector<double>>>& samples_per_model,
    const std::vector<std::pair<std::string, double>>& markers, int bins = kHistogramBins);

/// CSV columns: bin_left, one count column per model, then one constant
/// marker_<name> column per marker.
void write_histogram_csv(const HistogramData& data, const std::filesystem::path& path);

}  // namespace prbcast
