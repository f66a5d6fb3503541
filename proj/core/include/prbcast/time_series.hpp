#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace prbcast {

/// A univariate, regularly sampled PRB-utilization trace.
///
/// Values are PRBs in use per sampling interval, bounded by the cell's
/// total capacity. The grid is gapless: sample i sits at
/// start_unix + i * step_seconds.
struct TimeSeries {
  std::string series_id = "cell-0";
  std::int64_t start_unix = 0;  ///< UTC epoch seconds of values[0]
  std::int64_t step_seconds = 900;
  double capacity = 273.0;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }

  std::int64_t timestamp_at(std::size_t i) const {
    return start_unix + static_cast<std::int64_t>(i) * step_seconds;
  }

  /// Timestamp one step past the last sample.
  std::int64_t end_unix() const { return timestamp_at(values.size()); }

  /// Throws ValidationError naming the violated invariant.
  void validate() const;

  /// Copy of samples [first, first + count).
  TimeSeries slice(std::size_t first, std::size_t count) const;
};

/// "2024-01-01T00:00:00Z"; seconds resolution, UTC only.
std::string format_iso8601(std::int64_t unix_seconds);

/// Throws ParseError on anything but the exact format above.
std::int64_t parse_iso8601(const std::string& text);

/// How a trace is carved into training data and rolling evaluation windows.
struct SplitSpec {
  int context_length = 0;  ///< samples visible to the model
  int horizon = 0;         ///< samples to forecast per window
  int test_windows = 1;    ///< rolling windows, strided by `horizon`
};

struct TestWindow {
  TimeSeries context;
  TimeSeries actual;
};

struct TrainTestSplit {
  TimeSeries train;
  std::vector<TestWindow> windows;
};

/// Carves the terminal `test_windows * horizon` samples into rolling windows.
/// Window j's actual covers [L - (W-j)*h, L - (W-j-1)*h); its context is the
/// `context_length` samples immediately before. Train is everything before
/// the first actual, so no actual sample ever leaks into training.
/// Throws SizingError reporting required vs available length.
TrainTestSplit split_train_test(const TimeSeries& series, const SplitSpec& spec);

/// 1 + arithmetic mean of the context; strictly positive, used to normalize
/// model inputs and targets.
double mean_scale(const TimeSeries& context);
double mean_scale(const std::vector<double>& values);

/// CSV with a JSON metadata comment line:
///   # {"series_id":...,"start":...,"step_seconds":...,"capacity":...}
///   timestamp,value
///   2024-01-01T00:00:00Z,120.5
/// Values round-trip exactly (shortest representation that restores the
/// same double).
void save_trace(const TimeSeries& series, const std::filesystem::path& path);

/// Throws ParseError (with line number) on malformed content or a broken
/// time grid, ValidationError on capacity violations.
TimeSeries load_trace(const std::filesystem::path& path);

}  // namespace prbcast
