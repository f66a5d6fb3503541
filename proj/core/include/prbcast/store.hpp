#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "prbcast/errors.hpp"
#include "prbcast/time_series.hpp"

namespace prbcast {

struct Observation {
  std::int64_t timestamp = 0;  ///< UTC epoch seconds
  double value = 0.0;
};

/// Batch rejection with the first offending index, mapped by the service to
/// a 400 with machine-readable detail.
class IngestError : public ValidationError {
 public:
  enum class Reason { kOutOfRange, kTimeRegression, kGridViolation };

  IngestError(Reason reason, std::size_t index, const std::string& message)
      : ValidationError(message), reason_(reason), index_(index) {}

  Reason reason() const { return reason_; }
  std::size_t index() const { return index_; }

 private:
  Reason reason_;
  std::size_t index_;
};

/// Durable, append-only per-series observation log (one NDJSON file per
/// series) with an in-memory window.
///
/// A batch is validated against the current state, appended to the log and
/// flushed, then committed to memory in one step, so concurrent readers see
/// either the pre- or post-batch window and an acknowledged batch survives a
/// crash. Replay of the log (including one torn trailing line from a crashed
/// write) reconstructs the identical window.
class SeriesStore {
 public:
  SeriesStore(std::filesystem::path data_dir, double capacity);
  ~SeriesStore();

  SeriesStore(const SeriesStore&) = delete;
  SeriesStore& operator=(const SeriesStore&) = delete;

  struct IngestResult {
    std::size_t accepted = 0;
    std::size_t duplicates = 0;
  };

  /// Validates and appends a batch. Exact duplicates of stored observations
  /// (same timestamp and value) are ignored and counted. Throws IngestError
  /// on the first invalid point; the whole batch is then rejected.
  IngestResult ingest(const std::string& series_id, const std::vector<Observation>& batch);

  /// Snapshot of the full stored series (empty optional when the series is
  /// unknown). step_seconds defaults to 900 until two observations fix it.
  std::optional<TimeSeries> window(const std::string& series_id) const;

  std::vector<std::string> series_ids() const;

  double capacity() const { return capacity_; }
  const std::filesystem::path& data_dir() const { return data_dir_; }

 private:
  struct SeriesData;

  std::shared_ptr<SeriesData> get_or_create(const std::string& series_id);
  std::shared_ptr<SeriesData> find(const std::string& series_id) const;
  void replay(const std::string& series_id, SeriesData& data);

  std::filesystem::path data_dir_;
  double capacity_;
  mutable std::mutex registry_mutex_;
  std::map<std::string, std::shared_ptr<SeriesData>> series_;
};

/// Series ids become file names; restrict them accordingly.
bool valid_series_id(const std::string& id);

}  // namespace prbcast
