#include "prbcast/store.hpp"

#include <cmath>
#include <fstream>
#include <mutex>
#include <shared_mutex>

#include <nlohmann/json.hpp>

#include "text_util.hpp"

namespace prbcast {

namespace {
constexpr std::int64_t kDefaultStep = 900;
}

bool valid_series_id(const std::string& id) {
  if (id.empty() || id.size() > 128) return false;
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '-' || c == '_' || c == '.';
    if (!ok) return false;
  }
  return id != "." && id != "..";
}

struct SeriesStore::SeriesData {
  std::mutex ingest_mutex;          // serializes writers
  mutable std::shared_mutex state_mutex;  // guards the fields below
  std::int64_t start = 0;
  std::int64_t step = 0;  // 0 until two observations fix the grid
  std::vector<double> values;
};

SeriesStore::SeriesStore(std::filesystem::path data_dir, double capacity)
    : data_dir_(std::move(data_dir)), capacity_(capacity) {
  if (!(capacity_ > 0.0)) throw ConfigError("store: capacity must be positive");
  std::filesystem::create_directories(data_dir_ / "series");
  for (const auto& entry : std::filesystem::directory_iterator(data_dir_ / "series")) {
    if (entry.path().extension() != ".ndjson") continue;
    const std::string id = entry.path().stem().string();
    if (!valid_series_id(id)) continue;
    auto data = std::make_shared<SeriesData>();
    replay(id, *data);
    std::lock_guard lock(registry_mutex_);
    series_[id] = std::move(data);
  }
}

SeriesStore::~SeriesStore() = default;

std::shared_ptr<SeriesStore::SeriesData> SeriesStore::get_or_create(const std::string& series_id) {
  std::lock_guard lock(registry_mutex_);
  auto& slot = series_[series_id];
  if (!slot) slot = std::make_shared<SeriesData>();
  return slot;
}

std::shared_ptr<SeriesStore::SeriesData> SeriesStore::find(const std::string& series_id) const {
  std::lock_guard lock(registry_mutex_);
  const auto it = series_.find(series_id);
  return it == series_.end() ? nullptr : it->second;
}

void SeriesStore::replay(const std::string& series_id, SeriesData& data) {
  const auto path = data_dir_ / "series" / (series_id + ".ndjson");
  std::ifstream in(path);
  if (!in) return;
  std::string line;
  std::string last_incomplete;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      const std::int64_t ts = j.at("timestamp").get<std::int64_t>();
      const double value = j.at("value").get<double>();
      if (data.values.empty()) {
        data.start = ts;
      } else if (data.step == 0) {
        data.step = ts - data.start;
      }
      data.values.push_back(value);
    } catch (const nlohmann::json::exception&) {
      // A torn trailing line is the footprint of a crash mid-append (the
      // batch was never acknowledged); anything torn earlier is corruption.
      if (in.peek() != EOF) {
        throw ValidationError("store: corrupt log for series '" + series_id + "': " + line);
      }
      return;
    }
  }
}

SeriesStore::IngestResult SeriesStore::ingest(const std::string& series_id,
                                              const std::vector<Observation>& batch) {
  if (!valid_series_id(series_id)) {
    throw ValidationError("store: invalid series id '" + series_id + "'");
  }
  auto data = get_or_create(series_id);
  std::lock_guard ingest_lock(data->ingest_mutex);

  // Working copy of the tail state; the in-memory window is swapped only
  // after the log write succeeds.
  std::int64_t start, step;
  std::size_t count;
  {
    std::shared_lock state_lock(data->state_mutex);
    start = data->start;
    step = data->step;
    count = data->values.size();
  }

  IngestResult result;
  std::vector<Observation> fresh;
  fresh.reserve(batch.size());
  auto last_ts = [&]() { return start + static_cast<std::int64_t>(count - 1) * step; };

  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Observation& obs = batch[i];
    if (!std::isfinite(obs.value) || obs.value < 0.0 || obs.value > capacity_) {
      throw IngestError(IngestError::Reason::kOutOfRange, i,
                        "value " + std::to_string(obs.value) + " at index " + std::to_string(i) +
                            " outside [0, " + std::to_string(capacity_) + "]");
    }
    if (count == 0) {
      start = obs.timestamp;
      ++count;
      fresh.push_back(obs);
      result.accepted++;
      continue;
    }
    if (obs.timestamp <= last_ts()) {
      // Idempotent replays: an exact (timestamp, value) duplicate of a
      // stored observation is ignored.
      const std::int64_t offset = obs.timestamp - start;
      bool duplicate = false;
      if (step > 0 && offset >= 0 && offset % step == 0) {
        const auto idx = static_cast<std::size_t>(offset / step);
        double stored;
        {
          std::shared_lock state_lock(data->state_mutex);
          stored = idx < data->values.size() ? data->values[idx]
                                             : fresh[idx - data->values.size()].value;
        }
        duplicate = stored == obs.value;
      } else if (step == 0 && obs.timestamp == start) {
        std::shared_lock state_lock(data->state_mutex);
        const double stored = data->values.empty() ? fresh[0].value : data->values[0];
        duplicate = stored == obs.value;
      }
      if (duplicate) {
        result.duplicates++;
        continue;
      }
      throw IngestError(IngestError::Reason::kTimeRegression, i,
                        "timestamp " + format_iso8601(obs.timestamp) + " at index " +
                            std::to_string(i) + " does not advance past " +
                            format_iso8601(last_ts()));
    }
    if (step == 0) {
      step = obs.timestamp - last_ts();
    } else if (obs.timestamp != last_ts() + step) {
      throw IngestError(IngestError::Reason::kGridViolation, i,
                        "timestamp " + format_iso8601(obs.timestamp) + " at index " +
                            std::to_string(i) + " off the " + std::to_string(step) +
                            "s grid (expected " + format_iso8601(last_ts() + step) + ")");
    }
    ++count;
    fresh.push_back(obs);
    result.accepted++;
  }

  if (!fresh.empty()) {
    const auto path = data_dir_ / "series" / (series_id + ".ndjson");
    std::ofstream out(path, std::ios::app | std::ios::binary);
    if (!out) throw ConfigError("store: cannot open log '" + path.string() + "' for append");
    for (const Observation& obs : fresh) {
      out << "{\"timestamp\":" << obs.timestamp << ",\"value\":" << detail::format_double(obs.value)
          << "}\n";
    }
    out.flush();
    if (!out) throw ConfigError("store: failed appending to '" + path.string() + "'");

    std::unique_lock state_lock(data->state_mutex);
    if (data->values.empty()) data->start = fresh.front().timestamp;
    if (data->step == 0 && (data->values.size() + fresh.size()) >= 2) data->step = step;
    for (const Observation& obs : fresh) data->values.push_back(obs.value);
  }
  return result;
}

std::optional<TimeSeries> SeriesStore::window(const std::string& series_id) const {
  const auto data = find(series_id);
  if (!data) return std::nullopt;
  TimeSeries series;
  series.series_id = series_id;
  series.capacity = capacity_;
  {
    std::shared_lock state_lock(data->state_mutex);
    if (data->values.empty()) return std::nullopt;
    series.start_unix = data->start;
    series.step_seconds = data->step > 0 ? data->step : kDefaultStep;
    series.values = data->values;
  }
  return series;
}

std::vector<std::string> SeriesStore::series_ids() const {
  std::lock_guard lock(registry_mutex_);
  std::vector<std::string> ids;
  ids.reserve(series_.size());
  for (const auto& [id, data] : series_) ids.push_back(id);
  return ids;
}

}  // namespace prbcast
