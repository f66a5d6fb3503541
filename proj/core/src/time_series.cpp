#include "prbcast/time_series.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "prbcast/errors.hpp"

namespace prbcast {

namespace {

// Days-from-civil / civil-from-days (Howard Hinnant's algorithms); avoids
// timegm, which is not portable.
std::int64_t days_from_civil(int y, int m, int d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153u * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, int& m, int& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = static_cast<int>(doy - (153 * mp + 2) / 5 + 1);
  m = static_cast<int>(mp + (mp < 10 ? 3 : -9));
  y = static_cast<int>(yy + (m <= 2));
}

std::string format_double(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

std::string format_iso8601(std::int64_t unix_seconds) {
  std::int64_t days = unix_seconds / 86400;
  std::int64_t rem = unix_seconds % 86400;
  if (rem < 0) {
    rem += 86400;
    days -= 1;
  }
  int y, m, d;
  civil_from_days(days, y, m, d);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", y, m, d,
                static_cast<int>(rem / 3600), static_cast<int>(rem / 60 % 60),
                static_cast<int>(rem % 60));
  return buf;
}

std::int64_t parse_iso8601(const std::string& text) {
  int y, m, d, hh, mm, ss;
  char z = 0;
  if (std::sscanf(text.c_str(), "%4d-%2d-%2dT%2d:%2d:%2d%c", &y, &m, &d, &hh, &mm, &ss, &z) != 7 ||
      z != 'Z') {
    throw ParseError("invalid ISO-8601 UTC timestamp: '" + text + "' (expected YYYY-MM-DDThh:mm:ssZ)");
  }
  if (m < 1 || m > 12 || d < 1 || d > 31 || hh > 23 || mm > 59 || ss > 60) {
    throw ParseError("out-of-range field in timestamp: '" + text + "'");
  }
  return days_from_civil(y, m, d) * 86400 + hh * 3600 + mm * 60 + ss;
}

void TimeSeries::validate() const {
  if (values.empty()) throw ValidationError("series '" + series_id + "': values must be non-empty");
  if (step_seconds <= 0) {
    throw ValidationError("series '" + series_id + "': step must be positive, got " +
                          std::to_string(step_seconds));
  }
  if (!(capacity > 0.0)) {
    throw ValidationError("series '" + series_id + "': capacity must be positive");
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = values[i];
    if (!std::isfinite(v) || v < 0.0 || v > capacity) {
      std::ostringstream os;
      os << "series '" << series_id << "': value " << v << " at index " << i
         << " outside [0, " << capacity << "]";
      throw ValidationError(os.str());
    }
  }
}

TimeSeries TimeSeries::slice(std::size_t first, std::size_t count) const {
  if (first + count > values.size()) {
    throw ContractError("slice [" + std::to_string(first) + ", " + std::to_string(first + count) +
                        ") out of range for series of length " + std::to_string(values.size()));
  }
  TimeSeries out;
  out.series_id = series_id;
  out.start_unix = timestamp_at(first);
  out.step_seconds = step_seconds;
  out.capacity = capacity;
  out.values.assign(values.begin() + static_cast<std::ptrdiff_t>(first),
                    values.begin() + static_cast<std::ptrdiff_t>(first + count));
  return out;
}

TrainTestSplit split_train_test(const TimeSeries& series, const SplitSpec& spec) {
  if (spec.context_length <= 0 || spec.horizon <= 0 || spec.test_windows <= 0) {
    throw ConfigError("split spec fields must be positive (context_length=" +
                      std::to_string(spec.context_length) + ", horizon=" +
                      std::to_string(spec.horizon) + ", test_windows=" +
                      std::to_string(spec.test_windows) + ")");
  }
  const std::size_t len = series.size();
  const std::size_t required = static_cast<std::size_t>(spec.context_length) +
                               static_cast<std::size_t>(spec.horizon) *
                                   static_cast<std::size_t>(spec.test_windows);
  if (len < required) {
    throw SizingError("series too short to split: required " + std::to_string(required) +
                      " samples (context " + std::to_string(spec.context_length) + " + " +
                      std::to_string(spec.test_windows) + " windows x horizon " +
                      std::to_string(spec.horizon) + "), available " + std::to_string(len));
  }
  TrainTestSplit out;
  const std::size_t h = static_cast<std::size_t>(spec.horizon);
  const std::size_t w = static_cast<std::size_t>(spec.test_windows);
  const std::size_t train_len = len - w * h;
  out.train = series.slice(0, train_len);
  out.windows.reserve(w);
  for (std::size_t j = 0; j < w; ++j) {
    const std::size_t actual_start = train_len + j * h;
    TestWindow tw;
    tw.context =
        series.slice(actual_start - static_cast<std::size_t>(spec.context_length),
                     static_cast<std::size_t>(spec.context_length));
    tw.actual = series.slice(actual_start, h);
    out.windows.push_back(std::move(tw));
  }
  return out;
}

double mean_scale(const std::vector<double>& values) {
  if (values.empty()) throw ContractError("mean_scale: context must be non-empty");
  double sum = 0.0;
  for (double v : values) sum += v;
  return 1.0 + sum / static_cast<double>(values.size());
}

double mean_scale(const TimeSeries& context) { return mean_scale(context.values); }

void save_trace(const TimeSeries& series, const std::filesystem::path& path) {
  series.validate();
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
  nlohmann::ordered_json meta;
  meta["series_id"] = series.series_id;
  meta["start"] = format_iso8601(series.start_unix);
  meta["step_seconds"] = series.step_seconds;
  meta["capacity"] = series.capacity;
  out << "# " << meta.dump() << "\n";
  out << "timestamp,value\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    out << format_iso8601(series.timestamp_at(i)) << ',' << format_double(series.values[i]) << "\n";
  }
  if (!out) throw ConfigError("failed writing trace to '" + path.string() + "'");
}

TimeSeries load_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open trace file '" + path.string() + "'");
  std::string line;
  std::size_t lineno = 0;

  auto fail = [&](const std::string& msg) -> ParseError {
    return ParseError(path.string() + ":" + std::to_string(lineno) + ": " + msg);
  };

  if (!std::getline(in, line)) throw ParseError(path.string() + ": empty file");
  lineno = 1;
  if (line.rfind("# ", 0) != 0) throw fail("expected metadata line starting with '# '");
  TimeSeries series;
  try {
    const auto meta = nlohmann::json::parse(line.substr(2));
    series.series_id = meta.at("series_id").get<std::string>();
    series.start_unix = parse_iso8601(meta.at("start").get<std::string>());
    series.step_seconds = meta.at("step_seconds").get<std::int64_t>();
    series.capacity = meta.at("capacity").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw fail(std::string("bad metadata JSON: ") + e.what());
  }

  if (!std::getline(in, line)) throw fail("missing column header");
  lineno = 2;
  if (line != "timestamp,value") throw fail("expected header 'timestamp,value', got '" + line + "'");

  std::int64_t expected_ts = series.start_unix;
  std::int64_t prev_ts = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw fail("expected 'timestamp,value'");
    std::int64_t ts;
    try {
      ts = parse_iso8601(line.substr(0, comma));
    } catch (const ParseError& e) {
      throw fail(e.what());
    }
    if (!first && ts <= prev_ts) {
      throw fail("non-monotone timestamp " + format_iso8601(ts) + " after " + format_iso8601(prev_ts));
    }
    if (ts != expected_ts) {
      throw fail("timestamp " + format_iso8601(ts) + " off the regular grid (expected " +
                 format_iso8601(expected_ts) + ")");
    }
    const std::string vstr = line.substr(comma + 1);
    double value = 0.0;
    const char* begin = vstr.data();
    const char* end = vstr.data() + vstr.size();
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc() || ptr != end) throw fail("bad value '" + vstr + "'");
    if (!std::isfinite(value) || value < 0.0 || value > series.capacity) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": value " + vstr +
                            " outside [0, " + std::to_string(series.capacity) + "]");
    }
    series.values.push_back(value);
    prev_ts = ts;
    expected_ts = ts + series.step_seconds;
    first = false;
  }
  series.validate();
  return series;
}

}  // namespace prbcast
