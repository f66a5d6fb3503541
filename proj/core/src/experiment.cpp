#include "prbcast/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "prbcast/errors.hpp"
#include "prbcast/forecaster.hpp"
#include "prbcast/rng.hpp"
#include "prbcast/version.hpp"
#include "text_util.hpp"
#include "toml_lite.hpp"

namespace prbcast {

namespace {

using detail::format_double;
using nlohmann::json;
using nlohmann::ordered_json;

// -- config (de)serialization -------------------------------------------------

ordered_json trace_to_json(const TraceSource& trace) {
  ordered_json j;
  if (trace.kind == TraceSource::Kind::kFile) {
    j["source"] = "file";
    j["path"] = trace.file.string();
    return j;
  }
  j["source"] = "generate";
  const TraceGenConfig& g = trace.generate;
  j["length"] = g.length;
  j["base_load"] = g.base_load;
  j["daily_amplitude"] = g.daily_amplitude;
  j["weekly_amplitude"] = g.weekly_amplitude;
  j["noise_ar_coeff"] = g.noise_ar_coeff;
  j["noise_sigma"] = g.noise_sigma;
  j["burst_rate"] = g.burst_rate;
  j["burst_height"] = g.burst_height;
  j["seed"] = g.seed;
  j["capacity"] = g.capacity;
  j["step_seconds"] = g.step_seconds;
  j["start"] = format_iso8601(g.start_unix);
  j["series_id"] = g.series_id;
  return j;
}

ordered_json model_to_json(const std::string& name, const ModelConfig& m) {
  ordered_json j;
  j["name"] = name;
  j["kind"] = to_string(m.kind);
  j["context_length"] = m.context_length;
  j["horizon"] = m.horizon;
  j["hidden_size"] = m.hidden_size;
  j["num_layers"] = m.num_layers;
  j["epochs"] = m.epochs;
  j["batch_size"] = m.batch_size;
  j["batches_per_epoch"] = m.batches_per_epoch;
  j["learning_rate"] = m.learning_rate;
  j["num_sample_paths"] = m.num_sample_paths;
  j["season_length"] = m.season_length;
  j["num_heads"] = m.num_heads;
  j["model_dim"] = m.model_dim;
  return j;
}

template <typename T>
void read_field(const json& j, const char* key, T& into) {
  if (j.contains(key)) into = j.at(key).get<T>();
}

TraceSource trace_from_json(const json& j) {
  TraceSource trace;
  std::string source = "generate";
  read_field(j, "source", source);
  if (source == "file") {
    trace.kind = TraceSource::Kind::kFile;
    trace.file = j.at("path").get<std::string>();
    return trace;
  }
  if (source != "generate") {
    throw ConfigError("experiment config: trace.source must be 'generate' or 'file', got '" +
                      source + "'");
  }
  trace.kind = TraceSource::Kind::kGenerate;
  TraceGenConfig& g = trace.generate;
  read_field(j, "length", g.length);
  read_field(j, "base_load", g.base_load);
  read_field(j, "daily_amplitude", g.daily_amplitude);
  read_field(j, "weekly_amplitude", g.weekly_amplitude);
  read_field(j, "noise_ar_coeff", g.noise_ar_coeff);
  read_field(j, "noise_sigma", g.noise_sigma);
  read_field(j, "burst_rate", g.burst_rate);
  read_field(j, "burst_height", g.burst_height);
  read_field(j, "seed", g.seed);
  read_field(j, "capacity", g.capacity);
  read_field(j, "step_seconds", g.step_seconds);
  read_field(j, "series_id", g.series_id);
  if (j.contains("start")) g.start_unix = parse_iso8601(j.at("start").get<std::string>());
  return trace;
}

ModelConfig model_from_json(const json& j, const ExperimentConfig& experiment) {
  ModelConfig m;
  m.kind = model_kind_from_string(j.at("kind").get<std::string>());
  m.horizon = experiment.split.horizon;
  m.context_length = experiment.split.context_length;
  m.season_length = experiment.season_length;
  read_field(j, "context_length", m.context_length);
  read_field(j, "hidden_size", m.hidden_size);
  read_field(j, "num_layers", m.num_layers);
  read_field(j, "epochs", m.epochs);
  read_field(j, "batch_size", m.batch_size);
  read_field(j, "batches_per_epoch", m.batches_per_epoch);
  read_field(j, "learning_rate", m.learning_rate);
  read_field(j, "num_sample_paths", m.num_sample_paths);
  read_field(j, "season_length", m.season_length);
  read_field(j, "num_heads", m.num_heads);
  read_field(j, "model_dim", m.model_dim);
  return m;
}

std::string default_model_name(ModelKind kind) {
  return kind == ModelKind::kSeasonalNaive ? "sn" : to_string(kind);
}

// -- artifact writers ---------------------------------------------------------

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
  out << content;
  if (!out) throw ConfigError("failed writing '" + path.string() + "'");
}

struct ModelRun {
  std::string name;
  ModelConfig config;
  std::uint64_t seed = 0;
  TrainedModel model;
  // Pooled across test windows, in window order. Probabilistic models carry
  // all nine quantile levels; point_or_median aliases the median for them.
  std::vector<double> point_or_median;
  std::vector<std::vector<double>> per_level;
  bool probabilistic = false;
  std::vector<double> histogram_samples;  // window 0, histogram step
  double histogram_point = 0.0;           // point models: value at histogram step
  metrics::EvaluationReport report;
};

}  // namespace

void ExperimentConfig::validate() const {
  if (models.empty()) throw ConfigError("experiment config: at least one model is required");
  if (split.context_length <= 0 || split.horizon <= 0 || split.test_windows <= 0) {
    throw ConfigError("experiment config: split fields must be positive");
  }
  if (season_length <= 0) throw ConfigError("experiment config: season_length must be positive");
  if (histogram_step >= split.horizon) {
    throw ConfigError("experiment config: histogram_step " + std::to_string(histogram_step) +
                      " outside horizon " + std::to_string(split.horizon));
  }
  std::set<std::string> names;
  for (const auto& [name, model] : models) {
    if (name.empty()) throw ConfigError("experiment config: model name must not be empty");
    if (!names.insert(name).second) {
      throw ConfigError("experiment config: duplicate model name '" + name + "'");
    }
    if (model.horizon != split.horizon) {
      throw ConfigError("experiment config: model '" + name + "' horizon " +
                        std::to_string(model.horizon) + " differs from split horizon " +
                        std::to_string(split.horizon));
    }
    if (model.kind != ModelKind::kSeasonalNaive && model.context_length > split.context_length) {
      throw ConfigError("experiment config: model '" + name + "' context_length " +
                        std::to_string(model.context_length) + " exceeds split context_length " +
                        std::to_string(split.context_length));
    }
    model.validate();
  }
  if (trace.kind == TraceSource::Kind::kGenerate) trace.generate.validate();
}

ExperimentConfig default_experiment_config() {
  ExperimentConfig config;
  config.trace.kind = TraceSource::Kind::kGenerate;
  TraceGenConfig& g = config.trace.generate;
  g.length = 4000;
  g.base_load = 120.0;
  g.daily_amplitude = 60.0;
  g.weekly_amplitude = 15.0;
  g.noise_ar_coeff = 0.8;
  g.noise_sigma = 6.0;
  g.burst_rate = 0.0;
  g.burst_height = 0.0;
  g.seed = 1;
  g.capacity = 273.0;
  g.step_seconds = 900;

  config.split = {.context_length = 96, .horizon = 24, .test_windows = 2};
  config.season_length = 96;
  config.master_seed = 42;

  auto base = [&](ModelKind kind) {
    ModelConfig m;
    m.kind = kind;
    m.context_length = 96;
    m.horizon = config.split.horizon;
    m.season_length = config.season_length;
    return m;
  };

  ModelConfig sn = base(ModelKind::kSeasonalNaive);

  ModelConfig lstm = base(ModelKind::kLstm);
  lstm.hidden_size = 32;
  lstm.num_layers = 1;
  lstm.epochs = 60;
  lstm.batch_size = 16;
  lstm.batches_per_epoch = 8;

  ModelConfig sff = base(ModelKind::kSff);
  sff.hidden_size = 40;
  sff.num_layers = 2;
  sff.epochs = 100;
  sff.batch_size = 32;
  sff.batches_per_epoch = 8;

  ModelConfig deepar = base(ModelKind::kDeepar);
  deepar.hidden_size = 32;
  deepar.num_layers = 2;
  deepar.epochs = 40;
  deepar.batch_size = 16;
  deepar.batches_per_epoch = 8;

  ModelConfig transformer = base(ModelKind::kTransformer);
  transformer.hidden_size = 64;  // feed-forward width
  transformer.model_dim = 32;
  transformer.num_heads = 4;
  transformer.epochs = 40;
  transformer.batch_size = 8;
  transformer.batches_per_epoch = 8;

  config.models = {
      {"lstm", lstm}, {"sn", sn}, {"sff", sff}, {"deepar", deepar}, {"transformer", transformer}};
  return config;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open experiment config '" + path.string() + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  json j;
  if (path.extension() == ".toml") {
    j = detail::parse_toml_lite(text);
  } else {
    try {
      j = json::parse(text);
    } catch (const json::exception& e) {
      throw ParseError("experiment config '" + path.string() + "': " + e.what());
    }
  }

  ExperimentConfig config;
  try {
    read_field(j, "master_seed", config.master_seed);
    read_field(j, "season_length", config.season_length);
    read_field(j, "histogram_step", config.histogram_step);
    if (j.contains("output_dir")) config.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("trace")) config.trace = trace_from_json(j.at("trace"));
    if (j.contains("split")) {
      const json& s = j.at("split");
      read_field(s, "context_length", config.split.context_length);
      read_field(s, "horizon", config.split.horizon);
      read_field(s, "test_windows", config.split.test_windows);
    }
    if (!j.contains("models")) {
      throw ConfigError("experiment config: missing 'models' list");
    }
    for (const json& mj : j.at("models")) {
      ModelConfig m = model_from_json(mj, config);
      std::string name = default_model_name(m.kind);
      read_field(mj, "name", name);
      config.models.emplace_back(std::move(name), m);
    }
  } catch (const json::exception& e) {
    throw ConfigError("experiment config '" + path.string() + "': " + e.what());
  }
  config.validate();
  return config;
}

std::string experiment_config_to_json(const ExperimentConfig& config) {
  ordered_json j;
  j["master_seed"] = config.master_seed;
  j["season_length"] = config.season_length;
  j["histogram_step"] = config.histogram_step;
  j["trace"] = trace_to_json(config.trace);
  j["split"] = {{"context_length", config.split.context_length},
                {"horizon", config.split.horizon},
                {"test_windows", config.split.test_windows}};
  j["models"] = ordered_json::array();
  for (const auto& [name, model] : config.models) j["models"].push_back(model_to_json(name, model));
  return j.dump(2);
}

std::string config_hash_hex(const ExperimentConfig& config) {
  const std::uint64_t h = fnv1a64(experiment_config_to_json(config));
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

HistogramData compute_histogram(
    const std::vector<std::pair<std::string, std::vector<double>>>& samples_per_model,
    const std::vector<std::pair<std::string, double>>& markers, int bins) {
  if (bins <= 0) throw ConfigError("histogram: bin count must be positive");
  if (samples_per_model.empty()) throw ContractError("histogram: no sample sets");
  double lo = samples_per_model.front().second.at(0);
  double hi = lo;
  for (const auto& [name, samples] : samples_per_model) {
    if (samples.empty()) throw ContractError("histogram: model '" + name + "' has no samples");
    for (double v : samples) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (hi == lo) {
    // Degenerate pooled range: center one occupied bin.
    lo -= 0.5;
    hi += 0.5;
  }

  HistogramData data;
  data.bin_width = (hi - lo) / static_cast<double>(bins);
  data.bin_left.resize(static_cast<std::size_t>(bins));
  for (int b = 0; b < bins; ++b) {
    data.bin_left[static_cast<std::size_t>(b)] = lo + data.bin_width * static_cast<double>(b);
  }
  for (const auto& [name, samples] : samples_per_model) {
    std::vector<int> counts(static_cast<std::size_t>(bins), 0);
    for (double v : samples) {
      int idx = static_cast<int>((v - lo) / data.bin_width);
      idx = std::clamp(idx, 0, bins - 1);  // the maximum lands in the last bin
      ++counts[static_cast<std::size_t>(idx)];
    }
    data.counts.emplace_back(name, std::move(counts));
  }
  data.markers = markers;
  return data;
}

void write_histogram_csv(const HistogramData& data, const std::filesystem::path& path) {
  std::string out = "bin_left";
  for (const auto& [name, counts] : data.counts) out += "," + name;
  for (const auto& [name, value] : data.markers) out += ",marker_" + name;
  out += "\n";
  for (std::size_t b = 0; b < data.bin_left.size(); ++b) {
    out += format_double(data.bin_left[b]);
    for (const auto& [name, counts] : data.counts) out += "," + std::to_string(counts[b]);
    for (const auto& [name, value] : data.markers) out += "," + format_double(value);
    out += "\n";
  }
  write_text_file(path, out);
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();

  const TimeSeries series = config.trace.kind == TraceSource::Kind::kGenerate
                                ? generate_prb_trace(config.trace.generate)
                                : load_trace(config.trace.file);
  const TrainTestSplit split = split_train_test(series, config.split);
  const int histogram_step =
      config.histogram_step >= 0 ? config.histogram_step : config.split.horizon / 2;

  std::filesystem::create_directories(config.output_dir);

  // Pooled actuals across windows.
  std::vector<double> actual;
  for (const TestWindow& w : split.windows) {
    actual.insert(actual.end(), w.actual.values.begin(), w.actual.values.end());
  }

  std::vector<ModelRun> runs;
  runs.reserve(config.models.size());
  for (const auto& [name, model_config] : config.models) {
    ModelRun run;
    run.name = name;
    run.config = model_config;
    run.config.seed = derive_seed(config.master_seed, name);
    run.seed = run.config.seed;
    run.probabilistic = is_probabilistic(model_config.kind);
    try {
      run.model = train_model(split.train, run.config);
      if (run.probabilistic) run.per_level.resize(metrics::kQuantileLevels.size());
      for (std::size_t w = 0; w < split.windows.size(); ++w) {
        const TestWindow& window = split.windows[w];
        const std::uint64_t forecast_seed = derive_seed(run.seed, "window" + std::to_string(w));
        const Forecast forecast =
            make_forecast(run.model, window.context, config.split.horizon,
                          run.config.num_sample_paths, forecast_seed);
        if (const auto* point = std::get_if<PointForecast>(&forecast)) {
          run.point_or_median.insert(run.point_or_median.end(), point->values.begin(),
                                     point->values.end());
          if (w == 0) run.histogram_point = point->values[static_cast<std::size_t>(histogram_step)];
        } else {
          const auto& dist = std::get<ForecastDistribution>(forecast);
          for (std::size_t i = 0; i < metrics::kQuantileLevels.size(); ++i) {
            const auto q = dist.quantile(metrics::kQuantileLevels[i]);
            run.per_level[i].insert(run.per_level[i].end(), q.begin(), q.end());
          }
          if (w == 0) {
            const auto materialized = dist.materialized(
                static_cast<std::size_t>(run.config.num_sample_paths),
                derive_seed(run.seed, "histogram"));
            run.histogram_samples = materialized.samples_at(static_cast<std::size_t>(histogram_step));
          }
        }
      }

      // Scoring happens on the same pooled arrays the CSV artifacts carry.
      if (run.probabilistic) {
        run.point_or_median = run.per_level[4];  // the median
        run.report.model = name;
        run.report.n = actual.size();
        run.report.mse = metrics::mse(actual, run.point_or_median);
        run.report.mae_eq2 = metrics::mae_eq2(actual, run.point_or_median);
        run.report.mase_scaled = metrics::mase_scaled(actual, run.point_or_median,
                                                      split.train.values, config.season_length);
        run.report.mape = metrics::mape(actual, run.point_or_median);
        run.report.nd = metrics::nd(actual, run.point_or_median);
        std::array<double, 9> ql{};
        std::array<double, 9> cov{};
        for (std::size_t i = 0; i < metrics::kQuantileLevels.size(); ++i) {
          ql[i] = metrics::quantile_loss(actual, run.per_level[i], metrics::kQuantileLevels[i]);
          cov[i] = metrics::coverage(actual, run.per_level[i]);
        }
        run.report.quantile_loss = ql;
        run.report.coverage = cov;
      } else {
        PointForecast pooled;
        pooled.values = run.point_or_median;
        run.report = metrics::evaluate_point(
            name, pooled, actual, split.train.values, config.season_length,
            run.config.kind == ModelKind::kSeasonalNaive ? metrics::PointEvalMode::kConstantQuantiles
                                                         : metrics::PointEvalMode::kPointOnly);
      }
    } catch (const Error& e) {
      throw Error("model '" + name + "' failed: " + e.what());
    }
    runs.push_back(std::move(run));
  }

  ExperimentResult result;
  for (const ModelRun& run : runs) result.table.reports.push_back(run.report);

  auto artifact = [&](const std::string& name) {
    result.artifacts.push_back(config.output_dir / name);
    return config.output_dir / name;
  };

  write_text_file(artifact("table.txt"), result.table.to_text());
  write_text_file(artifact("table.json"), result.table.to_json());

  // Baseline columns repeated in every probabilistic model's CSV make each
  // file self-contained for plotting.
  std::vector<const ModelRun*> baselines;
  for (const ModelRun& run : runs) {
    if (!run.probabilistic) baselines.push_back(&run);
  }

  const std::size_t horizon = static_cast<std::size_t>(config.split.horizon);
  for (const ModelRun& run : runs) {
    std::string csv = "window,step,timestamp,actual";
    if (run.probabilistic) {
      for (const ModelRun* b : baselines) csv += "," + b->name;
      csv += ",median,q0.1,q0.9";
    } else {
      csv += ",point";
    }
    csv += "\n";
    for (std::size_t w = 0; w < split.windows.size(); ++w) {
      for (std::size_t t = 0; t < horizon; ++t) {
        const std::size_t i = w * horizon + t;
        csv += std::to_string(w) + "," + std::to_string(t) + "," +
               format_iso8601(split.windows[w].actual.timestamp_at(t)) + "," +
               format_double(actual[i]);
        if (run.probabilistic) {
          for (const ModelRun* b : baselines) csv += "," + format_double(b->point_or_median[i]);
          csv += "," + format_double(run.point_or_median[i]) + "," +
                 format_double(run.per_level[0][i]) + "," + format_double(run.per_level[8][i]);
        } else {
          csv += "," + format_double(run.point_or_median[i]);
        }
        csv += "\n";
      }
    }
    write_text_file(artifact("forecast_" + run.name + ".csv"), csv);
    write_text_file(artifact("report_" + run.name + ".json"), run.report.to_json() + "\n");
  }

  // Histogram: pooled sample values at one step of the first window.
  std::vector<std::pair<std::string, std::vector<double>>> histogram_samples;
  std::vector<std::pair<std::string, double>> markers;
  markers.emplace_back("true",
                       split.windows[0].actual.values[static_cast<std::size_t>(histogram_step)]);
  for (const ModelRun& run : runs) {
    if (run.probabilistic) {
      histogram_samples.emplace_back(run.name, run.histogram_samples);
    } else {
      markers.emplace_back(run.name, run.histogram_point);
    }
  }
  if (!histogram_samples.empty()) {
    write_histogram_csv(compute_histogram(histogram_samples, markers), artifact("histogram.csv"));
  }

  ordered_json manifest;
  manifest["version"] = kVersionString;
  manifest["config_hash"] = config_hash_hex(config);
  manifest["master_seed"] = config.master_seed;
  manifest["histogram_step"] = histogram_step;
  manifest["models"] = ordered_json::array();
  for (const ModelRun& run : runs) {
    manifest["models"].push_back({{"name", run.name},
                                  {"kind", to_string(run.config.kind)},
                                  {"seed", run.seed},
                                  {"final_loss", run.model.final_loss}});
  }
  manifest["artifacts"] = ordered_json::array();
  for (const auto& a : result.artifacts) manifest["artifacts"].push_back(a.filename().string());
  manifest["artifacts"].push_back("manifest.json");
  manifest["config"] = json::parse(experiment_config_to_json(config));
  write_text_file(config.output_dir / "manifest.json", manifest.dump(2) + "\n");
  result.artifacts.push_back(config.output_dir / "manifest.json");

  return result;
}

}  // namespace prbcast
