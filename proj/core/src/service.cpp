#include "prbcast/service.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "prbcast/checkpoint.hpp"
#include "prbcast/errors.hpp"
#include "prbcast/forecaster.hpp"
#include "prbcast/metrics.hpp"
#include "prbcast/rng.hpp"
#include "prbcast/store.hpp"
#include "prbcast/version.hpp"
#include "model_config_json.hpp"
#include "text_util.hpp"
#include "toml_lite.hpp"

namespace prbcast {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr std::size_t kMaxBatch = 10'000;
constexpr const char* kHashHeader = "X-Model-Version";

void send_json(httplib::Response& res, int status, const std::string& body) {
  res.status = status;
  res.set_content(body, "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code,
                const std::string& message, ordered_json detail = ordered_json::object()) {
  ordered_json j;
  j["code"] = code;
  j["message"] = message;
  j["detail"] = std::move(detail);
  send_json(res, status, j.dump());
}

std::string hash_model(const std::string& series_id, const TrainedModel& model) {
  std::uint64_t h = fnv1a64(series_id);
  std::string desc = to_string(model.config.kind);
  desc += '/' + std::to_string(model.config.context_length);
  desc += '/' + std::to_string(model.config.horizon);
  desc += '/' + std::to_string(model.config.hidden_size);
  desc += '/' + std::to_string(model.config.num_layers);
  desc += '/' + std::to_string(model.config.seed);
  desc += '/' + detail::format_double(model.final_loss);
  h ^= fnv1a64(desc);
  for (const ad::Param& p : model.params) {
    h ^= fnv1a64(p.name);
    const auto* bytes = reinterpret_cast<const char*>(p.value.data());
    h ^= fnv1a64(std::string_view(bytes, p.value.numel() * sizeof(double)));
    h = h * 0x100000001b3ULL + 0x9e3779b97f4a7c15ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct RegisteredModel {
  TrainedModel model;
  std::string hash;
  std::string report_json;  // empty when no holdout backtest ran
};

/// Marks a series as training for the lifetime of the guard.
class TrainingGuard {
 public:
  TrainingGuard(std::mutex& mutex, std::set<std::string>& active, std::string id)
      : mutex_(mutex), active_(active), id_(std::move(id)) {
    std::lock_guard lock(mutex_);
    acquired_ = active_.insert(id_).second;
  }
  ~TrainingGuard() {
    if (acquired_) {
      std::lock_guard lock(mutex_);
      active_.erase(id_);
    }
  }
  bool acquired() const { return acquired_; }

 private:
  std::mutex& mutex_;
  std::set<std::string>& active_;
  std::string id_;
  bool acquired_ = false;
};

}  // namespace

ServiceConfig resolve_service_config(const std::optional<std::filesystem::path>& config_file,
                                     const ServiceOverrides& overrides) {
  ServiceConfig config;

  if (config_file) {
    std::ifstream in(*config_file);
    if (!in) throw ConfigError("cannot open service config '" + config_file->string() + "'");
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    json j;
    if (config_file->extension() == ".toml") {
      j = detail::parse_toml_lite(text);
    } else {
      try {
        j = json::parse(text);
      } catch (const json::exception& e) {
        throw ParseError("service config '" + config_file->string() + "': " + e.what());
      }
    }
    detail::read_json_field(j, "host", config.host);
    detail::read_json_field(j, "port", config.port);
    detail::read_json_field(j, "capacity", config.capacity);
    if (j.contains("data_dir")) config.data_dir = j.at("data_dir").get<std::string>();
  }

  if (const char* v = std::getenv("PRBCAST_HOST")) config.host = v;
  if (const char* v = std::getenv("PRBCAST_PORT")) config.port = std::atoi(v);
  if (const char* v = std::getenv("PRBCAST_DATA_DIR")) config.data_dir = v;
  if (const char* v = std::getenv("PRBCAST_CAPACITY")) config.capacity = std::atof(v);

  if (overrides.host) config.host = *overrides.host;
  if (overrides.port) config.port = *overrides.port;
  if (overrides.data_dir) config.data_dir = *overrides.data_dir;
  if (overrides.capacity) config.capacity = *overrides.capacity;

  if (config.port < 0 || config.port > 65535) {
    throw ConfigError("service config: port " + std::to_string(config.port) + " out of range");
  }
  if (!(config.capacity > 0.0)) throw ConfigError("service config: capacity must be positive");
  return config;
}

struct RappService::Impl {
  ServiceConfig config;
  SeriesStore store;
  httplib::Server server;
  std::thread thread;
  int bound_port = 0;

  std::mutex registry_mutex;
  std::map<std::string, std::shared_ptr<const RegisteredModel>> registry;
  std::mutex training_mutex;
  std::set<std::string> training;

  explicit Impl(ServiceConfig cfg) : config(std::move(cfg)), store(config.data_dir, config.capacity) {
    std::filesystem::create_directories(config.data_dir / "models");
    load_persisted_models();
    setup_routes();
  }

  std::filesystem::path model_path(const std::string& id, const char* suffix) const {
    return config.data_dir / "models" / (id + suffix);
  }

  void load_persisted_models() {
    for (const auto& entry : std::filesystem::directory_iterator(config.data_dir / "models")) {
      if (entry.path().extension() != ".ckpt") continue;
      const std::string id = entry.path().stem().string();
      if (!valid_series_id(id)) continue;
      auto registered = std::make_shared<RegisteredModel>();
      registered->model = load_checkpoint(entry.path());
      registered->hash = hash_model(id, registered->model);
      const auto report_path = model_path(id, ".report.json");
      if (std::filesystem::exists(report_path)) {
        std::ifstream in(report_path);
        registered->report_json.assign((std::istreambuf_iterator<char>(in)),
                                       std::istreambuf_iterator<char>());
      }
      std::lock_guard lock(registry_mutex);
      registry[id] = std::move(registered);
    }
  }

  std::shared_ptr<const RegisteredModel> find_model(const std::string& id) {
    std::lock_guard lock(registry_mutex);
    const auto it = registry.find(id);
    return it == registry.end() ? nullptr : it->second;
  }

  // -- handlers ---------------------------------------------------------------

  void handle_observations(const std::string& id, const httplib::Request& req,
                           httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception& e) {
      return send_error(res, 400, "bad_request", std::string("malformed JSON body: ") + e.what());
    }
    if (!body.is_array()) {
      return send_error(res, 400, "bad_request", "body must be a JSON array of observations");
    }
    if (body.size() > kMaxBatch) {
      return send_error(res, 413, "payload_too_large",
                        "batch of " + std::to_string(body.size()) + " exceeds limit " +
                            std::to_string(kMaxBatch));
    }
    std::vector<Observation> batch;
    batch.reserve(body.size());
    for (std::size_t i = 0; i < body.size(); ++i) {
      const json& item = body[i];
      if (!item.is_object() || !item.contains("timestamp") || !item.contains("value") ||
          !item.at("value").is_number()) {
        return send_error(res, 400, "bad_request",
                          "observation " + std::to_string(i) + " must be {timestamp, value}",
                          {{"index", i}});
      }
      Observation obs;
      try {
        obs.timestamp = parse_iso8601(item.at("timestamp").get<std::string>());
      } catch (const Error& e) {
        return send_error(res, 400, "bad_request", e.what(), {{"index", i}});
      }
      obs.value = item.at("value").get<double>();
      batch.push_back(obs);
    }

    try {
      const auto result = store.ingest(id, batch);
      ordered_json j;
      j["accepted"] = result.accepted;
      j["duplicates"] = result.duplicates;
      send_json(res, 202, j.dump());
    } catch (const IngestError& e) {
      const char* code = e.reason() == IngestError::Reason::kOutOfRange ? "out_of_range"
                         : e.reason() == IngestError::Reason::kTimeRegression
                             ? "time_regression"
                             : "grid_violation";
      send_error(res, 400, code, e.what(), {{"index", e.index()}});
    }
  }

  void handle_train(const std::string& id, const httplib::Request& req, httplib::Response& res) {
    TrainingGuard guard(training_mutex, training, id);
    if (!guard.acquired()) {
      return send_error(res, 409, "training_in_progress",
                        "a training run for series '" + id + "' is already in flight");
    }

    json body;
    ModelConfig config_in;
    bool holdout = false;
    try {
      body = json::parse(req.body.empty() ? "{}" : req.body);
      config_in = detail::model_config_from_json(body, ModelConfig{});
      detail::read_json_field(body, "holdout", holdout);
      config_in.validate();
    } catch (const json::exception& e) {
      return send_error(res, 400, "bad_request", std::string("bad model config: ") + e.what());
    } catch (const ConfigError& e) {
      return send_error(res, 400, "bad_request", e.what());
    }

    const auto window = store.window(id);
    const std::size_t available = window ? window->size() : 0;
    const std::size_t required =
        config_in.kind == ModelKind::kSeasonalNaive
            ? static_cast<std::size_t>(config_in.season_length) +
                  (holdout ? static_cast<std::size_t>(config_in.horizon) : 0)
            : static_cast<std::size_t>(config_in.context_length) +
                  static_cast<std::size_t>(config_in.horizon) * (holdout ? 2 : 1);
    if (available < required) {
      return send_error(res, 422, "insufficient_data",
                        "series '" + id + "' has too little data for this config",
                        {{"required", required}, {"available", available}});
    }

    const auto t0 = std::chrono::steady_clock::now();
    auto registered = std::make_shared<RegisteredModel>();
    try {
      if (holdout) {
        SplitSpec spec{.context_length = config_in.kind == ModelKind::kSeasonalNaive
                           ? config_in.season_length
                           : config_in.context_length,
                       .horizon = config_in.horizon,
                       .test_windows = 1};
        const TrainTestSplit split = split_train_test(*window, spec);
        registered->model = train_model(split.train, config_in);
        const TestWindow& tw = split.windows[0];
        const Forecast forecast =
            make_forecast(registered->model, tw.context, config_in.horizon,
                          config_in.num_sample_paths, derive_seed(config_in.seed, "holdout"));
        metrics::EvaluationReport report;
        std::string csv = "step,timestamp,actual,";
        std::string rows;
        if (const auto* point = std::get_if<PointForecast>(&forecast)) {
          report = metrics::evaluate_point(
              to_string(config_in.kind), *point, tw.actual.values, split.train.values,
              config_in.season_length,
              config_in.kind == ModelKind::kSeasonalNaive
                  ? metrics::PointEvalMode::kConstantQuantiles
                  : metrics::PointEvalMode::kPointOnly);
          csv += "point\n";
          for (std::size_t t = 0; t < point->values.size(); ++t) {
            rows += std::to_string(t) + "," + format_iso8601(tw.actual.timestamp_at(t)) + "," +
                    detail::format_double(tw.actual.values[t]) + "," +
                    detail::format_double(point->values[t]) + "\n";
          }
        } else {
          const auto& dist = std::get<ForecastDistribution>(forecast);
          report = metrics::evaluate_distribution(to_string(config_in.kind), dist,
                                                  tw.actual.values, split.train.values,
                                                  config_in.season_length);
          const auto median = dist.median();
          const auto q10 = dist.quantile(0.1);
          const auto q90 = dist.quantile(0.9);
          csv += "median,q0.1,q0.9\n";
          for (std::size_t t = 0; t < median.size(); ++t) {
            rows += std::to_string(t) + "," + format_iso8601(tw.actual.timestamp_at(t)) + "," +
                    detail::format_double(tw.actual.values[t]) + "," +
                    detail::format_double(median[t]) + "," + detail::format_double(q10[t]) + "," +
                    detail::format_double(q90[t]) + "\n";
          }
        }
        registered->report_json = report.to_json() + "\n";
        std::ofstream csv_out(model_path(id, ".forecast.csv"), std::ios::binary);
        csv_out << csv << rows;
        std::ofstream report_out(model_path(id, ".report.json"), std::ios::binary);
        report_out << registered->report_json;
      } else {
        registered->model = train_model(*window, config_in);
      }
    } catch (const ConfigError& e) {
      return send_error(res, 422, "insufficient_data", e.what());
    } catch (const Error& e) {
      return send_error(res, 500, "training_failed", e.what());
    }
    const auto t1 = std::chrono::steady_clock::now();

    registered->hash = hash_model(id, registered->model);
    save_checkpoint(registered->model, model_path(id, ".ckpt"));
    {
      std::lock_guard lock(registry_mutex);
      registry[id] = registered;  // atomic swap: readers keep their snapshot
    }

    ordered_json j;
    j["model"] = to_string(registered->model.config.kind);
    j["final_loss"] = registered->model.final_loss;
    j["duration_seconds"] =
        std::chrono::duration_cast<std::chrono::duration<double>>(t1 - t0).count();
    j["model_hash"] = registered->hash;
    if (!registered->report_json.empty()) j["report"] = json::parse(registered->report_json);
    res.set_header(kHashHeader, registered->hash);
    send_json(res, 200, j.dump());
  }

  void handle_forecast(const std::string& id, const httplib::Request& req,
                       httplib::Response& res) {
    const auto registered = find_model(id);
    if (!registered) {
      return send_error(res, 404, "not_found", "no trained model for series '" + id + "'");
    }

    int horizon = registered->model.config.horizon;
    if (req.has_param("horizon")) {
      try {
        horizon = std::stoi(req.get_param_value("horizon"));
      } catch (...) {
        return send_error(res, 400, "bad_request", "bad horizon parameter");
      }
    }
    if (horizon <= 0 || horizon > registered->model.config.horizon) {
      return send_error(res, 422, "horizon_exceeds_trained",
                        "horizon " + std::to_string(horizon) + " outside (0, " +
                            std::to_string(registered->model.config.horizon) + "]");
    }

    std::vector<std::pair<std::string, double>> levels = {{"0.1", 0.1}, {"0.5", 0.5}, {"0.9", 0.9}};
    if (req.has_param("levels")) {
      levels.clear();
      const std::string raw = req.get_param_value("levels");
      std::size_t pos = 0;
      while (pos <= raw.size()) {
        const auto comma = raw.find(',', pos);
        const std::string item = raw.substr(pos, comma == std::string::npos ? comma : comma - pos);
        try {
          const double level = std::stod(item);
          if (!(level > 0.0) || !(level < 1.0)) throw DomainError("");
          levels.emplace_back(item, level);
        } catch (...) {
          return send_error(res, 400, "bad_levels",
                            "levels must be comma-separated numbers in (0, 1), got '" + raw + "'");
        }
        if (comma == std::string::npos) break;
        pos = comma + 1;
      }
      if (levels.empty()) return send_error(res, 400, "bad_levels", "no levels given");
    }

    std::uint64_t seed = 0;
    if (req.has_param("seed")) {
      try {
        seed = std::stoull(req.get_param_value("seed"));
      } catch (...) {
        return send_error(res, 400, "bad_request", "bad seed parameter");
      }
    }

    const auto window = store.window(id);
    const std::size_t needed =
        registered->model.config.kind == ModelKind::kSeasonalNaive
            ? static_cast<std::size_t>(registered->model.config.season_length)
            : static_cast<std::size_t>(registered->model.config.context_length);
    if (!window || window->size() < needed) {
      return send_error(res, 422, "insufficient_data",
                        "store window too short for the model's context",
                        {{"required", needed}, {"available", window ? window->size() : 0}});
    }

    ordered_json per_level = ordered_json::object();
    std::int64_t start_unix = 0;
    try {
      const Forecast forecast = make_forecast(registered->model, *window, horizon,
                                              registered->model.config.num_sample_paths, seed);
      if (const auto* point = std::get_if<PointForecast>(&forecast)) {
        start_unix = point->start_unix;
        ordered_json arr = ordered_json::array();
        for (double v : point->values) arr.push_back(v);
        for (const auto& [key, level] : levels) per_level[key] = arr;
      } else {
        const auto& dist = std::get<ForecastDistribution>(forecast);
        start_unix = dist.start_unix();
        for (const auto& [key, level] : levels) {
          ordered_json arr = ordered_json::array();
          for (double v : dist.quantile(level)) arr.push_back(v);
          per_level[key] = std::move(arr);
        }
      }
    } catch (const Error& e) {
      return send_error(res, 500, "forecast_failed", e.what());
    }

    ordered_json j;
    j["series_id"] = id;
    j["model"] = to_string(registered->model.config.kind);
    j["start"] = format_iso8601(start_unix);
    j["step_seconds"] = window->step_seconds;
    j["horizon"] = horizon;
    j["seed"] = seed;
    j["model_hash"] = registered->hash;
    j["levels"] = std::move(per_level);
    res.set_header(kHashHeader, registered->hash);
    send_json(res, 200, j.dump());
  }

  void handle_report(const std::string& id, httplib::Response& res) {
    const auto registered = find_model(id);
    if (!registered || registered->report_json.empty()) {
      return send_error(res, 404, "not_found",
                        "no evaluation report for series '" + id +
                            "' (train with \"holdout\": true first)");
    }
    res.set_header(kHashHeader, registered->hash);
    send_json(res, 200, registered->report_json);
  }

  void setup_routes() {
    server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("ok", "text/plain");
    });

    const std::string id_pattern = R"(/v1/series/([^/]+))";
    auto checked = [](const httplib::Request& req, httplib::Response& res, auto&& fn) {
      const std::string id = req.matches[1];
      if (!valid_series_id(id)) {
        return send_error(res, 400, "bad_request", "invalid series id '" + id + "'");
      }
      fn(id);
    };

    server.Post(id_pattern + "/observations",
                [this, checked](const httplib::Request& req, httplib::Response& res) {
                  checked(req, res, [&](const std::string& id) { handle_observations(id, req, res); });
                });
    server.Post(id_pattern + "/train",
                [this, checked](const httplib::Request& req, httplib::Response& res) {
                  checked(req, res, [&](const std::string& id) { handle_train(id, req, res); });
                });
    server.Get(id_pattern + "/forecast",
               [this, checked](const httplib::Request& req, httplib::Response& res) {
                 checked(req, res, [&](const std::string& id) { handle_forecast(id, req, res); });
               });
    server.Get(id_pattern + "/report",
               [this, checked](const httplib::Request& req, httplib::Response& res) {
                 checked(req, res, [&](const std::string& id) { handle_report(id, res); });
               });
  }
};

RappService::RappService(ServiceConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

RappService::~RappService() { stop(); }

int RappService::start() {
  if (impl_->config.port == 0) {
    impl_->bound_port = impl_->server.bind_to_any_port(impl_->config.host);
    if (impl_->bound_port < 0) throw ConfigError("service: failed to bind an ephemeral port");
  } else {
    if (!impl_->server.bind_to_port(impl_->config.host, impl_->config.port)) {
      throw ConfigError("service: failed to bind " + impl_->config.host + ":" +
                        std::to_string(impl_->config.port));
    }
    impl_->bound_port = impl_->config.port;
  }
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return impl_->bound_port;
}

void RappService::run() {
  impl_->bound_port = impl_->config.port;
  if (!impl_->server.listen(impl_->config.host, impl_->config.port)) {
    throw ConfigError("service: failed to listen on " + impl_->config.host + ":" +
                      std::to_string(impl_->config.port));
  }
}

void RappService::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

int RappService::port() const { return impl_->bound_port; }

const ServiceConfig& RappService::config() const { return impl_->config; }

}  // namespace prbcast
