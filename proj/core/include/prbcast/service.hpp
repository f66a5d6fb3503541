#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

namespace prbcast {

/// Runtime settings for the rApp HTTP service.
struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  ///< 0 binds an ephemeral port
  std::filesystem::path data_dir = "prbcast-data";
  double capacity = 273.0;
};

struct ServiceOverrides {
  std::optional<std::string> host;
  std::optional<int> port;
  std::optional<std::filesystem::path> data_dir;
  std::optional<double> capacity;
};

/// Resolution order: explicit overrides (CLI flags), then PRBCAST_HOST /
/// PRBCAST_PORT / PRBCAST_DATA_DIR / PRBCAST_CAPACITY environment variables,
/// then the optional config file (JSON or TOML: host, port, data_dir,
/// capacity), then defaults.
ServiceConfig resolve_service_config(const std::optional<std::filesystem::path>& config_file,
                                     const ServiceOverrides& overrides);

/// The engine's rApp face: ingests PRB telemetry over HTTP, persists it,
/// trains/loads forecasters and serves quantile forecasts.
///
/// Endpoints (JSON bodies, ISO-8601 UTC timestamps, errors as
/// {code, message, detail}):
///   GET  /healthz
///   POST /v1/series/{id}/observations
///   POST /v1/series/{id}/train
///   GET  /v1/series/{id}/forecast?horizon=H&levels=0.1,0.5,0.9&seed=N
///   GET  /v1/series/{id}/report
class RappService {
 public:
  explicit RappService(ServiceConfig config);
  ~RappService();

  RappService(const RappService&) = delete;
  RappService& operator=(const RappService&) = delete;

  /// Binds and serves on a background thread; returns the bound port.
  int start();

  /// Serves on the calling thread until stop() (the CLI path).
  void run();

  void stop();

  int port() const;
  const ServiceConfig& config() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace prbcast
