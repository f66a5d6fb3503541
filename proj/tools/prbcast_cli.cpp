// prbcast: PRB-utilization forecasting pipeline in one binary.
//
// Exit codes: 0 success, 1 validation/config error, 2 runtime or numeric
// error. Machine-readable output goes to stdout, diagnostics to stderr.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "prbcast/checkpoint.hpp"
#include "prbcast/errors.hpp"
#include "prbcast/experiment.hpp"
#include "prbcast/forecaster.hpp"
#include "prbcast/metrics.hpp"
#include "prbcast/rng.hpp"
#include "prbcast/service.hpp"
#include "prbcast/svg_plot.hpp"
#include "prbcast/time_series.hpp"
#include "prbcast/trace_gen.hpp"
#include "prbcast/version.hpp"

namespace {

using namespace prbcast;

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
  out << content;
  if (!out) throw ConfigError("failed writing '" + path.string() + "'");
}

struct GenArgs {
  std::string out;
  TraceGenConfig config;
  std::string start = "2024-01-01T00:00:00Z";
};

struct SplitArgs {
  std::string in;
  std::string out_dir = ".";
  SplitSpec spec{.context_length = 96, .horizon = 24, .test_windows = 1};
};

struct TrainArgs {
  std::string in;
  std::string out = "model.ckpt";
  std::string kind = "deepar";
  ModelConfig config;
};

struct EvalArgs {
  std::string model;
  std::string in;
  std::uint64_t seed = 0;
  int season_length = 0;  // 0: use the checkpoint's season
};

struct ForecastArgs {
  std::string model;
  std::string in;
  int horizon = 0;  // 0: trained horizon
  std::string levels = "0.1,0.5,0.9";
  std::uint64_t seed = 0;
  int num_paths = 0;  // 0: checkpoint's sample count
};

struct BacktestArgs {
  std::string config_path;
  std::string out_dir = "backtest-out";
  std::optional<std::uint64_t> seed;
};

struct ServeArgs {
  std::string config_path;
  std::optional<int> port;
  std::optional<std::string> host;
  std::optional<std::string> data_dir;
  std::optional<double> capacity;
};

struct PlotArgs {
  std::string in;
  std::string out;
  std::string title;
};

void add_model_options(CLI::App* cmd, TrainArgs& args) {
  cmd->add_option("--model", args.kind, "seasonal_naive|lstm|sff|deepar|transformer")
      ->required();
  cmd->add_option("--context", args.config.context_length, "context window length");
  cmd->add_option("--horizon", args.config.horizon, "forecast horizon");
  cmd->add_option("--hidden", args.config.hidden_size, "hidden size / feed-forward width");
  cmd->add_option("--layers", args.config.num_layers, "recurrent or MLP layers");
  cmd->add_option("--epochs", args.config.epochs, "training epochs");
  cmd->add_option("--batch", args.config.batch_size, "windows per batch");
  cmd->add_option("--batches-per-epoch", args.config.batches_per_epoch, "batches per epoch");
  cmd->add_option("--lr", args.config.learning_rate, "Adam learning rate");
  cmd->add_option("--paths", args.config.num_sample_paths, "sample paths for probabilistic output");
  cmd->add_option("--season", args.config.season_length, "season length (seasonal-naive, MASE)");
  cmd->add_option("--heads", args.config.num_heads, "attention heads (transformer)");
  cmd->add_option("--model-dim", args.config.model_dim, "model dimension (transformer)");
  cmd->add_option("--seed", args.config.seed, "training seed");
}

int run_gen(GenArgs& args) {
  args.config.start_unix = parse_iso8601(args.start);
  const TimeSeries series = generate_prb_trace(args.config);
  save_trace(series, args.out);
  return 0;
}

int run_split(SplitArgs& args) {
  const TimeSeries series = load_trace(args.in);
  const TrainTestSplit split = split_train_test(series, args.spec);
  std::filesystem::create_directories(args.out_dir);
  const auto dir = std::filesystem::path(args.out_dir);
  save_trace(split.train, dir / "train.csv");
  for (std::size_t w = 0; w < split.windows.size(); ++w) {
    save_trace(split.windows[w].context, dir / ("window" + std::to_string(w) + "_context.csv"));
    save_trace(split.windows[w].actual, dir / ("window" + std::to_string(w) + "_actual.csv"));
  }
  return 0;
}

int run_train(TrainArgs& args) {
  args.config.kind = model_kind_from_string(args.kind);
  const TimeSeries series = load_trace(args.in);
  const TrainedModel model = train_model(series, args.config);
  save_checkpoint(model, args.out);
  nlohmann::ordered_json j;
  j["model"] = to_string(model.config.kind);
  j["final_loss"] = model.final_loss;
  j["epochs"] = model.config.epochs;
  j["checkpoint"] = args.out;
  std::cout << j.dump(2) << "\n";
  return 0;
}

int run_eval(EvalArgs& args) {
  const TrainedModel model = load_checkpoint(args.model);
  const TimeSeries series = load_trace(args.in);
  const int context = model.config.kind == ModelKind::kSeasonalNaive
                          ? model.config.season_length
                          : model.config.context_length;
  const TrainTestSplit split = split_train_test(
      series, {.context_length = context, .horizon = model.config.horizon, .test_windows = 1});
  const TestWindow& tw = split.windows[0];
  const int season = args.season_length > 0 ? args.season_length : model.config.season_length;
  const Forecast forecast = make_forecast(model, tw.context, model.config.horizon,
                                          model.config.num_sample_paths, args.seed);
  metrics::EvaluationReport report;
  if (const auto* point = std::get_if<PointForecast>(&forecast)) {
    report = metrics::evaluate_point(to_string(model.config.kind), *point, tw.actual.values,
                                     split.train.values, season,
                                     model.config.kind == ModelKind::kSeasonalNaive
                                         ? metrics::PointEvalMode::kConstantQuantiles
                                         : metrics::PointEvalMode::kPointOnly);
  } else {
    report = metrics::evaluate_distribution(to_string(model.config.kind),
                                            std::get<ForecastDistribution>(forecast),
                                            tw.actual.values, split.train.values, season);
  }
  std::cout << report.to_json() << "\n";
  return 0;
}

int run_forecast(ForecastArgs& args) {
  const TrainedModel model = load_checkpoint(args.model);
  const TimeSeries series = load_trace(args.in);
  const int horizon = args.horizon > 0 ? args.horizon : model.config.horizon;
  const int paths = args.num_paths > 0 ? args.num_paths : model.config.num_sample_paths;

  std::vector<std::pair<std::string, double>> levels;
  std::size_t pos = 0;
  while (pos <= args.levels.size()) {
    const auto comma = args.levels.find(',', pos);
    const std::string item =
        args.levels.substr(pos, comma == std::string::npos ? comma : comma - pos);
    try {
      const double level = std::stod(item);
      if (!(level > 0.0) || !(level < 1.0)) throw DomainError("");
      levels.emplace_back(item, level);
    } catch (...) {
      throw ConfigError("bad --levels entry '" + item + "' (want numbers in (0,1))");
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }

  const Forecast forecast = make_forecast(model, series, horizon, paths, args.seed);
  nlohmann::ordered_json j;
  j["model"] = to_string(model.config.kind);
  j["horizon"] = horizon;
  j["seed"] = args.seed;
  nlohmann::ordered_json per_level = nlohmann::ordered_json::object();
  if (const auto* point = std::get_if<PointForecast>(&forecast)) {
    j["start"] = format_iso8601(point->start_unix);
    j["step_seconds"] = point->step_seconds;
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (double v : point->values) arr.push_back(v);
    for (const auto& [key, level] : levels) per_level[key] = arr;
  } else {
    const auto& dist = std::get<ForecastDistribution>(forecast);
    j["start"] = format_iso8601(dist.start_unix());
    j["step_seconds"] = dist.step_seconds();
    for (const auto& [key, level] : levels) {
      nlohmann::ordered_json arr = nlohmann::ordered_json::array();
      for (double v : dist.quantile(level)) arr.push_back(v);
      per_level[key] = std::move(arr);
    }
  }
  j["levels"] = std::move(per_level);
  std::cout << j.dump(2) << "\n";
  return 0;
}

int run_backtest(BacktestArgs& args) {
  ExperimentConfig config = args.config_path.empty() ? default_experiment_config()
                                                     : load_experiment_config(args.config_path);
  if (args.seed) {
    config.master_seed = *args.seed;
  }
  config.output_dir = args.out_dir;
  const ExperimentResult result = run_experiment(config);
  std::cout << result.table.to_text();
  std::cerr << "artifacts written to " << config.output_dir.string() << "\n";
  return 0;
}

int run_serve(ServeArgs& args) {
  ServiceOverrides overrides;
  overrides.port = args.port;
  overrides.host = args.host;
  if (args.data_dir) overrides.data_dir = *args.data_dir;
  overrides.capacity = args.capacity;
  const std::optional<std::filesystem::path> config_file =
      args.config_path.empty() ? std::nullopt
                               : std::optional<std::filesystem::path>(args.config_path);
  RappService service(resolve_service_config(config_file, overrides));
  std::cerr << "prbcast rApp service listening on " << service.config().host << ":"
            << service.config().port << " (data dir " << service.config().data_dir.string()
            << ")\n";
  service.run();
  return 0;
}

int run_plot_forecast(PlotArgs& args) {
  const ForecastPlotData data = parse_forecast_csv(args.in);
  const std::string title =
      args.title.empty() ? std::filesystem::path(args.in).stem().string() : args.title;
  write_file(args.out, render_forecast_svg(data, title));
  return 0;
}

int run_plot_histogram(PlotArgs& args) {
  const HistogramPlotData data = parse_histogram_csv(args.in);
  const std::string title = args.title.empty() ? "forecast histogram" : args.title;
  write_file(args.out, render_histogram_svg(data, title));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PRB-utilization probabilistic forecasting engine"};
  app.set_version_flag("--version", std::string(kVersionString));
  app.require_subcommand(1);

  GenArgs gen_args;
  auto* gen = app.add_subcommand("gen", "generate a synthetic PRB trace");
  gen->add_option("--out", gen_args.out, "output CSV path")->required();
  gen->add_option("--length", gen_args.config.length, "number of samples");
  gen->add_option("--base-load", gen_args.config.base_load, "mean PRB load");
  gen->add_option("--daily-amplitude", gen_args.config.daily_amplitude, "daily sinusoid amplitude");
  gen->add_option("--weekly-amplitude", gen_args.config.weekly_amplitude,
                  "weekly sinusoid amplitude");
  gen->add_option("--noise-ar", gen_args.config.noise_ar_coeff, "AR(1) noise coefficient [0,1)");
  gen->add_option("--noise-sigma", gen_args.config.noise_sigma, "noise innovation sigma");
  gen->add_option("--burst-rate", gen_args.config.burst_rate, "expected bursts per day");
  gen->add_option("--burst-height", gen_args.config.burst_height, "burst height in PRBs");
  gen->add_option("--capacity", gen_args.config.capacity, "cell capacity in PRBs");
  gen->add_option("--step-seconds", gen_args.config.step_seconds, "sampling period");
  gen->add_option("--start", gen_args.start, "first sample timestamp (ISO-8601 UTC)");
  gen->add_option("--series-id", gen_args.config.series_id, "series identifier");
  gen->add_option("--seed", gen_args.config.seed, "generator seed");

  SplitArgs split_args;
  auto* split = app.add_subcommand("split", "split a trace into train and test windows");
  split->add_option("--in", split_args.in, "input trace CSV")->required();
  split->add_option("--out-dir", split_args.out_dir, "output directory");
  split->add_option("--context", split_args.spec.context_length, "context length");
  split->add_option("--horizon", split_args.spec.horizon, "horizon");
  split->add_option("--windows", split_args.spec.test_windows, "number of rolling windows");

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "train a forecaster on a trace");
  train->add_option("--in", train_args.in, "input trace CSV")->required();
  train->add_option("--out", train_args.out, "checkpoint output path");
  add_model_options(train, train_args);

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a terminal holdout window");
  eval->add_option("--model", eval_args.model, "checkpoint path")->required();
  eval->add_option("--in", eval_args.in, "input trace CSV")->required();
  eval->add_option("--seed", eval_args.seed, "sampling seed");
  eval->add_option("--season", eval_args.season_length, "MASE season (default: checkpoint's)");

  ForecastArgs forecast_args;
  auto* forecast = app.add_subcommand("forecast", "forecast past the end of a trace");
  forecast->add_option("--model", forecast_args.model, "checkpoint path")->required();
  forecast->add_option("--in", forecast_args.in, "input trace CSV (the context)")->required();
  forecast->add_option("--horizon", forecast_args.horizon, "steps to forecast");
  forecast->add_option("--levels", forecast_args.levels, "comma-separated quantile levels");
  forecast->add_option("--seed", forecast_args.seed, "sampling seed");
  forecast->add_option("--paths", forecast_args.num_paths, "sample paths");

  BacktestArgs backtest_args;
  auto* backtest = app.add_subcommand("backtest", "run the full model-comparison experiment");
  backtest->add_option("--config", backtest_args.config_path,
                       "experiment config (.json or .toml); omit for the built-in standard run");
  backtest->add_option("--out", backtest_args.out_dir, "artifact directory");
  backtest->add_option("--seed", backtest_args.seed, "override the master seed");

  ServeArgs serve_args;
  auto* serve = app.add_subcommand("serve", "run the rApp HTTP service");
  serve->add_option("--config", serve_args.config_path, "service config (.json or .toml)");
  serve->add_option("--port", serve_args.port, "listen port");
  serve->add_option("--host", serve_args.host, "bind address");
  serve->add_option("--data-dir", serve_args.data_dir, "telemetry/model directory");
  serve->add_option("--capacity", serve_args.capacity, "cell capacity in PRBs");

  auto* plot = app.add_subcommand("plot", "render backtest artifacts as SVG");
  plot->require_subcommand(1);
  PlotArgs plot_forecast_args;
  auto* plot_forecast = plot->add_subcommand("forecast", "fan chart from a forecast CSV");
  plot_forecast->add_option("--in", plot_forecast_args.in, "forecast_<model>.csv")->required();
  plot_forecast->add_option("--out", plot_forecast_args.out, "output SVG")->required();
  plot_forecast->add_option("--title", plot_forecast_args.title, "chart title");
  PlotArgs plot_histogram_args;
  auto* plot_histogram = plot->add_subcommand("histogram", "bar chart from histogram.csv");
  plot_histogram->add_option("--in", plot_histogram_args.in, "histogram.csv")->required();
  plot_histogram->add_option("--out", plot_histogram_args.out, "output SVG")->required();
  plot_histogram->add_option("--title", plot_histogram_args.title, "chart title");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) return run_gen(gen_args);
    if (split->parsed()) return run_split(split_args);
    if (train->parsed()) return run_train(train_args);
    if (eval->parsed()) return run_eval(eval_args);
    if (forecast->parsed()) return run_forecast(forecast_args);
    if (backtest->parsed()) return run_backtest(backtest_args);
    if (serve->parsed()) return run_serve(serve_args);
    if (plot->parsed()) {
      if (plot_forecast->parsed()) return run_plot_forecast(plot_forecast_args);
      if (plot_histogram->parsed()) return run_plot_histogram(plot_histogram_args);
    }
    std::cerr << "no subcommand selected\n";
    return 1;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
