#include "prbcast/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "prbcast/errors.hpp"
#include "prbcast/rng.hpp"

namespace prbcast {

ForecastDistribution ForecastDistribution::from_sample_paths(
    std::int64_t start_unix, std::int64_t step_seconds, std::vector<std::vector<double>> paths) {
  if (paths.size() < 2) {
    throw ValidationError("forecast distribution needs at least 2 sample paths, got " +
                          std::to_string(paths.size()));
  }
  const std::size_t horizon = paths.front().size();
  if (horizon == 0) throw ValidationError("forecast distribution: empty horizon");
  for (const auto& path : paths) {
    if (path.size() != horizon) {
      throw ValidationError("forecast distribution: ragged sample paths");
    }
    for (double v : path) {
      if (!std::isfinite(v)) throw NumericError("forecast distribution: non-finite sample value");
    }
  }

  ForecastDistribution out;
  out.start_unix_ = start_unix;
  out.step_seconds_ = step_seconds;
  out.horizon_ = horizon;
  out.paths_ = std::move(paths);
  out.sorted_by_step_.resize(horizon);
  for (std::size_t t = 0; t < horizon; ++t) {
    auto& column = out.sorted_by_step_[t];
    column.resize(out.paths_.size());
    for (std::size_t s = 0; s < out.paths_.size(); ++s) column[s] = out.paths_[s][t];
    std::sort(column.begin(), column.end());
  }
  return out;
}

ForecastDistribution ForecastDistribution::from_gaussians(std::int64_t start_unix,
                                                          std::int64_t step_seconds,
                                                          std::vector<GaussianParams> per_step) {
  if (per_step.empty()) throw ValidationError("forecast distribution: empty horizon");
  for (const auto& g : per_step) {
    if (!std::isfinite(g.mu) || !std::isfinite(g.sigma)) {
      throw NumericError("forecast distribution: non-finite Gaussian parameters");
    }
    if (g.sigma < kSigmaFloor) {
      throw ValidationError("forecast distribution: sigma " + std::to_string(g.sigma) +
                            " below floor");
    }
  }
  ForecastDistribution out;
  out.start_unix_ = start_unix;
  out.step_seconds_ = step_seconds;
  out.horizon_ = per_step.size();
  out.gaussians_ = std::move(per_step);
  return out;
}

double sorted_quantile(const std::vector<double>& sorted, double level) {
  if (!(level > 0.0) || !(level < 1.0)) {
    throw DomainError("quantile level " + std::to_string(level) + " outside (0, 1)");
  }
  if (sorted.empty()) throw ContractError("sorted_quantile: empty sample");
  const double pos = static_cast<double>(sorted.size() - 1) * level;
  const std::size_t lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

std::vector<double> ForecastDistribution::quantile(double level) const {
  if (!(level > 0.0) || !(level < 1.0)) {
    throw DomainError("quantile level " + std::to_string(level) + " outside (0, 1)");
  }
  std::vector<double> out(horizon_);
  if (is_parametric()) {
    const double z = normal_cdf_inv(level);
    for (std::size_t t = 0; t < horizon_; ++t) {
      out[t] = gaussians_[t].mu + gaussians_[t].sigma * z;
    }
  } else {
    for (std::size_t t = 0; t < horizon_; ++t) out[t] = sorted_quantile(sorted_by_step_[t], level);
  }
  return out;
}

std::vector<double> ForecastDistribution::samples_at(std::size_t step) const {
  if (step >= horizon_) {
    throw ContractError("samples_at: step " + std::to_string(step) + " beyond horizon " +
                        std::to_string(horizon_));
  }
  if (!has_paths()) return {};
  return sorted_by_step_[step];
}

ForecastDistribution ForecastDistribution::materialized(std::size_t num_paths,
                                                        std::uint64_t seed) const {
  if (has_paths()) return *this;
  if (num_paths < 2) throw ContractError("materialized: need at least 2 paths");
  Xoshiro256StarStar rng(seed);
  std::vector<std::vector<double>> paths(num_paths, std::vector<double>(horizon_));
  for (std::size_t s = 0; s < num_paths; ++s) {
    for (std::size_t t = 0; t < horizon_; ++t) {
      paths[s][t] = rng.normal(gaussians_[t].mu, gaussians_[t].sigma);
    }
  }
  return from_sample_paths(start_unix_, step_seconds_, std::move(paths));
}

}  // namespace prbcast
