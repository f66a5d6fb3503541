#pragma once

namespace prbcast {

/// Per-step parameters of a Gaussian predictive distribution.
struct GaussianParams {
  double mu = 0.0;
  double sigma = 1.0;  ///< >= 1e-6
};

/// Minimum predictive scale; sigma heads are floored here so the
/// log-likelihood stays defined.
inline constexpr double kSigmaFloor = 1e-6;

/// Inverse standard normal CDF (Wichura's AS 241, PPND16). Absolute error
/// below 1e-15 over (0, 1); throws DomainError outside the open interval.
double normal_cdf_inv(double p);

/// Standard normal CDF via erfc.
double normal_cdf(double x);

/// -log N(z; mu, sigma^2) = 0.5 log(2 pi sigma^2) + (z - mu)^2 / (2 sigma^2).
double gaussian_nll(double mu, double sigma, double z);

}  // namespace prbcast
