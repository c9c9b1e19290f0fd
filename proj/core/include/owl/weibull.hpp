#pragma once

#include <span>
#include <vector>

#include "owl/common.hpp"

namespace owl::energy {

/// Three-parameter (shifted) Weibull distribution with support x > location.
struct WeibullModel {
  double shape = 1.0;
  double scale = 1.0;
  double location = 0.0;

  void validate() const;
};

double weibull_pdf(const WeibullModel& m, double x);
double weibull_log_pdf(const WeibullModel& m, double x);
double weibull_cdf(const WeibullModel& m, double x);
/// Inverse CDF for u in [0, 1).
double weibull_quantile(const WeibullModel& m, double u);

/// Sum of log densities. Returns -inf if any sample lies outside the support.
double weibull_log_likelihood(const WeibullModel& m, std::span<const double> samples);

class FitError : public Error {
 public:
  using Error::Error;
};

/// Fit diagnostics; `log_likelihood_trace` holds the best profile
/// log-likelihood seen after each bisection step.
struct WeibullFit {
  WeibullModel model;
  double log_likelihood = 0.0;
  std::size_t n_samples = 0;
  std::size_t iterations = 0;
  std::vector<double> log_likelihood_trace;
};

inline constexpr std::size_t kMinWeibullSamples = 10;

/// Maximum-likelihood shifted-Weibull fit. The location is pinned just below
/// the sample minimum (by the gap between the two smallest order statistics),
/// then shape and scale maximise the two-parameter likelihood: the shape
/// solves the profile score equation by bisection on [1e-3, 1e3] and
/// scale^shape = mean((x - location)^shape).
///
/// Throws FitError with fewer than 10 samples, non-finite samples, or when
/// all samples are identical.
WeibullFit fit_shifted_weibull(std::span<const double> samples);

/// Partial derivatives of the two-parameter log-likelihood with respect to
/// (shape, scale) at fixed location. Zero at the MLE.
struct WeibullScore {
  double d_shape = 0.0;
  double d_scale = 0.0;
};
WeibullScore weibull_score(const WeibullModel& m, std::span<const double> samples);

}  // namespace owl::energy
