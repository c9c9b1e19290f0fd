#include "owl/weibull.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace owl::energy {

void WeibullModel::validate() const {
  if (!(shape > 0.0) || !std::isfinite(shape)) throw InvalidArgument("Weibull shape must be > 0");
  if (!(scale > 0.0) || !std::isfinite(scale)) throw InvalidArgument("Weibull scale must be > 0");
  if (!std::isfinite(location)) throw InvalidArgument("Weibull location must be finite");
}

double weibull_log_pdf(const WeibullModel& m, double x) {
  if (!(x > m.location)) return -std::numeric_limits<double>::infinity();
  const double z = (x - m.location) / m.scale;
  return std::log(m.shape / m.scale) + (m.shape - 1.0) * std::log(z) - std::pow(z, m.shape);
}

double weibull_pdf(const WeibullModel& m, double x) {
  if (!(x > m.location)) return 0.0;
  const double z = (x - m.location) / m.scale;
  return (m.shape / m.scale) * std::pow(z, m.shape - 1.0) * std::exp(-std::pow(z, m.shape));
}

double weibull_cdf(const WeibullModel& m, double x) {
  if (!(x > m.location)) return 0.0;
  const double z = (x - m.location) / m.scale;
  return -std::expm1(-std::pow(z, m.shape));
}

double weibull_quantile(const WeibullModel& m, double u) {
  if (!(u >= 0.0 && u < 1.0)) throw InvalidArgument("weibull_quantile: u must lie in [0, 1)");
  return m.location + m.scale * std::pow(-std::log1p(-u), 1.0 / m.shape);
}

double weibull_log_likelihood(const WeibullModel& m, std::span<const double> samples) {
  double ll = 0.0;
  for (double x : samples) ll += weibull_log_pdf(m, x);
  return ll;
}

WeibullScore weibull_score(const WeibullModel& m, std::span<const double> samples) {
  const double n = static_cast<double>(samples.size());
  const double k = m.shape;
  const double lam = m.scale;
  double sum_log = 0.0;
  double sum_pow = 0.0;
  double sum_pow_log = 0.0;
  for (double x : samples) {
    const double z = (x - m.location) / lam;
    const double zk = std::pow(z, k);
    sum_log += std::log(x - m.location);
    sum_pow += zk;
    sum_pow_log += zk * std::log(z);
  }
  WeibullScore s;
  s.d_shape = n / k - n * std::log(lam) + sum_log - sum_pow_log;
  s.d_scale = -n * k / lam + (k / lam) * sum_pow;
  return s;
}

namespace {

// Samples shifted by the location and divided by their maximum, so that all
// values lie in (0, 1] and u^k cannot overflow for large shapes.
struct NormalizedSample {
  std::vector<double> u;
  std::vector<double> log_u;
  double log_max = 0.0;
  double mean_log_u = 0.0;
};

NormalizedSample normalize(std::span<const double> samples, double location) {
  NormalizedSample ns;
  double y_max = 0.0;
  for (double x : samples) y_max = std::max(y_max, x - location);
  ns.log_max = std::log(y_max);
  ns.u.reserve(samples.size());
  ns.log_u.reserve(samples.size());
  for (double x : samples) {
    const double u = (x - location) / y_max;
    ns.u.push_back(u);
    ns.log_u.push_back(std::log(u));
    ns.mean_log_u += ns.log_u.back();
  }
  ns.mean_log_u /= static_cast<double>(samples.size());
  return ns;
}

struct PowerSums {
  double sum_pow = 0.0;      // sum u^k
  double sum_pow_log = 0.0;  // sum u^k log u
};

PowerSums power_sums(const NormalizedSample& ns, double k) {
  PowerSums ps;
  for (std::size_t i = 0; i < ns.u.size(); ++i) {
    const double uk = std::exp(k * ns.log_u[i]);
    ps.sum_pow += uk;
    ps.sum_pow_log += uk * ns.log_u[i];
  }
  return ps;
}

// Profile score in the shape parameter; increasing in k.
double profile_score(const NormalizedSample& ns, double k) {
  const PowerSums ps = power_sums(ns, k);
  return ps.sum_pow_log / ps.sum_pow - 1.0 / k - ns.mean_log_u;
}

// Log-likelihood at shape k with the scale profiled out:
// scale^k = mean(y^k).
double profile_log_likelihood(const NormalizedSample& ns, double k) {
  const double n = static_cast<double>(ns.u.size());
  const PowerSums ps = power_sums(ns, k);
  const double log_scale = ns.log_max + std::log(ps.sum_pow / n) / k;
  const double sum_log_y = n * (ns.mean_log_u + ns.log_max);
  // sum (y/scale)^k == n by construction of the profiled scale.
  return n * std::log(k) - n * k * log_scale + (k - 1.0) * sum_log_y - n;
}

}  // namespace

WeibullFit fit_shifted_weibull(std::span<const double> samples) {
  if (samples.size() < kMinWeibullSamples) {
    throw FitError("need at least " + std::to_string(kMinWeibullSamples) + " samples, got " +
                   std::to_string(samples.size()));
  }
  for (double x : samples) {
    if (!std::isfinite(x)) throw FitError("non-finite sample");
  }
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double lo = sorted.front();
  const double hi = sorted.back();
  if (!(hi > lo)) throw FitError("all samples are identical");

  const double gap = sorted[1] - sorted[0];
  const double offset = std::max(gap, 1e-6 * (hi - lo));
  const double location = lo - offset;
  const NormalizedSample ns = normalize(samples, location);

  constexpr double kShapeLo = 1e-3;
  constexpr double kShapeHi = 1e3;
  constexpr double kTolerance = 1e-8;

  WeibullFit fit;
  fit.n_samples = samples.size();

  double a = kShapeLo;
  double b = kShapeHi;
  double best_ll = -std::numeric_limits<double>::infinity();
  double best_k = a;
  double k = a;
  if (profile_score(ns, b) <= 0.0) {
    k = b;
    best_ll = profile_log_likelihood(ns, k);
    best_k = k;
    fit.log_likelihood_trace.push_back(best_ll);
  } else if (profile_score(ns, a) >= 0.0) {
    k = a;
    best_ll = profile_log_likelihood(ns, k);
    best_k = k;
    fit.log_likelihood_trace.push_back(best_ll);
  } else {
    while (b - a > kTolerance) {
      k = 0.5 * (a + b);
      const double s = profile_score(ns, k);
      if (s < 0.0) {
        a = k;
      } else {
        b = k;
      }
      const double ll = profile_log_likelihood(ns, k);
      if (ll >= best_ll) {
        best_ll = ll;
        best_k = k;
      }
      fit.log_likelihood_trace.push_back(best_ll);
      ++fit.iterations;
      if (s == 0.0) break;
    }
    k = 0.5 * (a + b);
    const double ll = profile_log_likelihood(ns, k);
    if (ll >= best_ll) {
      best_ll = ll;
      best_k = k;
    }
    fit.log_likelihood_trace.push_back(best_ll);
  }

  const PowerSums ps = power_sums(ns, best_k);
  const double n = static_cast<double>(samples.size());
  fit.model.shape = best_k;
  fit.model.scale = std::exp(ns.log_max + std::log(ps.sum_pow / n) / best_k);
  fit.model.location = location;
  fit.log_likelihood = weibull_log_likelihood(fit.model, samples);
  return fit;
}

}  // namespace owl::energy
