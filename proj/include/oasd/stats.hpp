#pragma once

#include "oasd/types.hpp"

#include <cmath>
#include <span>

namespace oasd::stats {

double normal_pdf(double x);
double normal_cdf(double x);

/// Inverse of the standard normal CDF (Wichura AS241). Throws for p outside (0, 1).
double normal_quantile(double p);

inline double logistic(double t) {
  if (t >= 0.0) {
    return 1.0 / (1.0 + std::exp(-t));
  }
  const double e = std::exp(t);
  return e / (1.0 + e);
}

inline double logistic_deriv(double t) {
  const double p = logistic(t);
  return p * (1.0 - p);
}

/// Linear-interpolation sample quantile (the usual "type 7" definition).
double sample_quantile(std::span<const double> sorted, double prob);

/// Population standard deviation (divides by the count).
double sd(const Vector& v);

}  // namespace oasd::stats
