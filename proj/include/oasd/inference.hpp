#pragma once

#include "oasd/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace oasd {

enum class MultiplierLaw {
  Normal,
  Rademacher,
  Mammen,
  Zero,  // degenerate xi = 0, only for testing
};

MultiplierLaw parse_multiplier_law(const std::string& name);
std::string to_string(MultiplierLaw law);

/// B x |U| matrix with entry (b, u) = n^{-1/2} sum_i xi_i^(b) psi_i(u).
/// Draw b uses its own generator seeded from (seed, b), so results do not
/// depend on how draws are scheduled.
Matrix multiplier_draws(const Matrix& psi, int num_draws, std::uint64_t seed, MultiplierLaw law,
                        std::size_t workers = 1);

struct Band {
  double lo = 0.0;
  double hi = 0.0;
};

struct BandResult {
  double critical_value = 0.0;          // sup-t critical value over the usable u
  std::vector<double> pointwise_critical;  // per-u percentile-t critical values
  Vector sigma;                          // per-u sd of the draws
  std::vector<Band> uniform;
  std::vector<Band> pointwise;
  std::vector<bool> excluded;            // sigma = 0
};

/// Sup-t band: c* is the (1 - alpha) empirical quantile of max_u |draw(b,u)|/sigma(u);
/// band(u) = theta(u) -/+ c* sigma(u)/sqrt(n).
BandResult uniform_band(const Matrix& draws, const Vector& theta, Index n, double alpha);

struct HomogeneityTest {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// sup_u sqrt(n)|theta(u) - mean_U theta| against the bootstrap law of
/// sup_u |Z*(u) - mean_U Z*|.
HomogeneityTest homogeneity_test(const Matrix& draws, const Vector& theta, Index n);

struct BootstrapResult {
  Matrix draws;
  BandResult bands;
  HomogeneityTest homogeneity;
  std::vector<std::string> warnings;
};

/// psi is n x |U| (scores at theta_hat). Homogeneity is only computed for |U| >= 2.
BootstrapResult bootstrap_inference(const Matrix& psi, const Vector& theta, int num_draws,
                                    double alpha, std::uint64_t seed, MultiplierLaw law,
                                    std::size_t workers = 1);

/// (1 - alpha) empirical quantile used for critical values: the ceil((1-alpha) B)-th order statistic.
double upper_quantile(std::vector<double> values, double level);

}  // namespace oasd
