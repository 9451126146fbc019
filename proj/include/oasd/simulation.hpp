#pragma once

#include "oasd/pipeline.hpp"
#include "oasd/types.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace oasd {

/// Y = D + X'(c_y delta0) + D X_1 + U,  D = X'(c_d delta0) + V_1, with U switching
/// between V_2, V_3, V_4 at the 0.3 / 0.7 quantiles of D.
struct MainDgpConfig {
  Index n = 500;
  Index num_covariates = 30;
  double rd2 = 0.1;
  double ry2 = 0.1;
  std::uint64_t seed = 1;
  bool interaction = true;  // include the D X_1 term

  void validate() const;
  double delta_sigma_delta() const;
  double c_d() const;
  double c_y() const;
  /// Standard deviation of D under the exact Gaussian law.
  double sd_d() const;
};

Dataset draw_main_dgp(const MainDgpConfig& cfg);
Dataset draw_main_dgp(const MainDgpConfig& cfg, std::mt19937_64& rng);

/// Band in probability units, resolved against empirical quantiles of Y.
struct QuantileBand {
  double lo = 0.0;
  double hi = 0.0;
  std::string label() const;
};

/// (0.05, 0.15), (0.15, 0.25), ..., (0.85, 0.95)
std::vector<QuantileBand> decile_bands();

/// theta_true(band) = mean(1 + X_1 | Y in band) on a mega-sample of oracle_n
/// draws, with the band resolved against the mega-sample quantiles.
std::vector<double> true_theta_oracle(const MainDgpConfig& cfg, const std::vector<QuantileBand>& bands,
                                      Index oracle_n, std::uint64_t oracle_seed);

struct McCell {
  std::string band;
  std::string estimator;  // "naive" or "adml"
  double theta_true = 0.0;
  double mean_theta = 0.0;
  double bias_ratio = 0.0;
  double std = 0.0;
  double mse = 0.0;
  double coverage = 0.0;
  Index reps = 0;
};

struct McOptions {
  PipelineOptions pipeline;
  int reps = 100;
  std::uint64_t seed = 1;
  Index oracle_n = 1000000;
  double alpha = 0.05;       // nominal level of the pointwise CI used for coverage
  int bootstrap_draws = 0;   // > 0 runs the homogeneity test in every replication
  std::size_t workers = 1;
};

struct McReport {
  MainDgpConfig config;
  std::vector<QuantileBand> bands;
  std::vector<McCell> cells;
  int reps_requested = 0;
  int reps_used = 0;
  int failures = 0;
  double homogeneity_rejection_rate = -1.0;  // < 0 when not computed
  double max_abs_mean_psi = 0.0;
  std::vector<std::string> flags;
  double runtime_seconds = 0.0;

  const McCell& cell(const std::string& band, const std::string& estimator) const;
};

McReport run_main_mc(const MainDgpConfig& cfg, const std::vector<QuantileBand>& bands,
                     const McOptions& options);

/// Partial-linear design used for the derivative comparison:
///   Y | D, X ~ N(g(D) + X'alpha, 1),  D | X ~ N(X'gamma, 1),  X ~ N(0, Sigma_p)
/// with Sigma_p(r, c) = 0.5^{2(|r-c|+1)} and alpha = gamma given by the design.
struct PartialLinearConfig {
  int dgp = 1;     // 1, 2, 3
  int design = 1;  // 1..4 for (i)..(iv)
  Index n = 500;
  Index p = 99;
  std::uint64_t seed = 1;

  void validate() const;
};

double partial_linear_g(int dgp, double d);
double partial_linear_g_prime(int dgp, double d);
/// alpha_j = 0.5^{(j + 2k - 1)/k} for design k, i.e. 0.5^{j+1}, 0.5^{(j+3)/2}, ...
Vector partial_linear_coefficients(int design, Index p);
int parse_design(const std::string& roman);
std::string design_name(int design);

Dataset draw_partial_linear_dgp(const PartialLinearConfig& cfg);
Dataset draw_partial_linear_dgp(const PartialLinearConfig& cfg, std::mt19937_64& rng);

/// d/dD F(y | D, X) = -phi(y - g(D) - X'alpha) g'(D)
Vector partial_linear_true_derivative(const PartialLinearConfig& cfg, const Dataset& data, double y);

struct DerivativeComparison {
  PartialLinearConfig config;
  std::vector<double> tau;
  std::vector<double> mean_dist_partial;
  std::vector<double> mean_dist_direct;
  int reps_requested = 0;
  int reps_used = 0;
  int failures = 0;
  double runtime_seconds = 0.0;
};

struct DerivativeOptions {
  int reps = 50;
  std::uint64_t seed = 1;
  DistRegOptions dist;
  std::size_t workers = 1;
};

std::vector<double> default_tau_list();

DerivativeComparison run_derivative_comparison(const PartialLinearConfig& cfg,
                                               const std::vector<double>& tau_list,
                                               const DerivativeOptions& options);

/// mean_i (estimate_i - truth_i)^2
double mean_sq_distance(const Vector& estimate, const Vector& truth);

/// Deterministic sub-seed for replication `rep` of stream `stream`.
std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t rep);

}  // namespace oasd
