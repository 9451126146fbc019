#pragma once

#include "oasd/inference.hpp"
#include "oasd/pipeline.hpp"
#include "oasd/simulation.hpp"
#include "oasd/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace oasd {

enum class Command { Estimate, Simulate, CompareDerivative };

Command parse_command(const std::string& name);
std::string to_string(Command command);

/// Interval given either in outcome units or as empirical quantiles ("q0.45:q0.55").
struct IntervalSpec {
  double lo = 0.0;
  double hi = 0.0;
  bool quantile = false;
  std::string text;
};

std::vector<IntervalSpec> parse_intervals(const std::string& text, bool bare_as_quantile);

/// Validated configuration of one CLI command. Keys are set one at a time with
/// `set`; unknown or inapplicable keys are rejected immediately.
struct RunConfig {
  Command command = Command::Estimate;

  // shared
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format = "json";
  std::size_t threads = 0;
  int degree = 2;
  int ell = 1;
  int riemann_steps = 100;
  std::string interpolation = "step";
  int loading_iters = 15;
  int bootstrap = 1000;
  double alpha = 0.05;
  std::string weights = "normal";
  std::string estimator = "both";
  std::string riesz_rule = "root-n";
  double riesz_kappa = 1.0;
  bool riesz_post_lasso = true;
  int grid = 19;

  // estimate
  std::string input;
  std::string outcome = "y";
  std::string treatment = "d";
  std::vector<std::string> covariates;
  std::string intervals = "q0.05:q0.15,q0.15:q0.25,q0.25:q0.35,q0.35:q0.45,q0.45:q0.55,"
                          "q0.55:q0.65,q0.65:q0.75,q0.75:q0.85,q0.85:q0.95";
  std::string interval_units = "value";  // how bare numbers in `intervals` are read

  // simulate
  std::string design = "main";
  double rd2 = 0.1;
  double ry2 = 0.1;
  int reps = 100;
  Index n = 500;
  Index num_covariates = 30;
  Index oracle_n = 1000000;
  bool all_cells = false;
  int homogeneity_draws = 0;

  // compare-derivative
  int dgp = 1;
  Index dim = 99;
  std::string tau = "0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9";

  explicit RunConfig(Command cmd);

  static std::vector<std::string> allowed_keys(Command command);

  void set(const std::string& key, const std::string& value);
  /// Flat key = value document; '#' starts a comment.
  void load_file(const std::string& path);
  void validate() const;

  /// Resolves the seed: the configured one, or a fresh random one.
  std::uint64_t resolved_seed() const;

  PipelineOptions pipeline_options() const;
  MultiplierLaw multiplier_law() const;
  bool want_adml() const { return estimator == "adml" || estimator == "both"; }
  bool want_naive() const { return estimator == "naive" || estimator == "both"; }
};

/// Delimited text with a header row. Outcome and treatment columns are named;
/// covariates are the listed columns, or every remaining column when empty.
struct LoadedDataset {
  Dataset data;
  std::vector<std::string> warnings;
  std::string summary;
};

LoadedDataset load_dataset(const std::string& path, const std::string& outcome,
                           const std::string& treatment,
                           const std::vector<std::string>& covariates = {});

struct EstimateRow {
  std::string label;
  IntervalU u;
  bool usable = false;
  std::string flag;
  double p_hat = 0.0;
  double theta_adml = 0.0, se_adml = 0.0, ci_adml_lo = 0.0, ci_adml_hi = 0.0;
  double band_adml_lo = 0.0, band_adml_hi = 0.0;
  double theta_naive = 0.0, se_naive = 0.0, ci_naive_lo = 0.0, ci_naive_hi = 0.0;
  double band_naive_lo = 0.0, band_naive_hi = 0.0;
  double grid_support = 0.0;  // mean Lasso support size over grid points inside u
};

struct EstimateReport {
  std::uint64_t seed = 0;
  Index n = 0;
  Index num_covariates = 0;
  Index basis_dimension = 0;
  double lambda = 0.0;
  double lambda_tilde = 0.0;
  Index riesz_support = 0;
  double bandwidth = 0.0;
  int ell = 1;
  int bootstrap = 0;
  double alpha = 0.05;
  bool adml = true;
  bool naive = true;
  double critical_adml = 0.0;
  double critical_naive = 0.0;
  std::optional<HomogeneityTest> homogeneity_adml;
  std::optional<HomogeneityTest> homogeneity_naive;
  std::vector<EstimateRow> rows;
  std::vector<std::string> warnings;
};

EstimateReport run_estimate(const Dataset& data, const RunConfig& cfg);

struct SimulateReport {
  std::uint64_t seed = 0;
  std::vector<McReport> cells;
};

SimulateReport run_simulate(const RunConfig& cfg);
DerivativeComparison run_compare_derivative(const RunConfig& cfg);

// Shortest decimal text that parses back to the same double; "nan" when not finite.
std::string num(double v);

// Writers produce `<prefix>.txt` (aligned table) and `<prefix>.json` or `<prefix>.csv`.
std::string format_estimate_table(const EstimateReport& report);
std::string format_estimate_json(const EstimateReport& report);
std::string format_estimate_csv(const EstimateReport& report);
std::string format_simulate_table(const SimulateReport& report);
std::string format_simulate_json(const SimulateReport& report);
std::string format_simulate_csv(const SimulateReport& report);
std::string format_derivative_table(const DerivativeComparison& report);
std::string format_derivative_json(const DerivativeComparison& report);
std::string format_derivative_csv(const DerivativeComparison& report);

/// Writes the table and the structured twin; returns the paths written.
std::vector<std::string> write_outputs(const std::string& prefix, const std::string& format,
                                       const std::string& table, const std::string& json,
                                       const std::string& csv);

}  // namespace oasd
