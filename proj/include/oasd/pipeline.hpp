#pragma once

#include "oasd/basis.hpp"
#include "oasd/cdf_tools.hpp"
#include "oasd/estimator.hpp"
#include "oasd/lasso_logit.hpp"
#include "oasd/riesz.hpp"

#include <optional>
#include <string>
#include <vector>

namespace oasd {

/// Everything needed to go from a sample to per-interval estimates.
struct PipelineOptions {
  BasisSpec basis;
  DistRegOptions dist;
  int ell = 1;
  std::optional<double> bandwidth;  // defaults to n^(-1/(4 ell + 2))
  IntegralOptions integral;
  RieszTuningOptions riesz;
  std::optional<double> riesz_lambda;  // fixed penalty instead of tuning
  int grid_quantiles = 19;             // empirical quantiles k/(grid+1) of Y
};

struct IntervalResult {
  IntervalU u;
  bool usable = false;
  std::string flag;
  OasdEstimate adml;
  OasdEstimate naive;
};

struct PipelineResult {
  std::vector<double> grid;
  DistRegFit dist;
  RieszFit riesz;
  DiffScheme scheme;
  std::vector<IntervalResult> intervals;
};

/// Sorted union of the empirical quantiles k/(count+1), k = 1..count, and the
/// interval endpoints.
std::vector<double> outcome_grid(const Dataset& data, const std::vector<IntervalU>& intervals,
                                 int count);

/// Steps 1-3 for every interval: distribution regression on the grid, the
/// automatic Riesz fit, and the ADML / naive estimates. Intervals that cannot
/// be estimated are flagged and skipped.
PipelineResult run_pipeline(const Dataset& data, const std::vector<IntervalU>& intervals,
                            const PipelineOptions& options);

}  // namespace oasd
