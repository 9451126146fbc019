#include "oasd/pipeline.hpp"

#include "oasd/stats.hpp"

#include <algorithm>
#include <cmath>

namespace oasd {

std::vector<double> outcome_grid(const Dataset& data, const std::vector<IntervalU>& intervals, int count) {
  if (count < 1) {
    throw Error(ErrorKind::InvalidArgument, "grid needs at least one quantile");
  }
  if (data.n() == 0) {
    throw Error(ErrorKind::Data, "empty sample");
  }
  std::vector<double> sorted(data.y.data(), data.y.data() + data.n());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> grid;
  for (int k = 1; k <= count; ++k) {
    grid.push_back(stats::sample_quantile(sorted, static_cast<double>(k) / (count + 1)));
  }
  for (const auto& u : intervals) {
    grid.push_back(u.y1);
    grid.push_back(u.y2);
  }
  std::sort(grid.begin(), grid.end());
  std::vector<double> unique;
  for (double y : grid) {
    if (unique.empty() || std::fabs(y - unique.back()) > 1e-12 * (1.0 + std::fabs(y))) {
      unique.push_back(y);
    }
  }
  return unique;
}

PipelineResult run_pipeline(const Dataset& data, const std::vector<IntervalU>& intervals,
                            const PipelineOptions& options) {
  data.validate();
  if (intervals.empty()) {
    throw Error(ErrorKind::InvalidArgument, "no intervals to estimate");
  }
  PipelineResult result;
  const BasisExpansion expansion = build_basis(data, options.basis);
  result.grid = outcome_grid(data, intervals, options.grid_quantiles);
  result.dist = fit_distribution_regression(data, expansion, result.grid, options.dist);
  result.riesz = options.riesz_lambda
                     ? fit_riesz_fixed(expansion, *options.riesz_lambda, options.riesz.post_lasso)
                     : fit_riesz_tuned(expansion, options.riesz);
  const double h = options.bandwidth.value_or(bandwidth(data.n(), options.ell));
  result.scheme = DiffScheme::make(options.ell, h);

  NuisanceModel model;
  model.data = &data;
  model.dist = &result.dist;
  model.riesz = &result.riesz;
  model.scheme = result.scheme;
  model.integral = options.integral;
  NuisanceAssembler assembler(model);

  for (const auto& u : intervals) {
    IntervalResult row;
    row.u = u;
    try {
      const NuisanceBundle bundle = assembler.bundle(u);
      row.adml = theta_adml(bundle);
      row.naive = theta_naive(bundle);
      row.usable = true;
    } catch (const Error& e) {
      row.flag = e.what();
    }
    result.intervals.push_back(std::move(row));
  }
  return result;
}

}  // namespace oasd
