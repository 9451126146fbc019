#pragma once

#include "oasd/basis.hpp"
#include "oasd/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace oasd {

/// lambda = 1.1 sqrt(n) Phi^{-1}(1 - (0.1 / ln n) / (2 p n)). Requires n >= 8.
double penalty_level(Index n, Index p);

/// psi_k = 0.5 * sqrt(mean_i b_ik^2)
Vector initial_loadings(const Matrix& columns);

/// psi_k = sqrt(mean_i b_ik^2 r_i^2)
Vector update_loadings(const Matrix& columns, const Vector& residuals);

/// Floors each loading at floor_ratio * max_j psi_j (or at floor_ratio when all are zero).
Vector floor_loadings(Vector loadings, double floor_ratio = 1e-6);

struct LogitSolverOptions {
  double objective_tol = 1e-7;
  double coef_tol = 1e-9;
  int max_passes = 10000;
  int max_newton = 100;
};

/// Intercept-augmented logistic coefficients.
struct LogitCoefficients {
  double intercept = 0.0;
  Vector beta;

  Vector linear_index(const Matrix& columns) const;
  std::vector<Index> support() const;
};

struct LassoLogitResult {
  LogitCoefficients coef;
  double objective = 0.0;
  int passes = 0;
  bool converged = false;
};

/// Mean negative Bernoulli log-likelihood with logistic link.
double logit_loss(const Vector& indicator, const Vector& linear_index);

/// logit_loss + (lambda/n) * sum_k loadings_k |beta_k|; the intercept is unpenalized.
double penalized_logit_objective(const Vector& indicator, const Matrix& columns,
                                 const LogitCoefficients& coef, double lambda,
                                 const Vector& loadings);

/// Largest KKT violation of the penalized problem at coef (0 at an exact solution).
double logit_kkt_violation(const Vector& indicator, const Matrix& columns,
                           const LogitCoefficients& coef, double lambda, const Vector& loadings);

/// L1-penalized logistic regression by proximal Newton with coordinate-descent
/// inner solves over a working set. Throws ErrorKind::Numerical when the
/// indicator is constant.
LassoLogitResult fit_penalized_logit(const Vector& indicator, const Matrix& columns, double lambda,
                                     const Vector& loadings,
                                     const std::optional<LogitCoefficients>& warm_start = {},
                                     const LogitSolverOptions& options = {});

struct PostLassoResult {
  LogitCoefficients coef;
  bool fallback = false;  // true when the refit failed and the Lasso coefficients were kept
  std::string warning;
};

/// Unpenalized logistic MLE with beta_j = 0 off the support (intercept free).
/// On separation or rank deficiency returns `fallback` coefficients with the flag set.
PostLassoResult post_lasso_refit(const Vector& indicator, const Matrix& columns,
                                 const std::vector<Index>& support,
                                 const LogitCoefficients& fallback);

struct GridPointFit {
  double y = 0.0;
  bool usable = false;
  std::string flag;
  LogitCoefficients lasso;
  LogitCoefficients post;  // the coefficients used downstream
  std::vector<Index> support;
  Vector loadings;
  int iterations_used = 0;
  double loading_delta = 0.0;
  bool refit_fallback = false;
};

struct DistRegOptions {
  int max_loading_iters = 15;
  Index min_tail_count = 10;
  double loading_floor = 1e-6;
  std::size_t workers = 1;
  LogitSolverOptions solver;
};

struct DistRegFit {
  Basis basis;
  double lambda = 0.0;
  std::vector<GridPointFit> points;

  std::vector<double> y_grid() const;
  /// Index of the largest grid point <= y, or -1.
  Index grid_index_at_or_below(double y) const;
};

/// Distribution regression of 1{Y <= y} on b(D, X) for every y in the grid,
/// with iterated penalty loadings and post-Lasso refits. Degenerate grid
/// points are flagged, never fatal.
DistRegFit fit_distribution_regression(const Dataset& data, const BasisSpec& spec,
                                       const std::vector<double>& y_grid,
                                       const DistRegOptions& options = {});

/// Same, on an already expanded basis.
DistRegFit fit_distribution_regression(const Dataset& data, const BasisExpansion& expansion,
                                       const std::vector<double>& y_grid,
                                       const DistRegOptions& options = {});

}  // namespace oasd
