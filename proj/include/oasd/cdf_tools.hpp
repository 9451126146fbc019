#pragma once

#include "oasd/lasso_logit.hpp"
#include "oasd/types.hpp"

#include <functional>
#include <list>
#include <vector>

namespace oasd {

/// Central partial-difference scheme of order ell: weights eta_1..eta_ell with
/// sum l*eta_l = 1 and sum l^v*eta_l = 0 for v = 3, 5, ..., 2ell-1.
struct DiffScheme {
  int ell = 1;
  std::vector<double> eta;
  double bandwidth = 0.0;

  static DiffScheme make(int ell, double bandwidth);
  void validate() const;
};

std::vector<double> solve_eta(int ell);

/// n^(-1/(4 ell + 2))
double bandwidth(Index n, int ell);

/// (2h)^{-1} sum_l eta_l (f(d + l h) - f(d - l h))
double partial_difference(const DiffScheme& scheme, double d, const std::function<double(double)>& f);

/// How beta(y) is read off the fitted grid for y between grid points.
enum class GridInterpolation {
  Step,    // nearest grid point at or below y
  Linear,  // linear interpolation of the linear index between neighbours
};

struct IntegralOptions {
  int riemann_steps = 100;
  GridInterpolation interpolation = GridInterpolation::Step;
};

/// F_hat(y | d, x) = Lambda(b'(d, x) beta(y)) at a fitted grid point.
double cdf_hat(const DistRegFit& fit, double y, double d, const Vector& x);

/// sum_{j=1..J} F_hat(y1 + j dy | d, x) dy with dy = (y2 - y1)/J.
double integral_cdf(const DistRegFit& fit, const IntervalU& u, double d, const Vector& x,
                    const IntegralOptions& options = {});

double diff_integral_cdf(const DistRegFit& fit, const DiffScheme& scheme, const IntervalU& u,
                         double d, const Vector& x, const IntegralOptions& options = {});

/// Direct differentiation: sum_j Lambda'(b'beta(y_j)) (d/dd b)'beta(y_j) dy.
double direct_diff_cdf(const DistRegFit& fit, const IntervalU& u, double d, const Vector& x,
                       const IntegralOptions& options = {});

/// Pointwise CDF derivatives at a single grid point y.
double diff_cdf(const DistRegFit& fit, const DiffScheme& scheme, double y, double d, const Vector& x);
double direct_diff_cdf_at(const DistRegFit& fit, double y, double d, const Vector& x);

/// integral_{y1}^{y2} 1{Y < y} dy = 1{Y <= y1}(y2 - y1) + 1{y1 < Y < y2}(y2 - Y)
double indicator_integral(double y_obs, const IntervalU& u);

/// Riemann-sum weights for an interval: for each step j, the grid points and
/// weights used to form its linear index. Exposed for vectorised evaluation.
struct RiemannPlan {
  double step = 0.0;
  struct Node {
    Index lo = 0;
    Index hi = 0;
    double frac = 0.0;  // index = (1 - frac) * idx[lo] + frac * idx[hi]
  };
  std::vector<Node> nodes;
};

RiemannPlan make_riemann_plan(const DistRegFit& fit, const IntervalU& u, const IntegralOptions& options);

/// Linear indices b'(D_i + shift, X_i) beta(y_g) for every observation (rows)
/// and every grid point (columns), cached per shift.
class IndexTable {
 public:
  IndexTable(const DistRegFit& fit, const Vector& d, const Matrix& x);

  /// n x G matrix at D + shift.
  const Matrix& at_shift(double shift);
  /// n x G matrix of d/dd of the linear index at D.
  const Matrix& derivative();

  Index n() const { return d_.size(); }

 private:
  const DistRegFit& fit_;
  Vector d_;
  Matrix x_;
  Matrix coef_;  // p x G
  Vector intercepts_;
  std::list<std::pair<double, Matrix>> cache_;
  Matrix deriv_;
  bool has_deriv_ = false;
};

/// IF_hat over every observation in the table at D + shift.
Vector integral_cdf_all(IndexTable& table, const RiemannPlan& plan, double shift);
/// DIF_hat over every observation via the partial-difference scheme.
Vector diff_integral_cdf_all(IndexTable& table, const RiemannPlan& plan, const DiffScheme& scheme);
/// Direct-differentiation comparator over every observation.
Vector direct_diff_cdf_all(IndexTable& table, const RiemannPlan& plan);

}  // namespace oasd
