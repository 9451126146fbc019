#include "oasd/cdf_tools.hpp"

#include "oasd/stats.hpp"

#include <cmath>
#include <map>
#include <sstream>
#include <tuple>

namespace oasd {

std::vector<double> solve_eta(int ell) {
  if (ell < 1 || ell > 6) {
    throw Error(ErrorKind::InvalidArgument, "difference order ell must lie in 1..6");
  }
  Matrix system(ell, ell);
  Vector rhs = Vector::Zero(ell);
  rhs[0] = 1.0;
  for (int row = 0; row < ell; ++row) {
    const int power = 2 * row + 1;
    for (int l = 1; l <= ell; ++l) {
      system(row, l - 1) = std::pow(static_cast<double>(l), power);
    }
  }
  const Vector eta = system.fullPivLu().solve(rhs);
  return {eta.data(), eta.data() + eta.size()};
}

double bandwidth(Index n, int ell) {
  if (n < 1 || ell < 1) {
    throw Error(ErrorKind::InvalidArgument, "bandwidth needs n >= 1 and ell >= 1");
  }
  return std::pow(static_cast<double>(n), -1.0 / (4.0 * ell + 2.0));
}

DiffScheme DiffScheme::make(int ell, double h) {
  DiffScheme scheme;
  scheme.ell = ell;
  scheme.eta = solve_eta(ell);
  scheme.bandwidth = h;
  scheme.validate();
  return scheme;
}

void DiffScheme::validate() const {
  if (ell < 1 || static_cast<int>(eta.size()) != ell) {
    throw Error(ErrorKind::InvalidArgument, "difference scheme has inconsistent order");
  }
  if (!(bandwidth > 0.0) || !std::isfinite(bandwidth)) {
    throw Error(ErrorKind::InvalidArgument, "bandwidth must be positive");
  }
}

double partial_difference(const DiffScheme& scheme, double d, const std::function<double(double)>& f) {
  double total = 0.0;
  for (int l = 1; l <= scheme.ell; ++l) {
    const double step = l * scheme.bandwidth;
    total += scheme.eta[static_cast<std::size_t>(l - 1)] * (f(d + step) - f(d - step));
  }
  return total / (2.0 * scheme.bandwidth);
}

double indicator_integral(double y_obs, const IntervalU& u) {
  if (y_obs <= u.y1) return u.y2 - u.y1;
  if (y_obs < u.y2) return u.y2 - y_obs;
  return 0.0;
}

namespace {

const GridPointFit& usable_point(const DistRegFit& fit, Index g) {
  const GridPointFit& pt = fit.points[static_cast<std::size_t>(g)];
  if (!pt.usable) {
    std::ostringstream msg;
    msg << "grid point y = " << pt.y << " is unusable: " << pt.flag;
    throw Error(ErrorKind::Numerical, msg.str());
  }
  return pt;
}

Index exact_grid_index(const DistRegFit& fit, double y) {
  for (Index g = 0; g < static_cast<Index>(fit.points.size()); ++g) {
    const double gy = fit.points[static_cast<std::size_t>(g)].y;
    if (std::fabs(gy - y) <= 1e-12 * (1.0 + std::fabs(gy))) return g;
  }
  std::ostringstream msg;
  msg << "y = " << y << " is not a fitted grid point";
  throw Error(ErrorKind::InvalidArgument, msg.str());
}

double point_index(const GridPointFit& pt, const Vector& row) { return pt.post.intercept + row.dot(pt.post.beta); }

}  // namespace

double cdf_hat(const DistRegFit& fit, double y, double d, const Vector& x) {
  const GridPointFit& pt = usable_point(fit, exact_grid_index(fit, y));
  return stats::logistic(point_index(pt, fit.basis.evaluate_row(d, x)));
}

RiemannPlan make_riemann_plan(const DistRegFit& fit, const IntervalU& u, const IntegralOptions& options) {
  if (options.riemann_steps < 1) {
    throw Error(ErrorKind::InvalidArgument, "Riemann step count J must be >= 1");
  }
  if (fit.points.empty()) {
    throw Error(ErrorKind::InvalidArgument, "distribution regression has no grid points");
  }
  const double lo = fit.points.front().y;
  const double hi = fit.points.back().y;
  const double tol = 1e-12 * (1.0 + std::fabs(lo) + std::fabs(hi));
  if (!(u.y1 < u.y2) || u.y1 < lo - tol || u.y2 > hi + tol) {
    std::ostringstream msg;
    msg << "interval (" << u.y1 << ", " << u.y2 << ") is outside the fitted grid [" << lo << ", " << hi
        << "]";
    throw Error(ErrorKind::InvalidArgument, msg.str());
  }
  RiemannPlan plan;
  const int steps = options.riemann_steps;
  plan.step = (u.y2 - u.y1) / steps;
  const auto last = static_cast<Index>(fit.points.size()) - 1;
  for (int j = 1; j <= steps; ++j) {
    const double y = j == steps ? u.y2 : u.y1 + j * plan.step;
    Index g = fit.grid_index_at_or_below(y + tol * (1.0 + std::fabs(y)));
    if (g < 0) g = 0;
    RiemannPlan::Node node{g, g, 0.0};
    if (options.interpolation == GridInterpolation::Linear && g < last) {
      const double y_lo = fit.points[static_cast<std::size_t>(g)].y;
      const double y_hi = fit.points[static_cast<std::size_t>(g + 1)].y;
      const double frac = (y - y_lo) / (y_hi - y_lo);
      if (frac > 1e-12) {
        node.hi = g + 1;
        node.frac = std::min(frac, 1.0);
      }
    }
    usable_point(fit, node.lo);
    usable_point(fit, node.hi);
    plan.nodes.push_back(node);
  }
  return plan;
}

IndexTable::IndexTable(const DistRegFit& fit, const Vector& d, const Matrix& x) : fit_(fit), d_(d), x_(x) {
  const auto grid = static_cast<Index>(fit.points.size());
  const Index p = fit.basis.dimension();
  coef_ = Matrix::Zero(p, grid);
  intercepts_ = Vector::Zero(grid);
  for (Index g = 0; g < grid; ++g) {
    const GridPointFit& pt = fit.points[static_cast<std::size_t>(g)];
    if (!pt.usable) continue;
    coef_.col(g) = pt.post.beta;
    intercepts_[g] = pt.post.intercept;
  }
}

const Matrix& IndexTable::at_shift(double shift) {
  for (const auto& [s, m] : cache_) {
    if (s == shift) return m;
  }
  Matrix idx = fit_.basis.evaluate(d_, x_, shift) * coef_;
  idx.rowwise() += intercepts_.transpose();
  cache_.emplace_back(shift, std::move(idx));
  return cache_.back().second;
}

const Matrix& IndexTable::derivative() {
  if (!has_deriv_) {
    deriv_ = fit_.basis.evaluate_derivative(d_, x_) * coef_;
    has_deriv_ = true;
  }
  return deriv_;
}

namespace {

// Collapses identical nodes so step interpolation costs one pass per grid point.
std::map<std::tuple<Index, Index, double>, double> node_weights(const RiemannPlan& plan) {
  std::map<std::tuple<Index, Index, double>, double> weights;
  for (const auto& node : plan.nodes) {
    weights[{node.lo, node.hi, node.frac}] += plan.step;
  }
  return weights;
}

Vector interpolated(const Matrix& m, Index lo, Index hi, double frac) {
  if (frac == 0.0) return m.col(lo);
  return (1.0 - frac) * m.col(lo) + frac * m.col(hi);
}

}  // namespace

Vector integral_cdf_all(IndexTable& table, const RiemannPlan& plan, double shift) {
  const Matrix& idx = table.at_shift(shift);
  Vector out = Vector::Zero(table.n());
  for (const auto& [key, weight] : node_weights(plan)) {
    const auto& [lo, hi, frac] = key;
    const Vector column = interpolated(idx, lo, hi, frac);
    out += weight * column.unaryExpr([](double t) { return stats::logistic(t); });
  }
  return out;
}

Vector diff_integral_cdf_all(IndexTable& table, const RiemannPlan& plan, const DiffScheme& scheme) {
  Vector out = Vector::Zero(table.n());
  for (int l = 1; l <= scheme.ell; ++l) {
    const double step = l * scheme.bandwidth;
    out += scheme.eta[static_cast<std::size_t>(l - 1)] *
           (integral_cdf_all(table, plan, step) - integral_cdf_all(table, plan, -step));
  }
  return out / (2.0 * scheme.bandwidth);
}

Vector direct_diff_cdf_all(IndexTable& table, const RiemannPlan& plan) {
  const Matrix& idx = table.at_shift(0.0);
  const Matrix& didx = table.derivative();
  Vector out = Vector::Zero(table.n());
  for (const auto& [key, weight] : node_weights(plan)) {
    const auto& [lo, hi, frac] = key;
    const Vector level = interpolated(idx, lo, hi, frac);
    const Vector slope = interpolated(didx, lo, hi, frac);
    out += weight * (level.unaryExpr([](double t) { return stats::logistic_deriv(t); }).array() *
                     slope.array())
                        .matrix();
  }
  return out;
}

namespace {

IndexTable single_point_table(const DistRegFit& fit, double d, const Vector& x) {
  return IndexTable(fit, Vector::Constant(1, d), x.transpose());
}

}  // namespace

double integral_cdf(const DistRegFit& fit, const IntervalU& u, double d, const Vector& x,
                    const IntegralOptions& options) {
  const RiemannPlan plan = make_riemann_plan(fit, u, options);
  IndexTable table = single_point_table(fit, d, x);
  return integral_cdf_all(table, plan, 0.0)[0];
}

double diff_integral_cdf(const DistRegFit& fit, const DiffScheme& scheme, const IntervalU& u, double d,
                         const Vector& x, const IntegralOptions& options) {
  scheme.validate();
  const RiemannPlan plan = make_riemann_plan(fit, u, options);
  IndexTable table = single_point_table(fit, d, x);
  return diff_integral_cdf_all(table, plan, scheme)[0];
}

double direct_diff_cdf(const DistRegFit& fit, const IntervalU& u, double d, const Vector& x,
                       const IntegralOptions& options) {
  const RiemannPlan plan = make_riemann_plan(fit, u, options);
  IndexTable table = single_point_table(fit, d, x);
  return direct_diff_cdf_all(table, plan)[0];
}

double diff_cdf(const DistRegFit& fit, const DiffScheme& scheme, double y, double d, const Vector& x) {
  scheme.validate();
  const GridPointFit& pt = usable_point(fit, exact_grid_index(fit, y));
  return partial_difference(scheme, d, [&](double shifted) {
    return stats::logistic(point_index(pt, fit.basis.evaluate_row(shifted, x)));
  });
}

double direct_diff_cdf_at(const DistRegFit& fit, double y, double d, const Vector& x) {
  const GridPointFit& pt = usable_point(fit, exact_grid_index(fit, y));
  const double level = point_index(pt, fit.basis.evaluate_row(d, x));
  return stats::logistic_deriv(level) * fit.basis.evaluate_derivative_row(d, x).dot(pt.post.beta);
}

}  // namespace oasd
