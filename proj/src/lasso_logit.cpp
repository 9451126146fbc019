#include "oasd/lasso_logit.hpp"

#include "oasd/parallel.hpp"
#include "oasd/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace oasd {

namespace {

double softplus(double t) { return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

Vector probabilities(const Vector& eta) {
  return eta.unaryExpr([](double t) { return stats::logistic(t); });
}

double l1_term(const Vector& beta, const Vector& penalties) {
  return (beta.array().abs() * penalties.array()).sum();
}

void check_indicator(const Vector& indicator, const Matrix& columns) {
  if (indicator.size() != columns.rows()) {
    throw Error(ErrorKind::InvalidArgument, "indicator length does not match the basis rows");
  }
  const double ones = indicator.sum();
  if (ones <= 0.0 || ones >= static_cast<double>(indicator.size())) {
    throw Error(ErrorKind::Numerical, "indicator is constant; logistic fit is degenerate");
  }
}

}  // namespace

double penalty_level(Index n, Index p) {
  if (n < 8) {
    throw Error(ErrorKind::InvalidArgument, "penalty level requires n >= 8");
  }
  if (p < 1) {
    throw Error(ErrorKind::InvalidArgument, "penalty level requires p >= 1");
  }
  const double nd = static_cast<double>(n);
  const double tail = (0.1 / std::log(nd)) / (2.0 * static_cast<double>(p) * nd);
  return 1.1 * std::sqrt(nd) * stats::normal_quantile(1.0 - tail);
}

Vector initial_loadings(const Matrix& columns) {
  return 0.5 * columns.array().square().colwise().mean().sqrt().transpose();
}

Vector update_loadings(const Matrix& columns, const Vector& residuals) {
  if (residuals.size() != columns.rows()) {
    throw Error(ErrorKind::InvalidArgument, "residual length does not match the basis rows");
  }
  const Eigen::ArrayXd r2 = residuals.array().square();
  return (columns.array().square().colwise() * r2).colwise().mean().sqrt().transpose();
}

Vector floor_loadings(Vector loadings, double floor_ratio) {
  const double top = loadings.size() > 0 ? loadings.maxCoeff() : 0.0;
  const double floor = top > 0.0 ? floor_ratio * top : floor_ratio;
  loadings = loadings.cwiseMax(floor);
  return loadings;
}

Vector LogitCoefficients::linear_index(const Matrix& columns) const {
  Vector eta = columns * beta;
  eta.array() += intercept;
  return eta;
}

std::vector<Index> LogitCoefficients::support() const {
  std::vector<Index> s;
  for (Index k = 0; k < beta.size(); ++k) {
    if (beta[k] != 0.0) s.push_back(k);
  }
  return s;
}

double logit_loss(const Vector& indicator, const Vector& linear_index) {
  double total = 0.0;
  for (Index i = 0; i < indicator.size(); ++i) {
    total += softplus(linear_index[i]) - indicator[i] * linear_index[i];
  }
  return total / static_cast<double>(indicator.size());
}

double penalized_logit_objective(const Vector& indicator, const Matrix& columns,
                                 const LogitCoefficients& coef, double lambda,
                                 const Vector& loadings) {
  const double n = static_cast<double>(indicator.size());
  return logit_loss(indicator, coef.linear_index(columns)) +
         (lambda / n) * l1_term(coef.beta, loadings);
}

double logit_kkt_violation(const Vector& indicator, const Matrix& columns,
                           const LogitCoefficients& coef, double lambda, const Vector& loadings) {
  const double n = static_cast<double>(indicator.size());
  const Vector resid = probabilities(coef.linear_index(columns)) - indicator;
  const Vector grad = columns.transpose() * resid / n;
  double worst = std::fabs(resid.mean());
  for (Index k = 0; k < grad.size(); ++k) {
    const double pen = lambda / n * loadings[k];
    const double v = coef.beta[k] != 0.0 ? std::fabs(grad[k] + pen * (coef.beta[k] > 0 ? 1.0 : -1.0))
                                         : std::max(0.0, std::fabs(grad[k]) - pen);
    worst = std::max(worst, v);
  }
  return worst;
}

LassoLogitResult fit_penalized_logit(const Vector& indicator, const Matrix& columns, double lambda,
                                     const Vector& loadings,
                                     const std::optional<LogitCoefficients>& warm_start,
                                     const LogitSolverOptions& options) {
  check_indicator(indicator, columns);
  const Index n = columns.rows();
  const Index p = columns.cols();
  if (loadings.size() != p) {
    throw Error(ErrorKind::InvalidArgument, "loadings length does not match the basis columns");
  }
  if (!(lambda >= 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "penalty level must be non-negative");
  }
  const double nd = static_cast<double>(n);
  const Vector pen = (lambda / nd) * loadings;

  LassoLogitResult result;
  LogitCoefficients& coef = result.coef;
  if (warm_start && warm_start->beta.size() == p) {
    coef = *warm_start;
  } else {
    const double mean = indicator.mean();
    coef.intercept = std::log(mean / (1.0 - mean));
    coef.beta = Vector::Zero(p);
  }

  std::vector<char> in_set(static_cast<std::size_t>(p), 0);
  std::vector<Index> working;
  for (Index k = 0; k < p; ++k) {
    if (coef.beta[k] != 0.0) {
      in_set[static_cast<std::size_t>(k)] = 1;
      working.push_back(k);
    }
  }

  Vector eta = coef.linear_index(columns);
  double objective = logit_loss(indicator, eta) + l1_term(coef.beta, pen);
  const double step_tol = 1e-7;

  Vector w(n), z(n), eta_new(n);
  for (int outer = 0; outer < 1000; ++outer) {
    // Proximal Newton on the working set.
    for (int newton = 0; newton < options.max_newton; ++newton) {
      const Vector prob = probabilities(eta);
      for (Index i = 0; i < n; ++i) {
        w[i] = std::max(prob[i] * (1.0 - prob[i]), 1e-5);
        z[i] = eta[i] + (indicator[i] - prob[i]) / w[i];
      }
      const double wsum = w.sum();
      std::vector<double> curv(working.size());
      for (std::size_t j = 0; j < working.size(); ++j) {
        curv[j] = w.dot(columns.col(working[j]).cwiseAbs2()) / nd;
      }

      double b0 = coef.intercept;
      Vector beta = coef.beta;
      eta_new = eta;
      for (int pass = 0; pass < options.max_passes; ++pass) {
        ++result.passes;
        double max_change = 0.0;
        {
          const double delta = w.dot(z - eta_new) / wsum;
          b0 += delta;
          eta_new.array() += delta;
          max_change = std::max(max_change, std::fabs(delta));
        }
        for (std::size_t j = 0; j < working.size(); ++j) {
          const Index k = working[j];
          if (curv[j] <= 0.0) continue;
          const auto col = columns.col(k);
          const double grad = (w.array() * col.array() * (z - eta_new).array()).sum() / nd;
          const double a = grad + curv[j] * beta[k];
          const double updated = std::copysign(std::max(std::fabs(a) - pen[k], 0.0), a) / curv[j];
          const double delta = updated - beta[k];
          if (delta != 0.0) {
            beta[k] = updated;
            eta_new += delta * col;
            max_change = std::max(max_change, std::fabs(delta) * std::sqrt(curv[j]));
          }
        }
        if (max_change < options.coef_tol) break;
      }

      // Backtracking along the proximal Newton direction.
      const double old_b0 = coef.intercept;
      const Vector old_beta = coef.beta;
      const Vector old_eta = eta;
      double t = 1.0;
      double trial_obj = objective;
      bool accepted = false;
      for (int ls = 0; ls < 40; ++ls) {
        const double tb0 = old_b0 + t * (b0 - old_b0);
        const Vector tbeta = old_beta + t * (beta - old_beta);
        const Vector teta = old_eta + t * (eta_new - old_eta);
        trial_obj = logit_loss(indicator, teta) + l1_term(tbeta, pen);
        if (trial_obj <= objective + 1e-15 * std::fabs(objective)) {
          coef.intercept = tb0;
          coef.beta = tbeta;
          eta = teta;
          accepted = true;
          break;
        }
        t *= 0.5;
      }
      const double step = std::max(std::fabs(coef.intercept - old_b0),
                                   (coef.beta - old_beta).cwiseAbs().maxCoeff());
      const double decrease = objective - trial_obj;
      if (accepted) objective = trial_obj;
      if (!accepted || (decrease < options.objective_tol * (1.0 + std::fabs(objective)) && step < step_tol) ||
          decrease <= 1e-15) {
        break;
      }
      if (result.passes >= options.max_passes) break;
    }

    // Screen for KKT violators outside the working set.
    const Vector resid = probabilities(eta) - indicator;
    const Vector grad = columns.transpose() * resid / nd;
    std::vector<std::pair<double, Index>> violators;
    for (Index k = 0; k < p; ++k) {
      if (in_set[static_cast<std::size_t>(k)]) continue;
      const double excess = std::fabs(grad[k]) - pen[k];
      if (excess > 1e-9 * (1.0 + pen[k])) violators.emplace_back(excess, k);
    }
    if (violators.empty()) {
      result.converged = true;
      break;
    }
    std::sort(violators.begin(), violators.end(), std::greater<>());
    const std::size_t take = std::min<std::size_t>(violators.size(), 10);
    for (std::size_t j = 0; j < take; ++j) {
      in_set[static_cast<std::size_t>(violators[j].second)] = 1;
      working.push_back(violators[j].second);
    }
    std::sort(working.begin(), working.end());
    if (result.passes >= options.max_passes) break;
  }
  result.objective = objective;
  return result;
}

PostLassoResult post_lasso_refit(const Vector& indicator, const Matrix& columns,
                                 const std::vector<Index>& support,
                                 const LogitCoefficients& fallback) {
  check_indicator(indicator, columns);
  const Index n = columns.rows();
  const Index s = static_cast<Index>(support.size());
  PostLassoResult out;
  auto give_up = [&](const std::string& why) {
    out.coef = fallback;
    out.fallback = true;
    out.warning = why;
    return out;
  };
  if (s + 1 >= n) {
    return give_up("support too large for an unpenalized refit");
  }

  Matrix design(n, s + 1);
  design.col(0).setOnes();
  for (Index j = 0; j < s; ++j) design.col(j + 1) = columns.col(support[static_cast<std::size_t>(j)]);

  Vector theta(s + 1);
  theta[0] = fallback.intercept;
  for (Index j = 0; j < s; ++j) theta[j + 1] = fallback.beta[support[static_cast<std::size_t>(j)]];

  const double nd = static_cast<double>(n);
  Vector eta = design * theta;
  double loss = logit_loss(indicator, eta);
  bool converged = false;
  for (int iter = 0; iter < 100; ++iter) {
    const Vector prob = probabilities(eta);
    const Vector grad = design.transpose() * (prob - indicator) / nd;
    const Vector w = prob.array() * (1.0 - prob.array());
    const Matrix hess = design.transpose() * w.asDiagonal() * design / nd;
    Eigen::LDLT<Matrix> ldlt(hess);
    const Vector diag = ldlt.vectorD();
    const double dmax = diag.cwiseAbs().maxCoeff();
    if (ldlt.info() != Eigen::Success || !(dmax > 0.0) || diag.minCoeff() <= 1e-12 * dmax) {
      return give_up("rank-deficient refit design");
    }
    const Vector step = ldlt.solve(grad);
    const double decrement = grad.dot(step);
    double t = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 50; ++ls) {
      const Vector trial = theta - t * step;
      const Vector trial_eta = design * trial;
      const double trial_loss = logit_loss(indicator, trial_eta);
      if (trial_loss <= loss - 1e-4 * t * decrement || trial_loss <= loss) {
        theta = trial;
        eta = trial_eta;
        loss = trial_loss;
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (theta.cwiseAbs().maxCoeff() > 50.0 || loss < 1e-8) {
      return give_up("quasi-separation in refit");
    }
    if (!moved || decrement < 1e-14) {
      converged = decrement < 1e-8;
      break;
    }
  }
  if (!converged) {
    return give_up("refit did not converge");
  }
  out.coef.intercept = theta[0];
  out.coef.beta = Vector::Zero(columns.cols());
  for (Index j = 0; j < s; ++j) out.coef.beta[support[static_cast<std::size_t>(j)]] = theta[j + 1];
  return out;
}

std::vector<double> DistRegFit::y_grid() const {
  std::vector<double> g;
  g.reserve(points.size());
  for (const auto& pt : points) g.push_back(pt.y);
  return g;
}

Index DistRegFit::grid_index_at_or_below(double y) const {
  Index found = -1;
  for (Index g = 0; g < static_cast<Index>(points.size()); ++g) {
    if (points[static_cast<std::size_t>(g)].y <= y) found = g;
  }
  return found;
}

DistRegFit fit_distribution_regression(const Dataset& data, const BasisSpec& spec,
                                       const std::vector<double>& y_grid,
                                       const DistRegOptions& options) {
  return fit_distribution_regression(data, build_basis(data, spec), y_grid, options);
}

DistRegFit fit_distribution_regression(const Dataset& data, const BasisExpansion& expansion,
                                       const std::vector<double>& y_grid,
                                       const DistRegOptions& options) {
  for (std::size_t g = 1; g < y_grid.size(); ++g) {
    if (!(y_grid[g - 1] < y_grid[g])) {
      throw Error(ErrorKind::InvalidArgument, "outcome grid must be strictly increasing");
    }
  }
  if (options.max_loading_iters < 0) {
    throw Error(ErrorKind::Config, "loading iterations must be non-negative");
  }
  const Matrix& columns = expansion.columns;
  const Index n = columns.rows();
  DistRegFit fit;
  fit.basis = expansion.basis;
  fit.lambda = penalty_level(n, columns.cols());
  fit.points.resize(y_grid.size());
  const Vector start_loadings = floor_loadings(initial_loadings(columns), options.loading_floor);

  parallel_for(y_grid.size(), options.workers, [&](std::size_t g) {
    GridPointFit& pt = fit.points[g];
    pt.y = y_grid[g];
    const Vector indicator = (data.y.array() <= pt.y).cast<double>();
    const auto below = static_cast<Index>(indicator.sum());
    const Index above = n - below;
    if (below < options.min_tail_count || above < options.min_tail_count) {
      std::ostringstream msg;
      msg << "unusable grid point: " << below << " observations at or below y, " << above
          << " above (minimum " << options.min_tail_count << ")";
      pt.flag = msg.str();
      return;
    }
    try {
      Vector loadings = start_loadings;
      std::optional<LogitCoefficients> warm;
      for (int q = 0;; ++q) {
        const LassoLogitResult lasso =
            fit_penalized_logit(indicator, columns, fit.lambda, loadings, warm, options.solver);
        warm = lasso.coef;
        const std::vector<Index> support = lasso.coef.support();
        PostLassoResult post = post_lasso_refit(indicator, columns, support, lasso.coef);
        pt.lasso = lasso.coef;
        pt.post = post.coef;
        pt.support = support;
        pt.refit_fallback = post.fallback;
        pt.flag = post.warning;
        pt.loadings = loadings;
        pt.iterations_used = q + 1;

        const Vector resid =
            indicator - post.coef.linear_index(columns).unaryExpr([](double t) { return stats::logistic(t); });
        const Vector next = floor_loadings(update_loadings(columns, resid), options.loading_floor);
        pt.loading_delta = (next - loadings).cwiseAbs().maxCoeff();
        if (q >= options.max_loading_iters || pt.loading_delta <= 1e-12 * loadings.maxCoeff()) {
          break;
        }
        loadings = next;
      }
      pt.usable = true;
    } catch (const Error& e) {
      pt.usable = false;
      pt.flag = e.what();
    }
  });
  return fit;
}

}  // namespace oasd
