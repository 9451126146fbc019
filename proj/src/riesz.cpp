#include "oasd/riesz.hpp"

#include "oasd/stats.hpp"

#include <cmath>
#include <vector>

namespace oasd {

RieszMoments compute_moments(const BasisExpansion& expansion) {
  const Index n = expansion.columns.rows();
  const Index p = expansion.columns.cols();
  const double nd = static_cast<double>(n);
  Matrix augmented(n, p + 1);
  augmented.col(0).setOnes();
  augmented.rightCols(p) = expansion.columns;

  RieszMoments out;
  out.m_hat = Vector::Zero(p + 1);
  out.m_hat.tail(p) = -expansion.deriv_columns.colwise().mean().transpose();
  out.g_hat = Matrix::Zero(p + 1, p + 1);
  out.g_hat.selfadjointView<Eigen::Lower>().rankUpdate(augmented.transpose(), 1.0 / nd);
  out.g_hat.triangularView<Eigen::StrictlyUpper>() = out.g_hat.transpose();
  return out;
}

namespace {

double soft_threshold(double a, double t) { return std::copysign(std::max(std::fabs(a) - t, 0.0), a); }

}  // namespace

Vector fit_riesz(const Vector& m_hat, const Matrix& g_hat, double lambda_tilde,
                 const RieszSolverOptions& options) {
  const Index q = m_hat.size();
  if (g_hat.rows() != q || g_hat.cols() != q) {
    throw Error(ErrorKind::InvalidArgument, "Riesz moments have inconsistent dimensions");
  }
  if (!(lambda_tilde >= 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "Riesz penalty must be non-negative");
  }
  Vector gamma = Vector::Zero(q);
  Vector resid = m_hat;  // m - G gamma

  auto update = [&](Index k) {
    const double gkk = g_hat(k, k);
    if (gkk <= 0.0) return 0.0;
    const double a = resid[k] + gkk * gamma[k];
    const double updated = k == 0 ? a / gkk : soft_threshold(a, lambda_tilde) / gkk;
    const double delta = updated - gamma[k];
    if (delta != 0.0) {
      gamma[k] = updated;
      resid.noalias() -= delta * g_hat.col(k);
    }
    return std::fabs(delta) * std::sqrt(gkk);
  };

  int passes = 0;
  while (passes < options.max_passes) {
    double full_change = 0.0;
    for (Index k = 0; k < q; ++k) full_change = std::max(full_change, update(k));
    ++passes;
    if (full_change < options.coef_tol) break;
    // Cycle over the active set until it settles, then re-check everything.
    std::vector<Index> active;
    for (Index k = 0; k < q; ++k) {
      if (gamma[k] != 0.0) active.push_back(k);
    }
    while (passes < options.max_passes) {
      double change = 0.0;
      for (Index k : active) change = std::max(change, update(k));
      ++passes;
      if (change < options.coef_tol) break;
    }
  }
  return gamma;
}

double riesz_objective(const Vector& m_hat, const Matrix& g_hat, const Vector& gamma, double lambda_tilde) {
  return -2.0 * m_hat.dot(gamma) + gamma.dot(g_hat * gamma) +
         2.0 * lambda_tilde * gamma.tail(gamma.size() - 1).cwiseAbs().sum();
}

double riesz_kkt_violation(const Vector& m_hat, const Matrix& g_hat, const Vector& gamma,
                           double lambda_tilde) {
  const Vector grad = g_hat * gamma - m_hat;
  double worst = std::fabs(grad[0]);
  for (Index k = 1; k < gamma.size(); ++k) {
    const double v = gamma[k] != 0.0 ? std::fabs(grad[k] + lambda_tilde * (gamma[k] > 0 ? 1.0 : -1.0))
                                     : std::max(0.0, std::fabs(grad[k]) - lambda_tilde);
    worst = std::max(worst, v);
  }
  return worst;
}

double lambda_tilde_floor(const Vector& m_hat, double floor_ratio) {
  const double top = m_hat.size() > 0 ? m_hat.cwiseAbs().maxCoeff() : 0.0;
  return top > 0.0 ? floor_ratio * top : floor_ratio;
}

namespace {

Vector linear_index(const Matrix& columns, const Vector& gamma) {
  Vector out = columns * gamma.tail(gamma.size() - 1);
  out.array() += gamma[0];
  return out;
}

Index count_support(const Vector& gamma) {
  Index s = 0;
  for (Index k = 1; k < gamma.size(); ++k) s += gamma[k] != 0.0 ? 1 : 0;
  return s;
}

// Largest per-coordinate sd of the moment residuals d/dD b_k + b_k L.
double residual_scale(const BasisExpansion& expansion, const Vector& l_values) {
  const Matrix resid = expansion.deriv_columns + (expansion.columns.array().colwise() * l_values.array()).matrix();
  const Eigen::RowVectorXd mean = resid.colwise().mean();
  const Eigen::RowVectorXd var = (resid.rowwise() - mean).array().square().colwise().mean();
  return std::sqrt(var.maxCoeff());
}

Vector post_lasso_gamma(const RieszMoments& moments, const Vector& gamma) {
  std::vector<Index> support{0};
  for (Index k = 1; k < gamma.size(); ++k) {
    if (gamma[k] != 0.0) support.push_back(k);
  }
  const auto s = static_cast<Index>(support.size());
  Matrix g_ss(s, s);
  Vector m_s(s);
  for (Index a = 0; a < s; ++a) {
    m_s[a] = moments.m_hat[support[static_cast<std::size_t>(a)]];
    for (Index b = 0; b < s; ++b) {
      g_ss(a, b) = moments.g_hat(support[static_cast<std::size_t>(a)], support[static_cast<std::size_t>(b)]);
    }
  }
  Eigen::LDLT<Matrix> ldlt(g_ss);
  const Vector diag = ldlt.vectorD();
  if (ldlt.info() != Eigen::Success || diag.minCoeff() <= 1e-10 * diag.cwiseAbs().maxCoeff()) {
    return gamma;
  }
  const Vector sol = ldlt.solve(m_s);
  Vector out = Vector::Zero(gamma.size());
  for (Index a = 0; a < s; ++a) out[support[static_cast<std::size_t>(a)]] = sol[a];
  return out;
}

}  // namespace

double tune_lambda_tilde(const BasisExpansion& expansion, const RieszMoments& moments,
                         const RieszTuningOptions& options, std::vector<TuningStep>* trace,
                         Vector* final_gamma) {
  const Index n = expansion.columns.rows();
  const Index p = expansion.columns.cols();
  const double floor = lambda_tilde_floor(moments.m_hat, options.floor_ratio);
  const double kappa0 =
      options.kappa_scale * 1.1 * stats::normal_quantile(1.0 - 0.05 / static_cast<double>(std::max<Index>(p, 1)));
  const double nd = static_cast<double>(n);

  Vector gamma = Vector::Zero(p + 1);
  Vector l_values = Vector::Zero(n);
  double lambda = floor;
  const int iterations = std::max(options.iterations, 1);
  for (int q = 0; q < iterations; ++q) {
    const double sigma = residual_scale(expansion, l_values);
    double rule = 0.0;
    if (options.rule == RieszPenaltyRule::SqrtLogP) {
      rule = p > 1 ? kappa0 * std::sqrt(std::log(static_cast<double>(p)) / nd) * sigma : 0.0;
    } else {
      rule = kappa0 * sigma / std::sqrt(nd);
    }
    lambda = std::max(rule, floor);
    gamma = fit_riesz(moments.m_hat, moments.g_hat, lambda);
    l_values = linear_index(expansion.columns, gamma);
    if (trace) trace->push_back({lambda, count_support(gamma)});
  }
  if (final_gamma) *final_gamma = gamma;
  return lambda;
}

Index RieszFit::support_size() const { return count_support(gamma); }

RieszFit fit_riesz_tuned(const BasisExpansion& expansion, const RieszTuningOptions& options) {
  RieszFit fit;
  fit.basis = expansion.basis;
  RieszMoments moments = compute_moments(expansion);
  Vector gamma;
  fit.lambda_tilde = tune_lambda_tilde(expansion, moments, options, &fit.tuning_trace, &gamma);
  fit.gamma = options.post_lasso ? post_lasso_gamma(moments, gamma) : gamma;
  fit.m_hat = std::move(moments.m_hat);
  fit.g_hat = std::move(moments.g_hat);
  return fit;
}

RieszFit fit_riesz_fixed(const BasisExpansion& expansion, double lambda_tilde, bool post_lasso) {
  RieszFit fit;
  fit.basis = expansion.basis;
  RieszMoments moments = compute_moments(expansion);
  fit.lambda_tilde = lambda_tilde;
  const Vector gamma = fit_riesz(moments.m_hat, moments.g_hat, lambda_tilde);
  fit.gamma = post_lasso ? post_lasso_gamma(moments, gamma) : gamma;
  fit.tuning_trace.push_back({lambda_tilde, count_support(fit.gamma)});
  fit.m_hat = std::move(moments.m_hat);
  fit.g_hat = std::move(moments.g_hat);
  return fit;
}

Vector l_hat(const RieszFit& fit, const Vector& d, const Matrix& x) {
  if (fit.gamma.size() != fit.basis.dimension() + 1) {
    throw Error(ErrorKind::InvalidArgument, "Riesz coefficients do not match the basis");
  }
  return linear_index(fit.basis.evaluate(d, x), fit.gamma);
}

}  // namespace oasd
