#pragma once

#include "oasd/basis.hpp"
#include "oasd/types.hpp"

#include <vector>

namespace oasd {

/// Moments of the automatic Riesz problem on the intercept-augmented basis
/// (coordinate 0 is the constant column, coordinates 1..p are b_k):
///   M_hat = -(1/n) sum_i d/dD b(D_i, X_i),  G_hat = (1/n) sum_i b b'.
struct RieszMoments {
  Vector m_hat;
  Matrix g_hat;
};

RieszMoments compute_moments(const BasisExpansion& expansion);

struct RieszSolverOptions {
  double coef_tol = 1e-9;
  int max_passes = 100000;
};

/// argmin_gamma -2 M'gamma + gamma'G gamma + 2 lambda sum_{k>=1} w_k |gamma_k|
/// by cyclic coordinate descent with exact soft-threshold updates. Coordinate 0
/// (the intercept) is never penalized; weights default to one.
Vector fit_riesz(const Vector& m_hat, const Matrix& g_hat, double lambda_tilde,
                 const RieszSolverOptions& options = {});

double riesz_objective(const Vector& m_hat, const Matrix& g_hat, const Vector& gamma,
                       double lambda_tilde);

/// Largest KKT violation of the Riesz problem at gamma.
double riesz_kkt_violation(const Vector& m_hat, const Matrix& g_hat, const Vector& gamma,
                           double lambda_tilde);

/// How the penalty scales with (n, p) given kappa0 and the residual scale sigma.
enum class RieszPenaltyRule {
  SqrtLogP,  // kappa0 * sqrt(ln p / n) * sigma
  Root_n,    // kappa0 * sigma / sqrt(n)
};

struct RieszTuningOptions {
  RieszPenaltyRule rule = RieszPenaltyRule::Root_n;
  double kappa_scale = 1.0;   // multiplies kappa0 = 1.1 Phi^{-1}(1 - 0.05/p)
  int iterations = 5;
  double floor_ratio = 1e-4;  // lambda_min = floor_ratio * ||M_hat||_inf
  bool post_lasso = true;   // refit gamma on the selected support
};

struct TuningStep {
  double lambda = 0.0;
  Index support_size = 0;
};

struct RieszFit {
  Basis basis;
  Vector gamma;  // length p + 1, coordinate 0 is the intercept
  double lambda_tilde = 0.0;
  Vector m_hat;
  Matrix g_hat;
  std::vector<TuningStep> tuning_trace;

  Index support_size() const;
};

/// Data-driven penalty: lambda_q = rule(kappa0, sigma_q, n, p), where sigma_q
/// is the largest per-coordinate standard deviation of the moment residuals
/// d/dD b_k(W_i) + b_k(W_i) L_q(W_i) at the current fit (L_0 = 0). Returns the
/// final lambda; the full trace is written to `trace` when given.
double tune_lambda_tilde(const BasisExpansion& expansion, const RieszMoments& moments,
                         const RieszTuningOptions& options = {},
                         std::vector<TuningStep>* trace = nullptr,
                         Vector* final_gamma = nullptr);

/// Floor applied by the tuning loop: floor_ratio * ||M_hat||_inf, and used
/// directly when p = 1 (ln p = 0).
double lambda_tilde_floor(const Vector& m_hat, double floor_ratio = 1e-4);

/// Full Step-2 pipeline: moments, tuned penalty, fit (optionally post-Lasso).
RieszFit fit_riesz_tuned(const BasisExpansion& expansion, const RieszTuningOptions& options = {});

/// Riesz fit at a caller-chosen penalty (no tuning).
RieszFit fit_riesz_fixed(const BasisExpansion& expansion, double lambda_tilde, bool post_lasso = false);

/// L_hat(d, x) = b'(d, x) gamma at each row.
Vector l_hat(const RieszFit& fit, const Vector& d, const Matrix& x);

}  // namespace oasd
