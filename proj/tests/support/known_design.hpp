#pragma once

// One-covariate Gaussian design with closed-form nuisances, used as ground truth:
//   X ~ N(0,1),  D = a X + V,  Y = D (1 + b X) + c X + s E,  V, E ~ N(0,1)
// so dD m = 1 + b X, F(y | d, x) = Phi((y - mu)/s) with mu = d (1 + b x) + c x,
// and the Riesz representer of the treatment density is L(d, x) = -(d - a x).

#include "oasd/estimator.hpp"
#include "oasd/stats.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <vector>

namespace known {

using oasd::Dataset;
using oasd::Index;
using oasd::IntervalU;
using oasd::Vector;

struct Design {
  double a = 0.5;
  double b = 0.5;
  double c = 0.5;
  double s = 1.0;

  double mu(double d, double x) const { return d * (1.0 + b * x) + c * x; }
};

// Misspecified conditional law used to break the CDF nuisances on purpose.
struct WrongLaw {
  double slope = 0.6;
  double xcoef = 0.2;
  double shift = 0.3;
  double s = 1.3;

  double mu(double d, double x) const { return slope * d + xcoef * x + shift; }
};

inline double big_g(double t) { return t * oasd::stats::normal_cdf(t) + oasd::stats::normal_pdf(t); }

// Integral over u of Phi((y - mu)/s) dy, and the probability mass of u.
inline double integral_phi(const IntervalU& u, double mu, double s) {
  return s * (big_g((u.y2 - mu) / s) - big_g((u.y1 - mu) / s));
}
inline double mass_phi(const IntervalU& u, double mu, double s) {
  return oasd::stats::normal_cdf((u.y2 - mu) / s) - oasd::stats::normal_cdf((u.y1 - mu) / s);
}

inline Dataset draw(const Design& g, Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  Dataset data;
  data.x.resize(n, 1);
  data.d.resize(n);
  data.y.resize(n);
  for (Index i = 0; i < n; ++i) {
    const double x = z(rng);
    const double d = g.a * x + z(rng);
    data.x(i, 0) = x;
    data.d[i] = d;
    data.y[i] = g.mu(d, x) + g.s * z(rng);
  }
  return data;
}

// theta(u) = E[(1 + b X) 1{Y in u}] / P(Y in u) by a tensor trapezoid rule over (X, V).
inline double theta_quadrature(const Design& g, const IntervalU& u, int nodes = 801, double span = 9.0) {
  const double step = 2.0 * span / (nodes - 1);
  double num = 0.0, den = 0.0;
  for (int i = 0; i < nodes; ++i) {
    const double x = -span + i * step;
    const double wx = oasd::stats::normal_pdf(x);
    for (int j = 0; j < nodes; ++j) {
      const double v = -span + j * step;
      const double w = wx * oasd::stats::normal_pdf(v);
      const double d = g.a * x + v;
      const double mass = mass_phi(u, g.mu(d, x), g.s);
      num += w * (1.0 + g.b * x) * mass;
      den += w * mass;
    }
  }
  return num / den;
}

// Brute-force Monte Carlo of E[1 + b X | Y in u].
inline double theta_monte_carlo(const Design& g, const IntervalU& u, long draws, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  double num = 0.0;
  long hits = 0;
  for (long r = 0; r < draws; ++r) {
    const double x = z(rng);
    const double d = g.a * x + z(rng);
    const double y = g.mu(d, x) + g.s * z(rng);
    if (y > u.y1 && y < u.y2) {
      num += 1.0 + g.b * x;
      ++hits;
    }
  }
  return num / static_cast<double>(hits);
}

struct Misspecify {
  bool wrong_cdf = false;  // IF and DIF from WrongLaw (mutually consistent)
  bool wrong_l = false;    // smooth but wrong Riesz representer
};

inline double true_l(const Design& g, double d, double x) { return -(d - g.a * x); }
inline double wrong_l(const Design& g, double d, double x) {
  return -0.3 * (d - g.a * x) + 0.4 * std::sin(x) + 0.2;
}

// Bundle with exact (or deliberately wrong) nuisances on an observed sample.
inline oasd::NuisanceBundle bundle(const Design& g, const Dataset& data, const IntervalU& u,
                                   Misspecify miss = {}) {
  const WrongLaw w;
  const Index n = data.n();
  oasd::NuisanceBundle out;
  out.u = u;
  out.if_values.resize(n);
  out.dif_values.resize(n);
  out.l_values.resize(n);
  out.indicator_integrals.resize(n);
  out.in_interval.resize(n);
  for (Index i = 0; i < n; ++i) {
    const double d = data.d[i];
    const double x = data.x(i, 0);
    if (miss.wrong_cdf) {
      out.if_values[i] = integral_phi(u, w.mu(d, x), w.s);
      out.dif_values[i] = -w.slope * mass_phi(u, w.mu(d, x), w.s);
    } else {
      out.if_values[i] = integral_phi(u, g.mu(d, x), g.s);
      out.dif_values[i] = -(1.0 + g.b * x) * mass_phi(u, g.mu(d, x), g.s);
    }
    out.l_values[i] = miss.wrong_l ? wrong_l(g, d, x) : true_l(g, d, x);
    out.indicator_integrals[i] = oasd::indicator_integral(data.y[i], u);
    out.in_interval[i] = data.y[i] > u.y1 && data.y[i] < u.y2 ? 1.0 : 0.0;
  }
  out.p_hat = out.in_interval.mean();
  return out;
}

// Population version of the design: a tensor trapezoid grid over (X, V) with
// normalized Gaussian weights, and Y-dependent terms replaced by their
// conditional expectations given (D, X). Weighted means over it are population
// expectations up to quadrature error, with no sampling noise.
struct Population {
  oasd::NuisanceBundle bundle;
  Vector weights;  // sums to one
  Vector d;
  Vector x;

  double mean(const Vector& v) const { return weights.dot(v); }
};

inline Population population(const Design& g, const IntervalU& u, int nodes = 401, double span = 9.0) {
  const Index n = static_cast<Index>(nodes) * nodes;
  const double step = 2.0 * span / (nodes - 1);
  Population pop;
  auto& out = pop.bundle;
  out.u = u;
  out.if_values.resize(n);
  out.dif_values.resize(n);
  out.l_values.resize(n);
  out.indicator_integrals.resize(n);
  out.in_interval.resize(n);
  pop.weights.resize(n);
  pop.d.resize(n);
  pop.x.resize(n);
  Index r = 0;
  for (int i = 0; i < nodes; ++i) {
    const double x = -span + i * step;
    for (int j = 0; j < nodes; ++j, ++r) {
      const double v = -span + j * step;
      const double d = g.a * x + v;
      const double mu = g.mu(d, x);
      pop.weights[r] = oasd::stats::normal_pdf(x) * oasd::stats::normal_pdf(v);
      pop.d[r] = d;
      pop.x[r] = x;
      out.if_values[r] = integral_phi(u, mu, g.s);
      out.dif_values[r] = -(1.0 + g.b * x) * mass_phi(u, mu, g.s);
      out.l_values[r] = true_l(g, d, x);
      out.indicator_integrals[r] = out.if_values[r];  // E[int 1{Y < y} dy | D, X] = IF
      out.in_interval[r] = mass_phi(u, mu, g.s);
    }
  }
  pop.weights /= pop.weights.sum();
  out.p_hat = pop.mean(out.in_interval);
  return pop;
}

// Least-squares fit of m(t) - m(0) = linear t + quadratic t^2, where m(t) is the
// population mean of a score at fixed theta after moving every nuisance along a
// smooth bounded direction: IF + t g, DIF + t dg/dd, L + t h, P + t pi.
struct GateauxFit {
  double linear = 0.0;
  double quadratic = 0.0;
};

// score(bundle, theta, mean_dif) returns per-point values.
template <typename Score>
GateauxFit gateaux(const Population& pop, double theta, Score score,
                   const std::vector<double>& steps = {-0.02, -0.01, 0.01, 0.02}) {
  const auto& base = pop.bundle;
  const double w = base.u.width();
  const Eigen::ArrayXd phase = pop.d.array() + 0.5 * pop.x.array();
  const Vector g = (0.2 * w * phase.sin()).matrix();
  const Vector dg = (0.2 * w * phase.cos()).matrix();
  const Vector h = (0.5 * phase.sin()).matrix();
  const double pi = 0.2 * base.p_hat;

  auto moment = [&](double t) {
    oasd::NuisanceBundle b = base;
    b.if_values += t * g;
    b.dif_values += t * dg;
    b.l_values += t * h;
    b.p_hat += t * pi;
    return pop.mean(score(b, theta, pop.mean(b.dif_values)));
  };
  const double m0 = moment(0.0);
  Eigen::MatrixXd design(static_cast<Index>(steps.size()), 2);
  Eigen::VectorXd rhs(static_cast<Index>(steps.size()));
  for (std::size_t k = 0; k < steps.size(); ++k) {
    const auto r = static_cast<Index>(k);
    design(r, 0) = steps[k];
    design(r, 1) = steps[k] * steps[k];
    rhs[r] = moment(steps[k]) - m0;
  }
  const Eigen::Vector2d coef = design.colPivHouseholderQr().solve(rhs);
  return {coef[0], coef[1]};
}

// The Riesz correction entered with the opposite sign, for contrast.
inline Vector flipped_score(const oasd::NuisanceBundle& b, double theta, double mean_dif) {
  const double p = b.p_hat;
  return (-b.dif_values.array() / p - theta +
          (b.l_values.array() / p) * (b.if_values.array() - b.indicator_integrals.array()) +
          (mean_dif / (p * p)) * (b.in_interval.array() - p))
      .matrix();
}

}  // namespace known
