#include "oasd/estimator.hpp"

#include "oasd/stats.hpp"

#include <cmath>
#include <sstream>

namespace oasd {

void NuisanceBundle::validate() const {
  const Index n = if_values.size();
  if (n == 0) {
    throw Error(ErrorKind::InvalidArgument, "nuisance bundle is empty");
  }
  if (dif_values.size() != n || l_values.size() != n || indicator_integrals.size() != n ||
      in_interval.size() != n) {
    throw Error(ErrorKind::InvalidArgument, "nuisance vectors have different lengths");
  }
  if (!(p_hat > 0.0)) {
    throw Error(ErrorKind::Numerical, "P_hat must be positive");
  }
}

double p_hat(const Dataset& data, const IntervalU& u) {
  if (data.n() == 0) {
    throw Error(ErrorKind::Data, "empty sample");
  }
  const double share =
      (data.y.array() > u.y1 && data.y.array() < u.y2).cast<double>().mean();
  if (share <= 0.0) {
    std::ostringstream msg;
    msg << "no observation falls inside (" << u.y1 << ", " << u.y2 << ")";
    throw Error(ErrorKind::Numerical, msg.str());
  }
  return share;
}

double min_p_hat(Index n) { return n > 0 ? 5.0 / static_cast<double>(n) : 1.0; }

Vector score_psi(const NuisanceBundle& bundle, double theta, double mean_dif) {
  bundle.validate();
  const double p = bundle.p_hat;
  const auto l = bundle.l_values.array();
  return (-bundle.dif_values.array() / p - theta -
          (l / p) * (bundle.if_values.array() - bundle.indicator_integrals.array()) +
          (mean_dif / (p * p)) * (bundle.in_interval.array() - p))
      .matrix();
}

Vector naive_psi(const NuisanceBundle& bundle, double theta) {
  bundle.validate();
  return (-bundle.dif_values.array() / bundle.p_hat - theta).matrix();
}

namespace {

OasdEstimate finish(const NuisanceBundle& bundle, double theta, Vector psi) {
  OasdEstimate est;
  est.u = bundle.u;
  est.theta = theta;
  est.p_hat = bundle.p_hat;
  est.se = stats::sd(psi) / std::sqrt(static_cast<double>(psi.size()));
  est.psi_values = std::move(psi);
  if (!std::isfinite(theta)) est.flags.emplace_back("non-finite estimate");
  return est;
}

}  // namespace

OasdEstimate theta_adml(const NuisanceBundle& bundle) {
  const double mean_dif = bundle.dif_values.mean();
  // The score is theta-linear with slope -1, so the root is its mean at zero.
  const double theta = score_psi(bundle, 0.0, mean_dif).mean();
  return finish(bundle, theta, score_psi(bundle, theta, mean_dif));
}

OasdEstimate theta_naive(const NuisanceBundle& bundle) {
  bundle.validate();
  const double theta = -bundle.dif_values.mean() / bundle.p_hat;
  return finish(bundle, theta, naive_psi(bundle, theta));
}

namespace {

const NuisanceModel& checked(const NuisanceModel& model) {
  if (!model.data || !model.dist || !model.riesz) {
    throw Error(ErrorKind::InvalidArgument, "nuisance model is incomplete");
  }
  model.scheme.validate();
  return model;
}

}  // namespace

NuisanceAssembler::NuisanceAssembler(const NuisanceModel& model)
    : model_(checked(model)), table_(*model.dist, model.data->d, model.data->x) {
  l_values_ = l_hat(*model.riesz, model.data->d, model.data->x);
}

NuisanceBundle NuisanceAssembler::bundle(const IntervalU& u) {
  const Dataset& data = *model_.data;
  NuisanceBundle out;
  out.u = u;
  out.p_hat = p_hat(data, u);
  const double floor = min_p_hat(data.n());
  if (out.p_hat < floor) {
    std::ostringstream msg;
    msg << "interval (" << u.y1 << ", " << u.y2 << ") holds a share " << out.p_hat
        << " below the minimum " << floor;
    throw Error(ErrorKind::Numerical, msg.str());
  }
  const RiemannPlan plan = make_riemann_plan(*model_.dist, u, model_.integral);
  out.if_values = integral_cdf_all(table_, plan, 0.0);
  out.dif_values = diff_integral_cdf_all(table_, plan, model_.scheme);
  out.l_values = l_values_;
  out.indicator_integrals = data.y.unaryExpr([&](double y) { return indicator_integral(y, u); });
  out.in_interval = (data.y.array() > u.y1 && data.y.array() < u.y2).cast<double>().matrix();
  return out;
}

}  // namespace oasd
